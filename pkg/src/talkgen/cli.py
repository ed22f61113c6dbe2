"""Command-line entry points: generate, stats, evaluate, validate.

Exit codes are a stable contract for scripting:
    0  success
    1  validation or evaluation failure
    2  configuration error
    3  backend exhaustion (any run failed after retries)
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import dataset, evaluation
from .agents import (HttpCriticBackend, HttpSynthesizerBackend, HttpWriterBackend,
                     MockCriticBackend, MockSynthesizerBackend, MockWriterBackend)
from .characters import load_pool, validate_pool
from .config import RunConfig, load_config, validate_config
from .errors import (BackendError, ConfigError, DuplicateDialogueId, EmptyCorpus,
                     EmptyReference, EmptySheet, EmptyVotes, MissingAudio,
                     OutOfRangeScore, ParseError, TalkgenError, ValidationError,
                     Violation)
from .orchestrator import Backends, run_batch

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_BACKEND = 3
EXIT_INTERRUPTED = 130

logger = logging.getLogger(__name__)

_VALIDATION_ERRORS = (ValidationError, ParseError, EmptyCorpus, MissingAudio,
                      DuplicateDialogueId, EmptyReference, EmptySheet, EmptyVotes,
                      OutOfRangeScore)


def _add_global_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="JSON config file")
    parser.add_argument("--mock", action="store_true", default=None,
                        help="use deterministic in-process backends")
    parser.add_argument("--seed", type=int, metavar="N", help="master seed")
    parser.add_argument("--parallelism", type=int, metavar="N",
                        help="worker threads for batch generation")
    parser.add_argument("--out", metavar="DIR", help="output corpus directory")
    parser.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="stderr log verbosity")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="talkgen",
        description="Generate and evaluate multi-party dialogue speech corpora "
                    "through an iterative write/synthesize/critique pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="run the pipeline and write a corpus")
    _add_global_flags(gen)
    gen.add_argument("--pool", metavar="PATH", help="character pool JSON file")
    gen.add_argument("--language", choices=["CN", "EN"])
    gen.add_argument("--variant",
                     choices=["writer_only", "writer_self_refine", "critic_loop"])
    gen.add_argument("--loops", type=int, metavar="T",
                     help="critique/rewrite iterations (critic_loop only)")
    gen.add_argument("-n", "--dialogues", type=int, metavar="N",
                     help="number of dialogues to generate")

    stats = sub.add_parser("stats", help="corpus statistics report")
    _add_global_flags(stats)
    stats.add_argument("--manifest", required=True, metavar="PATH")
    stats.add_argument("--json", action="store_true", help="machine-readable output")
    stats.add_argument("--no-audio-check", action="store_true",
                       help="skip audio file existence checks")

    ev = sub.add_parser("evaluate", help="error rates, rating aggregates, predictor means")
    _add_global_flags(ev)
    ev.add_argument("--manifest", required=True, metavar="PATH")
    ev.add_argument("--transcripts", metavar="PATH",
                    help="TSV of dialogue_id, utterance_index, hypothesis")
    ev.add_argument("--ratings", metavar="PATH",
                    help="JSON array of {metric, dialogue_id, rater_id, score}")
    ev.add_argument("--predictor", metavar="URL",
                    help="scoring endpoint; overrides the config entry")
    ev.add_argument("--score-unit", choices=["dialogue", "utterance"],
                    default="dialogue",
                    help="which artifact the predictor scores (recorded in the report)")
    ev.add_argument("--json", action="store_true", help="machine-readable output")

    val = sub.add_parser("validate", help="check a pool or manifest, list violations")
    _add_global_flags(val)
    val.add_argument("--pool", metavar="PATH")
    val.add_argument("--manifest", metavar="PATH")
    val.add_argument("--no-audio-check", action="store_true")

    return parser


def _effective_config(args: argparse.Namespace) -> RunConfig:
    config = load_config(args.config)
    overrides = {}
    for flag, key in (("mock", "mock"), ("seed", "seed"), ("parallelism", "parallelism"),
                      ("out", "out_dir"), ("pool", "pool"), ("language", "language"),
                      ("variant", "variant"), ("loops", "loops"),
                      ("dialogues", "dialogues")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    return dataclasses.replace(config, **overrides)


def _build_backends(config: RunConfig) -> Backends:
    if config.mock:
        return Backends(
            writer=MockWriterBackend(),
            synthesizer=MockSynthesizerBackend(sample_rate=config.sample_rate),
            critic=MockCriticBackend(),
        )
    writer = HttpWriterBackend(config.writer.url, config.writer.model,
                               config.writer.token_env, config.writer.timeout_seconds)
    synthesizer = HttpSynthesizerBackend(config.synthesizer.url,
                                         config.synthesizer.token_env,
                                         config.synthesizer.timeout_seconds)
    critic = None
    if config.critic is not None:
        critic = HttpCriticBackend(config.critic.url, config.critic.model,
                                   config.critic.token_env,
                                   config.critic.timeout_seconds)
    return Backends(writer=writer, synthesizer=synthesizer, critic=critic)


def cmd_generate(args: argparse.Namespace) -> int:
    config = validate_config(_effective_config(args), for_generate=True)
    pool = load_pool(config.pool)
    backends = _build_backends(config)
    variant = config.pipeline_variant()
    options = config.pipeline_options()

    batch = run_batch(pool, variant, backends, master_seed=config.seed,
                      count=config.dialogues, options=options,
                      parallelism=config.parallelism)

    out_dir = Path(config.out_dir)
    manifest = dataset.write_corpus(batch.runs, out_dir)
    dataset.write_failure_reports(batch.runs, out_dir)
    with open(out_dir / "config.json", "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")

    for run in batch.runs:
        if run.status == "completed":
            print(f"run {run.ordinal:04d} ok: {run.run_id} "
                  f"({len(run.final_script.utterances)} utterances)")
        else:
            print(f"run {run.ordinal:04d} FAILED at {run.failed_stage} "
                  f"(iteration {run.failed_iteration}): {run.error}")

    if batch.completed:
        records = dataset.load_corpus(manifest, check_audio=False)
        print()
        print(dataset.render_stats_table(dataset.compute_stats(records)))
    print(f"\nmanifest: {manifest}")

    if batch.interrupted:
        print(f"interrupted: {len(batch.runs)} of {config.dialogues} runs persisted",
              file=sys.stderr)
        return EXIT_INTERRUPTED
    if batch.failures:
        print(f"{len(batch.failures)} of {len(batch.runs)} runs failed "
              f"(ordinals: {[r.ordinal for r in batch.failures]})", file=sys.stderr)
        return EXIT_BACKEND
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    records = dataset.load_corpus(args.manifest, check_audio=not args.no_audio_check)
    stats = dataset.compute_stats(records)
    if args.json:
        print(json.dumps(stats.to_dict(), ensure_ascii=False, indent=2, sort_keys=True))
    else:
        print(dataset.render_stats_table(stats))
    return EXIT_OK


def _variant_label(record: dataset.DialogueRecord) -> str:
    if record.provenance.variant == "critic_loop":
        return f"critic_loop[{record.provenance.loops}]"
    return record.provenance.variant


def _evaluate_transcripts(records, transcripts_path: str) -> dict:
    """Pooled percent error rate per (variant, language) over covered utterances."""
    hypotheses = {(d, i): h for d, i, h in evaluation.load_transcripts(transcripts_path)}
    pairs: dict[tuple[str, str], list[evaluation.TranscriptPair]] = {}
    for record in records:
        label = _variant_label(record)
        for utterance in record.utterances:
            hyp = hypotheses.get((record.dialogue_id, utterance.index))
            if hyp is None:
                continue
            pairs.setdefault((label, record.language), []).append(
                evaluation.TranscriptPair(reference=utterance.stripped_text,
                                          hypothesis=hyp,
                                          language=record.language))
    return {
        label: {
            language: {
                "percent": evaluation.corpus_error_rate(group),
                "metric": "WER" if language == "EN" else "CER",
                "pairs": len(group),
            }
            for (lbl, language), group in sorted(pairs.items()) if lbl == label
        }
        for label in sorted({lbl for lbl, _ in pairs})
    }


def _evaluate_ratings(records, ratings_path: str) -> dict:
    sheets = evaluation.load_ratings(ratings_path)
    variant_of = {r.dialogue_id: _variant_label(r) for r in records}
    out: dict[str, dict] = {}
    for metric, sheet in sorted(sheets.items()):
        by_variant: dict[str, list[float]] = {}
        for item in sheet.items:
            label = variant_of.get(item.dialogue_id)
            if label is None:
                raise ValidationError([Violation(
                    "UNKNOWN_DIALOGUE", item.dialogue_id,
                    "rating references a dialogue absent from the manifest")])
            by_variant.setdefault(label, []).append(item.score)
        for label, scores in sorted(by_variant.items()):
            agg = evaluation.aggregate(scores)
            out.setdefault(label, {})[metric] = {
                "mean": agg.mean, "dispersion": agg.dispersion, "n": agg.n}
    return out


def _evaluate_predictor(records, url: str, config: RunConfig, score_unit: str,
                        manifest_dir: Path) -> dict:
    if config.mock:
        client = _MockPredictor()
    else:
        token_env = (config.predictor.token_env if config.predictor is not None
                     else f"{config.env_prefix}_PREDICTOR_TOKEN")
        client = evaluation.HttpPredictorClient(url, token_env=token_env)
    scores: dict[tuple[str, str], list[float]] = {}
    for record in records:
        label = _variant_label(record)
        if score_unit == "dialogue":
            paths = [record.dialogue_audio_path]
        else:
            paths = [u.audio_path for u in record.utterances]
        for path in paths:
            wav = (manifest_dir / path).read_bytes()
            scores.setdefault((label, record.language), []).append(
                evaluation.score_with_predictor(client, wav))
    return {
        label: {
            language: {"mean": sum(group) / len(group), "n": len(group)}
            for (lbl, language), group in sorted(scores.items()) if lbl == label
        }
        for label in sorted({lbl for lbl, _ in scores})
    }


class _MockPredictor:
    """Constant mid-scale score; lets mock-mode evaluation run offline."""

    def score(self, wav_bytes: bytes) -> float:
        return 4.0


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = _effective_config(args)
    predictor_url = args.predictor or (config.predictor.url if config.predictor else None)
    if not (args.transcripts or args.ratings or predictor_url):
        raise ConfigError(
            "evaluate needs at least one of --transcripts, --ratings, --predictor")

    need_audio = bool(predictor_url)
    records = dataset.load_corpus(args.manifest, check_audio=need_audio)
    if not records:
        raise EmptyCorpus("manifest holds no records")

    report: dict = {"normalization_version": evaluation.NORMALIZATION_VERSION,
                    "rows": {}}

    def merge(section: str, data: dict) -> None:
        for label, values in data.items():
            report["rows"].setdefault(label, {})[section] = values

    if args.transcripts:
        merge("error_rate", _evaluate_transcripts(records, args.transcripts))
    if args.ratings:
        merge("ratings", _evaluate_ratings(records, args.ratings))
    if predictor_url:
        report["scored_artifact"] = args.score_unit
        merge("predictor", _evaluate_predictor(records, predictor_url, config,
                                               args.score_unit, Path(args.manifest).parent))

    if args.json:
        print(json.dumps(report, ensure_ascii=False, indent=2, sort_keys=True))
    else:
        print(f"normalization: {report['normalization_version']}")
        if "scored_artifact" in report:
            print(f"predictor scored: {report['scored_artifact']} audio")
        for label, sections in sorted(report["rows"].items()):
            print(f"\n{label}")
            for metric, values in sorted(sections.get("ratings", {}).items()):
                print(f"  {metric}: {values['mean']:.2f} ± {values['dispersion']:.3f} "
                      f"(n={values['n']})")
            for language, values in sorted(sections.get("predictor", {}).items()):
                print(f"  predictor({language}): {values['mean']:.3f} (n={values['n']})")
            for language, values in sorted(sections.get("error_rate", {}).items()):
                print(f"  {values['metric']}({language}): {values['percent']:.2f}% "
                      f"over {values['pairs']} utterances")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    if not args.pool and not args.manifest:
        raise ConfigError("validate needs --pool and/or --manifest")
    violations = []
    if args.pool:
        try:
            pool = load_pool(args.pool, check_audio=not args.no_audio_check)
            violations.extend(validate_pool(pool, check_audio=not args.no_audio_check))
        except ValidationError as exc:
            violations.extend(exc.violations)
    if args.manifest:
        violations.extend(dataset.validate_corpus(
            args.manifest, check_audio=not args.no_audio_check))
    for violation in violations:
        print(violation)
    return EXIT_FAILURE if violations else EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"generate": cmd_generate, "stats": cmd_stats,
                "evaluate": cmd_evaluate, "validate": cmd_validate}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except TalkgenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
