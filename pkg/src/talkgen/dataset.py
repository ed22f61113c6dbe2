"""Corpus persistence and statistics.

Layout under the output directory:

    manifest.jsonl                     one dialogue record per line
    audio/<dialogue_id>/utt_<i>.wav    per-utterance audio (final iteration)
    audio/<dialogue_id>/dialogue.wav   assembled dialogue waveform
    history/<dialogue_id>/t<k>_script.json    every iteration's script
    history/<dialogue_id>/t<k>_feedback.json  critic feedback, when produced
    failures/<run_id>.json             failed runs with completed history

Audio paths inside records are relative to the manifest directory so a
corpus can be moved wholesale.  Every file is written to a temp name and
renamed, and a duplicate dialogue_id is refused before anything is
written, so a failed write never corrupts an existing corpus.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .audio import encode_wav
from .errors import (DuplicateDialogueId, EmptyCorpus, MissingAudio, ParseError,
                     Violation)
from .evaluation import normalize_text
from .orchestrator import PipelineRun

TOKEN_RULE_NOTE = ("tokens: EN = normalized whitespace words, CN = normalized "
                   "characters; counts under other tokenizers will differ")


@dataclass(frozen=True)
class UtteranceRecord:
    index: int
    speaker_id: str
    raw_text: str
    stripped_text: str
    emotion_label: str | None
    audio_path: str
    duration: float


@dataclass(frozen=True)
class Provenance:
    variant: str
    loops: int
    seeds: dict
    backend_ids: dict
    history_paths: tuple[str, ...]


@dataclass(frozen=True)
class DialogueRecord:
    dialogue_id: str
    language: str
    topic_tag: str
    participants: tuple[str, ...]
    utterances: tuple[UtteranceRecord, ...]
    dialogue_audio_path: str
    total_duration: float
    provenance: Provenance

    def to_json_dict(self) -> dict:
        return {
            "dialogue_id": self.dialogue_id,
            "language": self.language,
            "topic_tag": self.topic_tag,
            "participants": list(self.participants),
            "utterances": [
                {
                    "index": u.index,
                    "speaker_id": u.speaker_id,
                    "raw_text": u.raw_text,
                    "stripped_text": u.stripped_text,
                    "emotion_label": u.emotion_label,
                    "audio_path": u.audio_path,
                    "duration": u.duration,
                }
                for u in self.utterances
            ],
            "dialogue_audio_path": self.dialogue_audio_path,
            "total_duration": self.total_duration,
            "provenance": {
                "variant": self.provenance.variant,
                "loops": self.provenance.loops,
                "seeds": self.provenance.seeds,
                "backend_ids": self.provenance.backend_ids,
                "history_paths": list(self.provenance.history_paths),
            },
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "DialogueRecord":
        prov = data["provenance"]
        return cls(
            dialogue_id=data["dialogue_id"],
            language=data["language"],
            topic_tag=data["topic_tag"],
            participants=tuple(data["participants"]),
            utterances=tuple(
                UtteranceRecord(
                    index=u["index"],
                    speaker_id=u["speaker_id"],
                    raw_text=u["raw_text"],
                    stripped_text=u["stripped_text"],
                    emotion_label=u["emotion_label"],
                    audio_path=u["audio_path"],
                    duration=u["duration"],
                )
                for u in data["utterances"]
            ),
            dialogue_audio_path=data["dialogue_audio_path"],
            total_duration=data["total_duration"],
            provenance=Provenance(
                variant=prov["variant"],
                loops=prov["loops"],
                seeds=dict(prov["seeds"]),
                backend_ids=dict(prov["backend_ids"]),
                history_paths=tuple(prov["history_paths"]),
            ),
        )


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def _dump(obj: object, indent: int | None = None) -> bytes:
    text = json.dumps(obj, ensure_ascii=False, sort_keys=True, indent=indent,
                      separators=(",", ":") if indent is None else None)
    return (text + "\n").encode("utf-8")


def _feedback_dict(feedback) -> dict:
    return {
        "per_utterance": [
            {"index": item.utterance_index, "suggestion": item.suggestion,
             "criteria": list(item.criteria)}
            for item in feedback.per_utterance
        ],
        "global_notes": feedback.global_notes,
    }


def build_record(run: PipelineRun) -> DialogueRecord:
    """Flatten a completed run into its manifest record (paths are relative)."""
    if run.status != "completed" or run.dialogue_audio is None:
        raise ValueError(f"run {run.run_id} is not completed")
    script = run.final_script
    durations = {seg.utterance_index: seg.duration
                 for seg in run.final_synthesis.segments}
    utterances = tuple(
        UtteranceRecord(
            index=u.index,
            speaker_id=u.speaker_id,
            raw_text=u.raw_text,
            stripped_text=u.stripped_text,
            emotion_label=u.emotion_label,
            audio_path=f"audio/{run.run_id}/utt_{u.index}.wav",
            duration=durations[u.index],
        )
        for u in script.utterances
    )
    history = []
    for record in run.iterations:
        history.append(f"history/{run.run_id}/t{record.t}_script.json")
        if record.feedback is not None:
            history.append(f"history/{run.run_id}/t{record.t}_feedback.json")
    return DialogueRecord(
        dialogue_id=run.run_id,
        language=run.language,
        topic_tag=run.topic,
        participants=tuple(c.id for c in run.participants),
        utterances=utterances,
        dialogue_audio_path=f"audio/{run.run_id}/dialogue.wav",
        total_duration=run.dialogue_audio.duration,
        provenance=Provenance(
            variant=run.variant.mode,
            loops=run.variant.loops,
            seeds={"master": run.master_seed, "run": run.seed, "ordinal": run.ordinal},
            backend_ids=dict(run.backend_ids),
            history_paths=tuple(history),
        ),
    )


def write_corpus(runs: list[PipelineRun], out_dir: str | Path) -> Path:
    """Persist completed runs; append-safe, refuses duplicate dialogue ids.

    Returns the manifest path.  Failed runs are ignored here; see
    write_failure_reports.
    """
    out = Path(out_dir)
    manifest_path = out / "manifest.jsonl"

    existing_lines: list[str] = []
    existing_ids: set[str] = set()
    if manifest_path.exists():
        with open(manifest_path, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    existing_lines.append(line.rstrip("\n"))
                    existing_ids.add(json.loads(line)["dialogue_id"])

    completed = [run for run in runs if run.status == "completed"]
    incoming = [run.run_id for run in completed]
    clashes = sorted(set(incoming) & existing_ids)
    if len(set(incoming)) != len(incoming):
        dupes = sorted({i for i in incoming if incoming.count(i) > 1})
        raise DuplicateDialogueId(f"duplicate dialogue ids within batch: {dupes}")
    if clashes:
        raise DuplicateDialogueId(
            f"dialogue ids already present in {manifest_path}: {clashes}")

    out.mkdir(parents=True, exist_ok=True)
    new_lines = []
    for run in completed:
        record = build_record(run)
        for utt, seg in zip(record.utterances, run.final_synthesis.segments):
            _atomic_write(out / utt.audio_path, seg.audio)
        _atomic_write(out / record.dialogue_audio_path,
                      encode_wav(run.dialogue_audio.waveform))
        for iteration in run.iterations:
            _atomic_write(out / f"history/{run.run_id}/t{iteration.t}_script.json",
                          _dump(iteration.script.to_dict(), indent=2))
            if iteration.feedback is not None:
                _atomic_write(out / f"history/{run.run_id}/t{iteration.t}_feedback.json",
                              _dump(_feedback_dict(iteration.feedback), indent=2))
        new_lines.append(json.dumps(record.to_json_dict(), ensure_ascii=False,
                                    sort_keys=True, separators=(",", ":")))

    payload = "".join(line + "\n" for line in existing_lines + new_lines)
    _atomic_write(manifest_path, payload.encode("utf-8"))
    return manifest_path


def write_failure_reports(runs: list[PipelineRun], out_dir: str | Path) -> list[Path]:
    """Persist failed runs (error context plus completed iterations)."""
    out = Path(out_dir)
    paths = []
    for run in runs:
        if run.status != "failed":
            continue
        report = {
            "run_id": run.run_id,
            "ordinal": run.ordinal,
            "seed": run.seed,
            "master_seed": run.master_seed,
            "variant": run.variant.mode,
            "loops": run.variant.loops,
            "failed_stage": run.failed_stage,
            "failed_iteration": run.failed_iteration,
            "error": run.error,
            "completed_iterations": [
                {
                    "t": record.t,
                    "script": record.script.to_dict(),
                    "feedback": (_feedback_dict(record.feedback)
                                 if record.feedback is not None else None),
                }
                for record in run.iterations
            ],
        }
        path = out / "failures" / f"{run.run_id}.json"
        _atomic_write(path, _dump(report, indent=2))
        paths.append(path)
    return paths


def load_corpus(manifest_path: str | Path, check_audio: bool = True) -> list[DialogueRecord]:
    """Read a manifest back into records, verifying referenced audio exists."""
    manifest = Path(manifest_path)
    if not manifest.exists():
        raise ParseError("manifest does not exist", source=str(manifest))
    base = manifest.parent

    records: list[DialogueRecord] = []
    seen: dict[str, int] = {}
    with open(manifest, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = DialogueRecord.from_json_dict(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}",
                                 source=str(manifest), line=lineno) from exc
            except (KeyError, TypeError) as exc:
                raise ParseError(f"record missing field: {exc}",
                                 source=str(manifest), line=lineno) from exc
            if record.dialogue_id in seen:
                raise ParseError(
                    f"dialogue_id {record.dialogue_id!r} already seen on line "
                    f"{seen[record.dialogue_id]}", source=str(manifest), line=lineno)
            seen[record.dialogue_id] = lineno
            records.append(record)

    if check_audio:
        for record in records:
            for path in [u.audio_path for u in record.utterances] + [record.dialogue_audio_path]:
                if not (base / path).is_file():
                    raise MissingAudio(
                        f"dialogue {record.dialogue_id}: missing audio file {path}")
    return records


def validate_corpus(manifest_path: str | Path, check_audio: bool = True) -> list[Violation]:
    """Violation-list flavor of load_corpus for the validate command."""
    violations: list[Violation] = []
    try:
        records = load_corpus(manifest_path, check_audio=False)
    except ParseError as exc:
        return [Violation("PARSE_ERROR", str(manifest_path), str(exc))]
    if check_audio:
        base = Path(manifest_path).parent
        for record in records:
            for path in [u.audio_path for u in record.utterances] + [record.dialogue_audio_path]:
                if not (base / path).is_file():
                    violations.append(Violation(
                        "MISSING_AUDIO", record.dialogue_id, f"no such file: {path}"))
    return violations


@dataclass(frozen=True)
class LanguageStats:
    dialogues: int
    utterances_total: int
    utterances_avg: float
    tokens_total: int
    tokens_avg: float
    duration_total: float
    duration_avg: float
    roles_total: int
    roles_avg: float


@dataclass(frozen=True)
class CorpusStats:
    languages: dict[str, LanguageStats] = field(default_factory=dict)
    topics: dict[str, int] = field(default_factory=dict)
    dialogues: int = 0

    def to_dict(self) -> dict:
        return {
            "dialogues": self.dialogues,
            "token_rule": TOKEN_RULE_NOTE,
            "languages": {
                lang: {
                    "dialogues": s.dialogues,
                    "utterances": {"total": s.utterances_total, "avg": s.utterances_avg},
                    "tokens": {"total": s.tokens_total, "avg": s.tokens_avg},
                    "duration_seconds": {"total": s.duration_total, "avg": s.duration_avg},
                    "roles": {"total": s.roles_total, "avg": s.roles_avg},
                }
                for lang, s in sorted(self.languages.items())
            },
            "topics": dict(sorted(self.topics.items())),
        }


def compute_stats(records: list[DialogueRecord]) -> CorpusStats:
    """Aggregate corpus statistics per language plus the topic distribution."""
    if not records:
        raise EmptyCorpus("no dialogue records to aggregate")

    by_language: dict[str, list[DialogueRecord]] = {}
    topics: dict[str, int] = {}
    for record in records:
        by_language.setdefault(record.language, []).append(record)
        topics[record.topic_tag] = topics.get(record.topic_tag, 0) + 1

    languages = {}
    for language, group in by_language.items():
        dialogues = len(group)
        utterances_total = sum(len(r.utterances) for r in group)
        tokens_total = sum(
            len(normalize_text(u.stripped_text, language))
            for r in group for u in r.utterances)
        duration_total = sum(u.duration for r in group for u in r.utterances)
        roles_per_dialogue = [len({u.speaker_id for u in r.utterances}) for r in group]
        roles_union = len({u.speaker_id for r in group for u in r.utterances})
        languages[language] = LanguageStats(
            dialogues=dialogues,
            utterances_total=utterances_total,
            utterances_avg=utterances_total / dialogues,
            tokens_total=tokens_total,
            tokens_avg=tokens_total / dialogues,
            duration_total=duration_total,
            duration_avg=duration_total / dialogues,
            roles_total=roles_union,
            roles_avg=sum(roles_per_dialogue) / dialogues,
        )

    return CorpusStats(languages=languages, topics=topics, dialogues=len(records))


def render_stats_table(stats: CorpusStats) -> str:
    """Aligned two-column-per-language table plus the topic distribution."""
    langs = sorted(stats.languages)
    header = ["metric"] + [f"{lang} avg" for lang in langs] + [f"{lang} total" for lang in langs]
    rows = [
        ("dialogues", [("", f"{stats.languages[l].dialogues}") for l in langs]),
        ("utterances", [(f"{stats.languages[l].utterances_avg:.2f}",
                         f"{stats.languages[l].utterances_total}") for l in langs]),
        ("tokens", [(f"{stats.languages[l].tokens_avg:.2f}",
                     f"{stats.languages[l].tokens_total}") for l in langs]),
        ("duration (sec)", [(f"{stats.languages[l].duration_avg:.2f}",
                             f"{stats.languages[l].duration_total:.2f}") for l in langs]),
        ("roles", [(f"{stats.languages[l].roles_avg:.2f}",
                    f"{stats.languages[l].roles_total}") for l in langs]),
    ]
    table_rows = []
    for name, cells in rows:
        avg_cells = [c[0] for c in cells]
        total_cells = [c[1] for c in cells]
        table_rows.append([name] + avg_cells + total_cells)

    widths = [max(len(str(row[i])) for row in [header] + table_rows)
              for i in range(len(header))]
    lines = [f"# {TOKEN_RULE_NOTE}"]
    for row in [header] + table_rows:
        lines.append("  ".join(str(cell).ljust(width) for cell, width in zip(row, widths)))
    lines.append("")
    lines.append("topics:")
    for topic, count in sorted(stats.topics.items()):
        lines.append(f"  {topic}: {count}")
    return "\n".join(lines)
