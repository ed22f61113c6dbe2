"""Pipeline orchestration: sample, write, synthesize, critique, repeat.

A run executes one dialogue end to end.  With the critic loop enabled it
alternates critique and rewrite for a configured number of loops; every
intermediate script, synthesis, and feedback is retained so downstream
consumers (and tests) can audit exactly what each stage consumed.

Determinism: every random decision derives from a per-run seed, which is
itself a documented hash of (master seed, run ordinal) - see split_seed.
Two batches with the same master seed produce identical artifacts
regardless of parallelism.
"""

from __future__ import annotations

import hashlib
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field, replace
from random import Random
from typing import Callable

from . import audio as audio_mod
from .agents.ops import critique, synthesize, write_script
from .agents.prompts import CORRECTIVE_INSTRUCTION, SELF_REFINE_NOTE, build_writer_prompt
from .agents.types import (CriticBackend, CritiqueFeedback, GenerationParams,
                           SynthesisResult, SynthesizerBackend, WriterBackend,
                           WriterRequest)
from .audio import DialogueAudio
from .characters import Character, CharacterPool, sample_participants
from .errors import BackendError, InsufficientCharacters, MalformedOutputError, StageError
from .script import DEFAULT_MARKUP, DialogueScript, MarkupConfig

MODES = ("writer_only", "writer_self_refine", "critic_loop")

DEFAULT_TOPICS = {
    "EN": ("finance", "travel", "hiking", "cooking", "music", "sports",
           "work life", "science", "gardening", "commuting"),
    "CN": ("finance", "travel", "hiking", "cooking", "music", "sports",
           "work life", "science", "gardening", "commuting"),
}


def split_seed(seed: int, label: str) -> int:
    """Derive a child seed: low 64 bits of SHA-256 over "{seed}:{label}".

    Pure and documented so tests (and resumed batches) can recompute the
    exact seed of any stage.
    """
    digest = hashlib.sha256(f"{seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class PipelineVariant:
    """Which stages run: plain writer, self-refining writer, or critic loop."""

    mode: str = "critic_loop"
    loops: int = 0

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode != "critic_loop" and self.loops != 0:
            raise ValueError(f"{self.mode} implies loops=0, got {self.loops}")
        if self.loops < 0:
            raise ValueError(f"loops must be >= 0, got {self.loops}")

    @property
    def label(self) -> str:
        if self.mode == "critic_loop":
            return f"critic_loop[{self.loops}]"
        return self.mode


@dataclass(frozen=True)
class RetryPolicy:
    """Backend failures: `attempts` tries with exponential backoff.

    Off-contract replies are retried once with a corrective instruction,
    independent of the backend attempt budget.
    """

    attempts: int = 3
    base_delay_seconds: float = 1.0
    factor: float = 2.0


@dataclass(frozen=True)
class PipelineOptions:
    language: str = "EN"
    topics: tuple[str, ...] = DEFAULT_TOPICS["EN"]
    participant_weights: tuple[tuple[int, float], ...] = (
        (2, 0.25), (3, 0.35), (4, 0.25), (5, 0.15))
    prefer_related: bool = True
    temperature: float = 0.8
    min_utterances: int = 2
    max_utterances: int = 60
    gap_seconds: float = audio_mod.DEFAULT_GAP_SECONDS
    sample_rate: int = audio_mod.CANONICAL_RATE
    critique_final: bool = False
    retry: RetryPolicy = RetryPolicy()
    markup: MarkupConfig = DEFAULT_MARKUP

    def to_dict(self) -> dict:
        return {
            "language": self.language,
            "topics": list(self.topics),
            "participant_weights": {str(c): w for c, w in self.participant_weights},
            "prefer_related": self.prefer_related,
            "temperature": self.temperature,
            "min_utterances": self.min_utterances,
            "max_utterances": self.max_utterances,
            "gap_seconds": self.gap_seconds,
            "sample_rate": self.sample_rate,
            "critique_final": self.critique_final,
            "retry": {
                "attempts": self.retry.attempts,
                "base_delay_seconds": self.retry.base_delay_seconds,
                "factor": self.retry.factor,
            },
            "pause_kinds": sorted(self.markup.pause_kinds),
        }


@dataclass
class Backends:
    writer: WriterBackend
    synthesizer: SynthesizerBackend
    critic: CriticBackend | None = None

    def ids(self, critic_used: bool) -> dict[str, str]:
        out = {"writer": self.writer.backend_id,
               "synthesizer": self.synthesizer.backend_id}
        if critic_used and self.critic is not None:
            out["critic"] = self.critic.backend_id
        return out


@dataclass
class IterationRecord:
    """Full audit trail of one loop iteration.

    writer_request keeps the exact prior script/feedback the writer saw;
    feedback is the critique of THIS iteration's dialogue and stays None
    on the final iteration unless a final critique was requested.
    """

    t: int
    writer_request: WriterRequest
    script: DialogueScript
    synthesis: SynthesisResult
    feedback: CritiqueFeedback | None = None
    utterance_count_delta: int = 0
    wall_times: dict[str, float] = field(default_factory=dict)


@dataclass
class PipelineRun:
    run_id: str
    ordinal: int
    seed: int
    master_seed: int
    variant: PipelineVariant
    language: str
    topic: str
    participants: tuple[Character, ...]
    iterations: list[IterationRecord] = field(default_factory=list)
    status: str = "completed"
    error: str | None = None
    failed_stage: str | None = None
    failed_iteration: int | None = None
    dialogue_audio: DialogueAudio | None = None
    backend_ids: dict[str, str] = field(default_factory=dict)
    config_snapshot: dict = field(default_factory=dict)
    elapsed_seconds: float = 0.0

    @property
    def final_script(self) -> DialogueScript:
        return self.iterations[-1].script

    @property
    def final_synthesis(self) -> SynthesisResult:
        return self.iterations[-1].synthesis


def _run_stage(
    stage: str,
    call: Callable,
    corrective: Callable | None,
    policy: RetryPolicy,
    sleep: Callable[[float], None],
):
    """Apply the retry policy to one stage invocation."""
    attempt = 1
    delay = policy.base_delay_seconds
    corrected = False
    while True:
        try:
            return call()
        except MalformedOutputError:
            if corrective is None or corrected:
                raise
            corrected = True
            call = corrective
        except BackendError:
            if attempt >= policy.attempts:
                raise
            sleep(delay)
            delay *= policy.factor
            attempt += 1


def run_pipeline(
    pool: CharacterPool,
    variant: PipelineVariant,
    backends: Backends,
    seed: int,
    options: PipelineOptions = PipelineOptions(),
    ordinal: int = 0,
    master_seed: int | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> PipelineRun:
    """Produce one dialogue; raises StageError (with .partial_run) on failure."""
    if variant.mode == "critic_loop" and variant.loops > 0 and backends.critic is None:
        raise ValueError("critic_loop with loops > 0 requires a critic backend")

    started = time.monotonic()
    run_id = f"dlg-{options.language.lower()}-{ordinal:04d}-{seed & 0xFFFFFFFF:08x}"
    run = PipelineRun(
        run_id=run_id, ordinal=ordinal, seed=seed,
        master_seed=master_seed if master_seed is not None else seed,
        variant=variant, language=options.language, topic="", participants=(),
    )
    uses_critic = variant.mode == "critic_loop" and (
        variant.loops > 0 or options.critique_final)
    run.backend_ids = backends.ids(critic_used=uses_critic)
    run.config_snapshot = {
        "variant": variant.mode,
        "loops": variant.loops,
        "seed": seed,
        "master_seed": run.master_seed,
        "ordinal": ordinal,
        **options.to_dict(),
    }

    def fail(stage: str, t: int, cause: Exception) -> StageError:
        run.status = "failed"
        run.error = str(cause)
        run.failed_stage = stage
        run.failed_iteration = t
        run.elapsed_seconds = time.monotonic() - started
        error = StageError(run_id, t, stage, cause)
        error.partial_run = run
        return error

    def staged(stage: str, t: int, call: Callable, corrective: Callable | None = None):
        begin = time.monotonic()
        try:
            result = _run_stage(stage, call, corrective, options.retry, sleep)
        except Exception as exc:
            raise fail(stage, t, exc) from exc
        return result, time.monotonic() - begin

    # Participant sampling and topic choice are pure functions of the seed.
    try:
        candidates = pool.members(options.language)
        sizes = [(c, w) for c, w in options.participant_weights
                 if 2 <= c <= len(candidates) and w > 0]
        if not sizes:
            raise InsufficientCharacters(
                f"no admissible participant count for {len(candidates)} "
                f"{options.language} characters")
        size_rng = Random(split_seed(seed, "participant-count"))
        count = size_rng.choices([c for c, _ in sizes], weights=[w for _, w in sizes])[0]
        participants = sample_participants(
            pool, count, options.language,
            rng_seed=split_seed(seed, "participants"),
            prefer_related=options.prefer_related)
        topic = Random(split_seed(seed, "topic")).choice(list(options.topics))
    except Exception as exc:
        raise fail("sample", 0, exc) from exc
    run.participants = participants
    run.topic = topic

    def writer_params(t: int) -> GenerationParams:
        return GenerationParams(temperature=options.temperature,
                                seed=split_seed(seed, f"writer:{t}"))

    def corrective_request(request: WriterRequest) -> WriterRequest:
        return replace(request,
                       system_prompt=f"{request.system_prompt}\n\n{CORRECTIVE_INSTRUCTION}")

    def do_write(request: WriterRequest):
        return (
            lambda: write_script(backends.writer, request, options.markup,
                                 options.min_utterances, options.max_utterances),
            lambda: write_script(backends.writer, corrective_request(request),
                                 options.markup, options.min_utterances,
                                 options.max_utterances),
        )

    def append_iteration(t: int, request: WriterRequest) -> IterationRecord:
        call, corrective = do_write(request)
        script, write_s = staged("write", t, call, corrective)
        synthesis, synth_s = staged(
            "synthesize", t, lambda: synthesize(backends.synthesizer, script, pool))
        prior_len = len(run.iterations[-1].script.utterances) if run.iterations else None
        record = IterationRecord(
            t=t, writer_request=request, script=script, synthesis=synthesis,
            utterance_count_delta=(len(script.utterances) - prior_len
                                   if prior_len is not None else 0),
            wall_times={"write": write_s, "synthesize": synth_s},
        )
        run.iterations.append(record)
        return record

    initial_request = build_writer_prompt(
        participants, topic, options.language,
        params=writer_params(0), markup=options.markup)
    append_iteration(0, initial_request)

    if variant.mode == "writer_self_refine":
        prior = run.iterations[0]
        request = build_writer_prompt(
            participants, topic, options.language,
            prior_script=prior.script,
            prior_feedback=CritiqueFeedback(global_notes=SELF_REFINE_NOTE),
            params=writer_params(1), markup=options.markup)
        append_iteration(1, request)
    elif variant.mode == "critic_loop":
        for t in range(1, variant.loops + 1):
            prior = run.iterations[t - 1]
            feedback, critic_s = staged(
                "critique", t - 1,
                lambda: critique(backends.critic, prior.synthesis, prior.script),
                lambda: critique(backends.critic, prior.synthesis, prior.script,
                                 extra_instruction=CORRECTIVE_INSTRUCTION))
            prior.feedback = feedback
            prior.wall_times["critique"] = critic_s
            request = build_writer_prompt(
                participants, topic, options.language,
                prior_script=prior.script, prior_feedback=feedback,
                params=writer_params(t), markup=options.markup)
            append_iteration(t, request)
        if options.critique_final and variant.loops >= 0 and backends.critic is not None:
            last = run.iterations[-1]
            feedback, critic_s = staged(
                "critique", last.t,
                lambda: critique(backends.critic, last.synthesis, last.script),
                lambda: critique(backends.critic, last.synthesis, last.script,
                                 extra_instruction=CORRECTIVE_INSTRUCTION))
            last.feedback = feedback
            last.wall_times["critique"] = critic_s

    final = run.iterations[-1]
    try:
        segments = [audio_mod.decode_wav(seg.audio) for seg in final.synthesis.segments]
        run.dialogue_audio = audio_mod.assemble_dialogue(
            segments, gap_seconds=options.gap_seconds, sample_rate=options.sample_rate)
    except Exception as exc:
        raise fail("assemble", final.t, exc) from exc

    run.elapsed_seconds = time.monotonic() - started
    return run


@dataclass
class BatchResult:
    """All runs of a batch in ordinal order, completed and failed alike."""

    runs: list[PipelineRun]
    interrupted: bool = False

    @property
    def completed(self) -> list[PipelineRun]:
        return [r for r in self.runs if r.status == "completed"]

    @property
    def failures(self) -> list[PipelineRun]:
        return [r for r in self.runs if r.status == "failed"]


def run_batch(
    pool: CharacterPool,
    variant: PipelineVariant,
    backends: Backends,
    master_seed: int,
    count: int,
    options: PipelineOptions = PipelineOptions(),
    parallelism: int = 1,
    sleep: Callable[[float], None] = time.sleep,
) -> BatchResult:
    """Run `count` dialogues; failures are collected, not fatal.

    Per-run seeds depend only on (master_seed, ordinal), so results are
    identical for any parallelism level.  Ctrl-C drains gracefully:
    finished runs are kept, pending ones are cancelled.
    """
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")

    def one(ordinal: int) -> PipelineRun:
        seed = split_seed(master_seed, f"run:{ordinal}")
        try:
            return run_pipeline(pool, variant, backends, seed, options,
                                ordinal=ordinal, master_seed=master_seed, sleep=sleep)
        except StageError as exc:
            return exc.partial_run

    results: dict[int, PipelineRun] = {}
    interrupted = False
    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as executor:
        futures = {executor.submit(one, i): i for i in range(count)}
        pending = set(futures)
        try:
            while pending:
                done, pending = wait(pending, return_when=FIRST_COMPLETED)
                for future in done:
                    results[futures[future]] = future.result()
        except KeyboardInterrupt:
            interrupted = True
            for future in pending:
                future.cancel()

    ordered = [results[i] for i in sorted(results)]
    return BatchResult(runs=ordered, interrupted=interrupted)
