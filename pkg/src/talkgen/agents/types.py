"""Request/response types and backend protocols for the three agent roles."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

from ..characters import Character
from ..script import DialogueScript

CRITERIA = ("naturalness", "clarity_emotiveness")


@dataclass(frozen=True)
class GenerationParams:
    temperature: float = 0.8
    seed: int | None = None


@dataclass(frozen=True)
class WriterRequest:
    """Everything a writer backend needs for one script (re)generation.

    prior_script and prior_feedback travel together: both absent for an
    initial draft, both present for a refinement pass.
    """

    system_prompt: str
    pool_digest: str
    participants: tuple[Character, ...]
    language: str
    topic: str
    generation_params: GenerationParams = field(default_factory=GenerationParams)
    prior_script: DialogueScript | None = None
    prior_feedback: "CritiqueFeedback | None" = None

    def __post_init__(self) -> None:
        if (self.prior_script is None) != (self.prior_feedback is None):
            raise ValueError("prior_script and prior_feedback must both be set or both unset")


@dataclass(frozen=True)
class FeedbackItem:
    """Critic finding for one utterance."""

    utterance_index: int
    suggestion: str
    criteria: tuple[str, ...]

    def __post_init__(self) -> None:
        unknown = [c for c in self.criteria if c not in CRITERIA]
        if unknown:
            raise ValueError(f"unknown criteria {unknown}; allowed: {CRITERIA}")


@dataclass(frozen=True)
class CritiqueFeedback:
    per_utterance: tuple[FeedbackItem, ...] = ()
    global_notes: str = ""

    @property
    def flagged_indices(self) -> tuple[int, ...]:
        return tuple(item.utterance_index for item in self.per_utterance)


@dataclass(frozen=True)
class SynthSegment:
    """Synthesized audio for one utterance; duration is decoded, not trusted."""

    utterance_index: int
    audio: bytes
    sample_rate: int
    duration: float


@dataclass(frozen=True)
class SynthesisResult:
    segments: tuple[SynthSegment, ...]
    backend_id: str


@dataclass(frozen=True)
class CriticClip:
    """Per-utterance review payload: audio plus dialogue-order context.

    The wire protocol ships audio and the stripped transcript; script_text
    (the marked-up line) additionally lets in-process critics inspect
    labels without audio analysis.
    """

    utterance_index: int
    audio: bytes
    transcript: str
    script_text: str


@runtime_checkable
class WriterBackend(Protocol):
    backend_id: str

    def complete(self, request: WriterRequest) -> str: ...


@runtime_checkable
class SynthesizerBackend(Protocol):
    backend_id: str

    def synthesize(self, text: str, reference_audio: bytes, language: str) -> bytes: ...


@runtime_checkable
class CriticBackend(Protocol):
    backend_id: str

    def review(self, prompt: str, clips: tuple[CriticClip, ...]) -> str: ...
