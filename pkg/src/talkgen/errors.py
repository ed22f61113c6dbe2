"""Exception hierarchy shared across the package.

Every error raised by talkgen derives from TalkgenError so callers can
catch the whole family with one clause.  Subclasses carry enough context
(ids, offsets, raw payloads) for actionable messages.
"""

from __future__ import annotations

from dataclasses import dataclass


class TalkgenError(Exception):
    """Base class for all talkgen errors."""


class ConfigError(TalkgenError):
    """Invalid or missing configuration (CLI exit code 2)."""


class ParseError(TalkgenError):
    """Malformed structured input (pool file, manifest, transcript, ratings).

    Attributes:
        source: path or label of the offending input.
        line: 1-based line number when known, else None.
    """

    def __init__(self, message: str, *, source: str = "", line: int | None = None):
        self.source = source
        self.line = line
        where = source or "input"
        if line is not None:
            where = f"{where}:{line}"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class Violation:
    """A single validation finding: machine-readable code plus context."""

    code: str
    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.code} [{self.subject}]: {self.message}"


class ValidationError(TalkgenError):
    """One or more invariant violations; carries the full list."""

    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        summary = "; ".join(str(v) for v in self.violations) or "validation failed"
        super().__init__(summary)


class InsufficientCharacters(TalkgenError):
    """Not enough pool members satisfy the sampling constraints."""


class MarkupError(TalkgenError):
    """Unbalanced or malformed emphasis tags in utterance markup."""


class BackendError(TalkgenError):
    """A backend call failed (network, HTTP status, unreadable resource).

    Attributes:
        status: HTTP status code when applicable.
        detail: short excerpt of the response body or OS error.
        utterance_index: set when the failure is tied to one utterance.
    """

    def __init__(self, message: str, *, status: int | None = None,
                 detail: str = "", utterance_index: int | None = None):
        self.status = status
        self.detail = detail
        self.utterance_index = utterance_index
        parts = [message]
        if status is not None:
            parts.append(f"status={status}")
        if utterance_index is not None:
            parts.append(f"utterance={utterance_index}")
        if detail:
            parts.append(detail[:200])
        super().__init__(" | ".join(parts))


class MalformedOutputError(TalkgenError):
    """Backend replied, but the reply does not follow the output contract.

    Keeps the raw text so the caller can log or attach a corrective
    instruction on retry.
    """

    def __init__(self, message: str, raw_text: str = ""):
        self.raw_text = raw_text
        super().__init__(message)


class StageError(TalkgenError):
    """A pipeline stage failed after retries were exhausted.

    partial_run, when set by the orchestrator, holds the run with all
    iterations that completed before the failure.
    """

    def __init__(self, run_id: str, iteration: int, stage: str, cause: Exception):
        self.run_id = run_id
        self.iteration = iteration
        self.stage = stage
        self.cause = cause
        self.partial_run = None
        super().__init__(
            f"run {run_id}: stage '{stage}' failed at iteration {iteration}: {cause}"
        )


class FormatError(TalkgenError):
    """Audio payload is not PCM-16 RIFF/WAVE; message carries header diagnostics."""


class ResampleError(TalkgenError):
    """Resampling cannot proceed (for example zero-length input)."""


class EmptyReference(TalkgenError):
    """Reference text normalizes to zero units; error rate undefined."""


class EmptySheet(TalkgenError):
    """Rating sheet holds no scores; aggregation undefined."""


class EmptyVotes(TalkgenError):
    """Preference tally received no votes."""


class OutOfRangeScore(TalkgenError):
    """A score fell outside the documented [1, 5] contract."""


class EmptyCorpus(TalkgenError):
    """Manifest contains no records; statistics undefined."""


class MissingAudio(TalkgenError):
    """A manifest record points at an audio file that does not exist."""


class DuplicateDialogueId(TalkgenError):
    """Writing would reuse a dialogue_id already present in the corpus."""
