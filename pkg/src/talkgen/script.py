"""Dialogue scripts and the utterance markup grammar.

Utterance text carries three kinds of inline markup:

  - emphasis spans delimited by literal "<strong>" / "</strong>" tags;
  - pause tokens: bracketed lowercase identifiers from a closed,
    configurable vocabulary (default {"[breath]"});
  - at most one emotion label: a bracketed Capitalized identifier in
    trailing position, open vocabulary.

Unknown bracketed tokens anywhere, and capitalized ones off the trailing
position, are kept as plain text and reported as warnings.  Parsing never
loses characters: everything that is not recognized markup lands in a
segment.  Rendering is canonical (no padding inside tags, single spaces
between parts), so equality of parsed utterances is equality modulo
whitespace normalization of the original.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import MarkupError, Violation

if False:  # pragma: no cover - import for type checkers only
    from .characters import CharacterPool


@dataclass(frozen=True)
class MarkupConfig:
    """Closed token sets of the grammar; pause vocabulary is configurable."""

    pause_kinds: frozenset[str] = frozenset({"breath"})
    emphasis_open: str = "<strong>"
    emphasis_close: str = "</strong>"


DEFAULT_MARKUP = MarkupConfig()

_BRACKET_RE = re.compile(r"\[([A-Za-z][A-Za-z0-9_]*)\]")
_LABEL_RE = re.compile(r"\[([A-Z][A-Za-z]*)\]\s*$")


@dataclass(frozen=True)
class PlainText:
    text: str


@dataclass(frozen=True)
class EmphasisSpan:
    text: str


@dataclass(frozen=True)
class PauseToken:
    kind: str


Segment = PlainText | EmphasisSpan | PauseToken


@dataclass(frozen=True)
class ParsedMarkup:
    segments: tuple[Segment, ...]
    emotion_label: str | None
    warnings: tuple[str, ...] = ()


def _collapse(text: str) -> str:
    return " ".join(text.split())


class _SegmentBuilder:
    """Accumulates text runs and emits canonical segments.

    Adjacent plain runs are merged so the produced sequence never holds
    two consecutive PlainText segments.
    """

    def __init__(self) -> None:
        self.segments: list[Segment] = []
        self._buf: list[str] = []

    def add_text(self, chunk: str) -> None:
        self._buf.append(chunk)

    def flush_plain(self) -> None:
        text = _collapse("".join(self._buf))
        self._buf = []
        if not text:
            return
        if self.segments and isinstance(self.segments[-1], PlainText):
            self.segments[-1] = PlainText(self.segments[-1].text + " " + text)
        else:
            self.segments.append(PlainText(text))

    def add_segment(self, segment: Segment) -> None:
        self.flush_plain()
        self.segments.append(segment)


def parse_markup(raw_text: str, config: MarkupConfig = DEFAULT_MARKUP) -> ParsedMarkup:
    """Parse raw utterance text into segments plus optional emotion label.

    Raises MarkupError on unbalanced emphasis tags.  Unknown bracketed
    tokens are preserved as plain text and reported in .warnings.
    """
    warnings: list[str] = []

    label = None
    body = raw_text
    match = _LABEL_RE.search(body)
    if match:
        label = match.group(1)
        body = body[: match.start()]

    token_re = re.compile(
        "|".join((
            re.escape(config.emphasis_open),
            re.escape(config.emphasis_close),
            _BRACKET_RE.pattern,
        ))
    )

    builder = _SegmentBuilder()
    emphasis_buf: list[str] | None = None  # None means outside a span
    pos = 0
    for m in token_re.finditer(body):
        chunk = body[pos:m.start()]
        token = m.group(0)
        pos = m.end()

        if emphasis_buf is not None:
            emphasis_buf.append(chunk)
        else:
            builder.add_text(chunk)

        if token == config.emphasis_open:
            if emphasis_buf is not None:
                raise MarkupError(f"nested {config.emphasis_open} at offset {m.start()}")
            emphasis_buf = []
        elif token == config.emphasis_close:
            if emphasis_buf is None:
                raise MarkupError(
                    f"{config.emphasis_close} without opening tag at offset {m.start()}")
            text = _collapse("".join(emphasis_buf))
            if text:
                builder.add_segment(EmphasisSpan(text))
            else:
                warnings.append("empty emphasis span dropped")
            emphasis_buf = None
        else:
            kind = token[1:-1]
            if emphasis_buf is not None:
                warnings.append(f"bracketed token {token} inside emphasis kept as text")
                emphasis_buf.append(token)
            elif kind in config.pause_kinds:
                builder.add_segment(PauseToken(kind))
            else:
                if kind[0].isupper():
                    warnings.append(
                        f"capitalized token {token} outside trailing position kept as text")
                else:
                    warnings.append(f"unknown bracketed token {token} kept as text")
                builder.add_text(token)

    if emphasis_buf is not None:
        raise MarkupError(f"unclosed {config.emphasis_open}")
    builder.add_text(body[pos:])
    builder.flush_plain()

    return ParsedMarkup(segments=tuple(builder.segments), emotion_label=label,
                        warnings=tuple(warnings))


def render_markup(
    segments: tuple[Segment, ...],
    emotion_label: str | None = None,
    config: MarkupConfig = DEFAULT_MARKUP,
) -> str:
    """Canonical inverse of parse_markup: single spaces, unpadded tags."""
    parts: list[str] = []
    for segment in segments:
        if isinstance(segment, PlainText):
            parts.append(segment.text)
        elif isinstance(segment, EmphasisSpan):
            parts.append(f"{config.emphasis_open}{segment.text}{config.emphasis_close}")
        elif isinstance(segment, PauseToken):
            parts.append(f"[{segment.kind}]")
        else:
            raise TypeError(f"not a segment: {segment!r}")
    if emotion_label is not None:
        parts.append(f"[{emotion_label}]")
    return " ".join(parts)


def strip_markup(utterance: "Utterance | ParsedMarkup | str",
                 config: MarkupConfig = DEFAULT_MARKUP) -> str:
    """Drop pause tokens and the emotion label; join spoken text with spaces."""
    if isinstance(utterance, str):
        parsed: ParsedMarkup | Utterance = parse_markup(utterance, config)
    else:
        parsed = utterance
    parts = [s.text for s in parsed.segments if isinstance(s, (PlainText, EmphasisSpan))]
    return _collapse(" ".join(parts))


@dataclass(frozen=True)
class Utterance:
    """One script line.  raw_text is the canonical rendering of segments."""

    index: int
    speaker_id: str
    raw_text: str
    segments: tuple[Segment, ...]
    emotion_label: str | None = None

    @classmethod
    def parse(cls, index: int, speaker_id: str, text: str,
              config: MarkupConfig = DEFAULT_MARKUP) -> "Utterance":
        parsed = parse_markup(text, config)
        return cls(
            index=index,
            speaker_id=speaker_id,
            raw_text=render_markup(parsed.segments, parsed.emotion_label, config),
            segments=parsed.segments,
            emotion_label=parsed.emotion_label,
        )

    @property
    def stripped_text(self) -> str:
        return strip_markup(self)

    @property
    def pause_count(self) -> int:
        return sum(1 for s in self.segments if isinstance(s, PauseToken))


@dataclass(frozen=True)
class DialogueScript:
    """An ordered multi-party script produced at one pipeline iteration."""

    language: str
    topic_tag: str
    iteration_index: int
    participants: tuple[str, ...]
    utterances: tuple[Utterance, ...]

    def render_lines(self) -> str:
        return "\n".join(f"{u.speaker_id}: {u.raw_text}" for u in self.utterances)

    def to_dict(self) -> dict:
        return {
            "language": self.language,
            "topic_tag": self.topic_tag,
            "iteration_index": self.iteration_index,
            "participants": list(self.participants),
            "utterances": [
                {"speaker_id": u.speaker_id, "raw_text": u.raw_text}
                for u in self.utterances
            ],
        }

    @classmethod
    def from_dict(cls, data: dict, config: MarkupConfig = DEFAULT_MARKUP) -> "DialogueScript":
        utterances = tuple(
            Utterance.parse(i, entry["speaker_id"], entry["raw_text"], config)
            for i, entry in enumerate(data["utterances"])
        )
        return cls(
            language=data["language"],
            topic_tag=data["topic_tag"],
            iteration_index=data["iteration_index"],
            participants=tuple(data["participants"]),
            utterances=utterances,
        )


def validate_script(
    script: DialogueScript,
    pool: "CharacterPool | None" = None,
    min_utterances: int = 2,
    max_utterances: int = 60,
) -> list[Violation]:
    """Check script invariants; returns all findings.

    With a pool supplied, participants must exist in it and share the
    script language.
    """
    violations: list[Violation] = []
    n = len(script.utterances)
    if n < min_utterances:
        violations.append(Violation(
            "TOO_FEW_UTTERANCES", script.topic_tag or "script",
            f"{n} utterances, minimum is {min_utterances}"))
    if n > max_utterances:
        violations.append(Violation(
            "TOO_MANY_UTTERANCES", script.topic_tag or "script",
            f"{n} utterances, maximum is {max_utterances}"))

    participant_set = set(script.participants)
    speakers = set()
    for position, u in enumerate(script.utterances):
        if u.index != position:
            violations.append(Violation(
                "BAD_INDEX", u.speaker_id,
                f"utterance at position {position} carries index {u.index}"))
        if u.speaker_id not in participant_set:
            violations.append(Violation(
                "UNKNOWN_SPEAKER", u.speaker_id,
                f"utterance {u.index} spoken by non-participant"))
        speakers.add(u.speaker_id)

    for pid in script.participants:
        if pid not in speakers:
            violations.append(Violation(
                "SILENT_PARTICIPANT", pid, "participant never speaks"))

    if pool is not None:
        for pid in script.participants:
            char = pool.get(pid)
            if char is None:
                violations.append(Violation(
                    "UNKNOWN_PARTICIPANT", pid, "participant not in pool"))
            elif char.language != script.language:
                violations.append(Violation(
                    "LANGUAGE_MISMATCH", pid,
                    f"participant language {char.language} != script {script.language}"))

    return violations
