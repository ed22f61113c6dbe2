"""The three agent operations: write a script, synthesize it, critique it.

Backends return free text; replies must carry their structured payload in
a fenced code block (JSON array).  Anything off-contract raises
MalformedOutputError with the raw reply attached so the orchestrator can
retry with a corrective instruction.
"""

from __future__ import annotations

import json
import re

from .. import audio as audio_mod
from ..characters import CharacterPool
from ..errors import BackendError, FormatError, MalformedOutputError, MarkupError
from ..script import (DEFAULT_MARKUP, DialogueScript, MarkupConfig, Utterance,
                      strip_markup, validate_script)
from .prompts import build_critic_prompt
from .types import (CriticBackend, CriticClip, CritiqueFeedback, FeedbackItem,
                    SynthSegment, SynthesisResult, SynthesizerBackend,
                    WriterBackend, WriterRequest)

_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*\s*\n(.*?)```", re.DOTALL)


def extract_json_array(reply: str) -> list:
    """Pull the first JSON array out of a fenced block (or a bare reply)."""
    candidates = _FENCE_RE.findall(reply)
    if not candidates:
        candidates = [reply]
    for candidate in candidates:
        try:
            data = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if isinstance(data, list):
            return data
    raise MalformedOutputError("no fenced JSON array found in reply", raw_text=reply)


def parse_writer_reply(
    reply: str,
    request: WriterRequest,
    markup: MarkupConfig = DEFAULT_MARKUP,
    min_utterances: int = 2,
    max_utterances: int = 60,
) -> DialogueScript:
    """Turn a writer reply into a validated DialogueScript."""
    entries = extract_json_array(reply)
    by_id = {c.id: c for c in request.participants}
    by_name = {c.name: c for c in request.participants}

    utterances = []
    for position, entry in enumerate(entries):
        if not isinstance(entry, dict) or "speaker" not in entry or "text" not in entry:
            raise MalformedOutputError(
                f"entry {position} must be an object with 'speaker' and 'text'",
                raw_text=reply)
        speaker = str(entry["speaker"])
        resolved = by_id.get(speaker) or by_name.get(speaker)
        speaker_id = resolved.id if resolved else speaker
        try:
            utterances.append(Utterance.parse(position, speaker_id, str(entry["text"]), markup))
        except MarkupError as exc:
            raise MalformedOutputError(
                f"utterance {position} has invalid markup: {exc}", raw_text=reply) from exc

    iteration_index = 0
    if request.prior_script is not None:
        iteration_index = request.prior_script.iteration_index + 1

    script = DialogueScript(
        language=request.language,
        topic_tag=request.topic,
        iteration_index=iteration_index,
        participants=tuple(c.id for c in request.participants),
        utterances=tuple(utterances),
    )
    violations = validate_script(script, min_utterances=min_utterances,
                                 max_utterances=max_utterances)
    if violations:
        raise MalformedOutputError(
            "script failed validation: " + "; ".join(str(v) for v in violations),
            raw_text=reply)
    return script


def write_script(
    backend: WriterBackend,
    request: WriterRequest,
    markup: MarkupConfig = DEFAULT_MARKUP,
    min_utterances: int = 2,
    max_utterances: int = 60,
) -> DialogueScript:
    reply = backend.complete(request)
    return parse_writer_reply(reply, request, markup, min_utterances, max_utterances)


def synthesize(
    backend: SynthesizerBackend,
    script: DialogueScript,
    pool: CharacterPool,
) -> SynthesisResult:
    """Synthesize every utterance in order with its speaker's voice reference.

    All-or-nothing: any failure aborts the whole dialogue, naming the
    utterance index.
    """
    reference_cache: dict[str, bytes] = {}
    segments = []
    for utterance in script.utterances:
        speaker = pool.get(utterance.speaker_id)
        if speaker is None:
            raise BackendError("speaker not found in pool",
                               utterance_index=utterance.index)
        if speaker.id not in reference_cache:
            path = speaker.resolved_audio(pool.base_dir)
            try:
                with open(path, "rb") as fh:
                    reference_cache[speaker.id] = fh.read()
            except OSError as exc:
                raise BackendError(
                    f"cannot read reference audio for {speaker.id}: {exc}",
                    utterance_index=utterance.index) from exc

        wav = backend.synthesize(utterance.raw_text, reference_cache[speaker.id],
                                 script.language)
        segment = audio_mod.decode_wav(wav)
        if len(segment) == 0:
            raise FormatError(f"synthesizer returned empty audio for utterance "
                              f"{utterance.index}")
        segments.append(SynthSegment(
            utterance_index=utterance.index,
            audio=wav,
            sample_rate=segment.sample_rate,
            duration=segment.duration,
        ))
    return SynthesisResult(segments=tuple(segments), backend_id=backend.backend_id)


def critique(
    backend: CriticBackend,
    dialogue: SynthesisResult,
    script: DialogueScript,
    extra_instruction: str = "",
) -> CritiqueFeedback:
    """Review synthesized utterances one by one; empty feedback is valid."""
    clips = tuple(
        CriticClip(
            utterance_index=seg.utterance_index,
            audio=seg.audio,
            transcript=strip_markup(script.utterances[seg.utterance_index]),
            script_text=script.utterances[seg.utterance_index].raw_text,
        )
        for seg in dialogue.segments
    )
    prompt = build_critic_prompt()
    if extra_instruction:
        prompt = f"{prompt}\n\n{extra_instruction}"
    reply = backend.review(prompt, clips)
    entries = extract_json_array(reply)

    items = []
    for position, entry in enumerate(entries):
        if not isinstance(entry, dict) or "index" not in entry or "suggestion" not in entry:
            raise MalformedOutputError(
                f"feedback entry {position} must carry 'index' and 'suggestion'",
                raw_text=reply)
        index = entry["index"]
        if not isinstance(index, int) or not 0 <= index < len(script.utterances):
            raise MalformedOutputError(
                f"feedback entry {position} has out-of-range index {index!r}",
                raw_text=reply)
        criteria = entry.get("criteria", [])
        if not isinstance(criteria, list):
            raise MalformedOutputError(
                f"feedback entry {position} criteria must be a list", raw_text=reply)
        try:
            items.append(FeedbackItem(
                utterance_index=index,
                suggestion=str(entry["suggestion"]),
                criteria=tuple(str(c) for c in criteria),
            ))
        except ValueError as exc:
            raise MalformedOutputError(str(exc), raw_text=reply) from exc

    return CritiqueFeedback(per_utterance=tuple(items))
