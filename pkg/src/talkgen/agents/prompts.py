"""Prompt construction for the writer and critic roles.

The requirement wording below is part of the generation contract: tests
assert the headings appear verbatim in every writer/critic prompt, so
edit with care.
"""

from __future__ import annotations

from ..characters import Character
from ..script import DialogueScript, MarkupConfig, DEFAULT_MARKUP
from .types import CritiqueFeedback, GenerationParams, WriterRequest

WRITER_REQUIREMENTS = """\
Given the character pool below, generate a conversation script meeting the below requirements:
1. Character Interactions: Characters should express distinct viewpoints or goals, with the ability to interrupt, question, or support others.
2. Natural Flow: Dialogue should resemble natural communication, avoiding mechanical or overly deliberate language.
3. Topics and Content: Dialogues should cover diverse, realistic topics, aligning with the character's setting and thematic background.
4. Emotional Dynamics: Incorporate emotional shifts to enhance expressiveness, using emotions such as happiness, anger, and sadness."""

REFINEMENT_INSTRUCTION = """\
Revise the previous script according to the feedback below. Apply each suggestion to its utterance, keep the cast and overall topic unchanged, and add suitable paralinguistic tokens and emotional labels where they improve expressiveness."""

SELF_REFINE_NOTE = """\
Self-refinement pass: review your own draft for naturalness and expressiveness, then rewrite it with suitable paralinguistic tokens and emotional labels."""

CRITIC_PROMPT = """\
Please listen to this conversation sentence by sentence, evaluate each sentence based on the following criteria, and provide improvement suggestions:
1. Naturalness: Assess the smoothness and intonation, ensuring it matches the context with seamless transitions.
2. Clarity and Emotiveness: Ensure the sentence is clear, with no vague terms, and that emotional expression in the dialogue is sufficient and appropriate."""

WRITER_OUTPUT_FORMAT = """\
Reply with exactly one fenced code block containing a JSON array; each element must be an object {"speaker": "<character id>", "text": "<utterance>"} in dialogue order. No other JSON outside the block."""

CRITIC_OUTPUT_FORMAT = """\
Reply with exactly one fenced code block containing a JSON array; each element must be an object {"index": <utterance index>, "suggestion": "<improvement>", "criteria": [<"naturalness" and/or "clarity_emotiveness">]}. Return an empty array when nothing needs improvement."""

CORRECTIVE_INSTRUCTION = """\
Your previous reply did not follow the required output format. Reply again with exactly one fenced JSON code block as instructed, and nothing else."""


def _markup_instructions(markup: MarkupConfig) -> str:
    pauses = ", ".join(f"[{kind}]" for kind in sorted(markup.pause_kinds))
    return (
        "Markup rules: wrap emphasized words in "
        f"{markup.emphasis_open}...{markup.emphasis_close} tags; insert pause tokens "
        f"from the closed set {{{pauses}}} between sentences where a speaker would "
        "breathe; optionally end an utterance with a single bracketed Capitalized "
        "emotion label such as [Happy]."
    )


def pool_digest(participants: tuple[Character, ...]) -> str:
    """Deterministic textual profile block for the selected participants.

    Includes ids, so distinct participant sets always yield distinct
    digests.  Relations are listed only when both ends are selected.
    """
    selected = {c.id for c in participants}
    lines = []
    for char in participants:
        bits = [
            f"- {char.name} (id: {char.id}, language: {char.language})",
            f"  age: {char.age}; gender: {char.gender}",
            f"  personality: {char.personality}",
            f"  speaking style: {char.speaking_style}",
        ]
        for key, value in char.extras:
            bits.append(f"  {key}: {value}")
        for rel in char.relations:
            if rel.peer in selected:
                note = f" ({rel.note})" if rel.note else ""
                bits.append(f"  relation: {rel.kind} with {rel.peer}{note}")
        lines.append("\n".join(bits))
    return "\n".join(lines)


def render_feedback(feedback: CritiqueFeedback) -> str:
    lines = []
    for item in feedback.per_utterance:
        criteria = ", ".join(item.criteria)
        lines.append(f"- utterance {item.utterance_index} [{criteria}]: {item.suggestion}")
    if not lines:
        lines.append("- no per-utterance issues were flagged")
    if feedback.global_notes:
        lines.append(f"Global notes: {feedback.global_notes}")
    return "\n".join(lines)


def build_writer_prompt(
    participants: tuple[Character, ...],
    topic: str,
    language: str,
    *,
    prior_script: DialogueScript | None = None,
    prior_feedback: CritiqueFeedback | None = None,
    params: GenerationParams = GenerationParams(),
    markup: MarkupConfig = DEFAULT_MARKUP,
) -> WriterRequest:
    """Assemble the writer request for an initial draft or a refinement."""
    parts = [WRITER_REQUIREMENTS, _markup_instructions(markup)]
    if prior_script is not None:
        parts.append(REFINEMENT_INSTRUCTION)
    parts.append(WRITER_OUTPUT_FORMAT)
    return WriterRequest(
        system_prompt="\n\n".join(parts),
        pool_digest=pool_digest(participants),
        participants=tuple(participants),
        language=language,
        topic=topic,
        generation_params=params,
        prior_script=prior_script,
        prior_feedback=prior_feedback,
    )


def render_writer_user_content(request: WriterRequest) -> str:
    """The user-turn message: digest, topic, and the prior round verbatim."""
    parts = [
        "Character pool:",
        request.pool_digest,
        f"Language: {request.language}",
        f"Topic: {request.topic}",
    ]
    if request.prior_script is not None and request.prior_feedback is not None:
        parts += [
            "Previous script:",
            request.prior_script.render_lines(),
            "Feedback:",
            render_feedback(request.prior_feedback),
        ]
    return "\n\n".join(parts)


def build_critic_prompt() -> str:
    return f"{CRITIC_PROMPT}\n\n{CRITIC_OUTPUT_FORMAT}"
