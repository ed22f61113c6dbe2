"""Agent roles: script writer, speech synthesizer, dialogue critic."""

from .http import HttpCriticBackend, HttpSynthesizerBackend, HttpWriterBackend
from .mock import (FlakyWriterBackend, MalformedOnceWriterBackend,
                   MockCriticBackend, MockSynthesizerBackend,
                   MockWriterBackend, SeedFailingWriterBackend, LABEL_CYCLE)
from .ops import critique, extract_json_array, parse_writer_reply, synthesize, write_script
from .prompts import (CRITIC_PROMPT, CORRECTIVE_INSTRUCTION, REFINEMENT_INSTRUCTION,
                      SELF_REFINE_NOTE, WRITER_REQUIREMENTS, build_critic_prompt,
                      build_writer_prompt, pool_digest, render_feedback,
                      render_writer_user_content)
from .types import (CRITERIA, CriticBackend, CriticClip, CritiqueFeedback,
                    FeedbackItem, GenerationParams, SynthSegment, SynthesisResult,
                    SynthesizerBackend, WriterBackend, WriterRequest)

__all__ = [
    "CRITERIA", "CRITIC_PROMPT", "CORRECTIVE_INSTRUCTION", "LABEL_CYCLE",
    "REFINEMENT_INSTRUCTION", "SELF_REFINE_NOTE", "WRITER_REQUIREMENTS",
    "CriticBackend", "CriticClip", "CritiqueFeedback", "FeedbackItem",
    "FlakyWriterBackend", "GenerationParams", "HttpCriticBackend",
    "HttpSynthesizerBackend", "HttpWriterBackend", "MalformedOnceWriterBackend",
    "MockCriticBackend", "MockSynthesizerBackend", "MockWriterBackend",
    "SeedFailingWriterBackend", "SynthSegment", "SynthesisResult",
    "SynthesizerBackend", "WriterBackend", "WriterRequest",
    "build_critic_prompt", "build_writer_prompt", "critique",
    "extract_json_array", "parse_writer_reply", "pool_digest",
    "render_feedback", "render_writer_user_content", "synthesize",
    "write_script",
]
