"""Deterministic in-process backends for offline runs and tests.

Documented mock rules (tests rely on these exactly):

  - Writer, initial draft: 2 * len(participants) utterances, speakers
    round-robin in participant order, template sentences chosen by
    (seed + utterance position) modulo the bank size.  Drafts carry no
    pause tokens and no emotion labels.
  - Writer, refinement: utterances flagged by the feedback get a
    "[breath]" inserted after their first sentence and an emotion label
    appended from a fixed five-label cycle keyed by utterance index.
    A self-refinement request (global notes, no per-utterance items)
    treats every label-free utterance as flagged.  Unflagged utterances
    pass through unchanged.
  - Synthesizer: silent PCM-16 mono at 22050 Hz, 0.06 s per character of
    the markup-stripped text, floored at 0.2 s.
  - Critic: flags every utterance lacking an emotion label under
    clarity_emotiveness; a fully labeled script yields empty feedback.

All mocks are pure functions of their inputs, hence thread-safe, and
reply through the same fenced-JSON text format as real backends.
"""

from __future__ import annotations

import json
import re
import threading

import numpy as np

from ..audio import AudioSegment, encode_wav
from ..errors import BackendError
from ..script import parse_markup, strip_markup
from .types import CriticClip, WriterRequest

LABEL_CYCLE = ("Engaging", "Agreeable", "Curious", "Innovative", "Encouraged")

_EN_LINES = (
    "Honestly, the numbers this quarter surprised everyone. We should compare notes before the review.",
    "I read about that new exhibition downtown. Maybe we could all go this weekend?",
    "The trail gets steep after the second ridge. Bring proper boots or you will regret it.",
    "My recipe never comes out the same twice. Perhaps the oven temperature is lying to me.",
    "Streaming has completely changed how I listen to music. I barely touch my old records now.",
    "The match last night went to extra time. I could hardly watch the penalties.",
    "Remote work suits me better than I expected. Still, I miss the chatter of the office.",
    "That documentary about deep-sea vents amazed me. Nature keeps outdoing our imagination.",
    "I finally repotted the ferns on the balcony. They look happier than I do on Mondays.",
    "The train schedule changes again next month. Someone should warn the morning commuters.",
)

_CN_LINES = (
    "这个季度的数据确实出乎意料。我们应该在评审前对一下思路。",
    "市中心新开了一个展览。周末我们一起去看看怎么样？",
    "过了第二道山脊路就很陡了。不穿登山鞋你会后悔的。",
    "我做的菜每次味道都不一样。大概是烤箱的温度在骗我。",
    "流媒体彻底改变了我听音乐的方式。老唱片我几乎不碰了。",
    "昨晚的比赛踢到了加时。点球大战我都不敢看。",
    "远程办公比我想象中舒服。不过我还是想念办公室的热闹。",
    "那部关于深海热泉的纪录片太震撼了。大自然总是超出我们的想象。",
    "我终于给阳台上的蕨类换了盆。它们看起来比我周一的状态好多了。",
    "下个月火车时刻表又要调整了。得有人提醒早高峰的乘客。",
)

_SENTENCE_END_RE = re.compile(r"[.!?。！？]")


def _fenced(payload: object) -> str:
    return "```json\n" + json.dumps(payload, ensure_ascii=False, indent=2) + "\n```"


def _insert_breath(text: str) -> str:
    """Place a [breath] pause after the first sentence terminator."""
    match = _SENTENCE_END_RE.search(text)
    if match is None:
        return f"[breath] {text}"
    cut = match.end()
    tail = text[cut:].lstrip()
    if tail:
        return f"{text[:cut]} [breath] {tail}"
    return f"{text[:cut]} [breath]"


class MockWriterBackend:
    backend_id = "mock-writer-v1"

    def complete(self, request: WriterRequest) -> str:
        if request.prior_script is None:
            return self._draft(request)
        return self._refine(request)

    def _draft(self, request: WriterRequest) -> str:
        seed = request.generation_params.seed or 0
        bank = _CN_LINES if request.language == "CN" else _EN_LINES
        count = 2 * len(request.participants)
        entries = [
            {
                "speaker": request.participants[j % len(request.participants)].id,
                "text": bank[(seed + j) % len(bank)],
            }
            for j in range(count)
        ]
        return "Here is the script.\n" + _fenced(entries)

    def _refine(self, request: WriterRequest) -> str:
        script = request.prior_script
        feedback = request.prior_feedback
        assert script is not None and feedback is not None
        flagged = set(feedback.flagged_indices)
        if not flagged and feedback.global_notes:
            flagged = {u.index for u in script.utterances if u.emotion_label is None}

        entries = []
        for utterance in script.utterances:
            text = utterance.raw_text
            if utterance.index in flagged:
                text = _insert_breath(text)
                if utterance.emotion_label is None:
                    label = LABEL_CYCLE[utterance.index % len(LABEL_CYCLE)]
                    text = f"{text} [{label}]"
            entries.append({"speaker": utterance.speaker_id, "text": text})
        return "Revised per feedback.\n" + _fenced(entries)


class MockSynthesizerBackend:
    backend_id = "mock-synth-v1"

    def __init__(self, sample_rate: int = 22050, seconds_per_char: float = 0.06,
                 min_seconds: float = 0.2):
        self.sample_rate = sample_rate
        self.seconds_per_char = seconds_per_char
        self.min_seconds = min_seconds

    def synthesize(self, text: str, reference_audio: bytes, language: str) -> bytes:
        stripped = strip_markup(text)
        duration = max(self.min_seconds, self.seconds_per_char * len(stripped))
        n = int(round(duration * self.sample_rate))
        silence = AudioSegment(samples=np.zeros(n, dtype=np.int16),
                               sample_rate=self.sample_rate)
        return encode_wav(silence)


class MockCriticBackend:
    backend_id = "mock-critic-v1"

    def review(self, prompt: str, clips: tuple[CriticClip, ...]) -> str:
        findings = []
        for clip in clips:
            parsed = parse_markup(clip.script_text)
            if parsed.emotion_label is None:
                findings.append({
                    "index": clip.utterance_index,
                    "suggestion": "Add an emotional cue and a breathing pause "
                                  "so the delivery feels less flat.",
                    "criteria": ["clarity_emotiveness"],
                })
        return _fenced(findings)


class FlakyWriterBackend:
    """Fails the first `failures` complete() calls, then delegates.

    Counter is process-wide and thread-safe; used to exercise the retry
    policy.
    """

    def __init__(self, inner, failures: int):
        self.inner = inner
        self.failures = failures
        self.calls = 0
        self._lock = threading.Lock()

    @property
    def backend_id(self) -> str:
        return f"flaky({self.inner.backend_id})"

    def complete(self, request: WriterRequest) -> str:
        with self._lock:
            self.calls += 1
            should_fail = self.calls <= self.failures
        if should_fail:
            raise BackendError("injected writer failure", status=503)
        return self.inner.complete(request)


class SeedFailingWriterBackend:
    """Always fails for requests whose generation seed is in fail_seeds.

    Lets a test make exactly one batch ordinal fail persistently while
    the rest of the batch proceeds.
    """

    def __init__(self, inner, fail_seeds: set[int]):
        self.inner = inner
        self.fail_seeds = set(fail_seeds)

    @property
    def backend_id(self) -> str:
        return f"seedfail({self.inner.backend_id})"

    def complete(self, request: WriterRequest) -> str:
        if request.generation_params.seed in self.fail_seeds:
            raise BackendError("injected persistent failure", status=503)
        return self.inner.complete(request)


class MalformedOnceWriterBackend:
    """Returns an off-contract reply on the first call, then delegates."""

    def __init__(self, inner):
        self.inner = inner
        self.calls = 0
        self._lock = threading.Lock()

    @property
    def backend_id(self) -> str:
        return f"malformed-once({self.inner.backend_id})"

    def complete(self, request: WriterRequest) -> str:
        with self._lock:
            self.calls += 1
            first = self.calls == 1
        if first:
            return "Sorry, I cannot produce JSON right now."
        return self.inner.complete(request)
