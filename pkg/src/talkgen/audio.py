"""PCM-16 WAV handling: decode/encode, resampling, dialogue assembly.

Conventions:
  - In-memory audio is mono int16 at an explicit sample rate.
  - Stereo input is downmixed by averaging the two channels.
  - The canonical corpus rate is 22050 Hz.
  - The encoder emits a minimal deterministic RIFF/WAVE file: a 16-byte
    fmt chunk followed by the data chunk, no metadata chunks, so equal
    samples always produce equal bytes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, ResampleError

CANONICAL_RATE = 22050
DEFAULT_GAP_SECONDS = 0.3


@dataclass(frozen=True, eq=False)
class AudioSegment:
    """Mono PCM-16 audio: samples plus sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        if self.samples.dtype != np.int16:
            raise ValueError(f"samples must be int16, got {self.samples.dtype}")
        if self.samples.ndim != 1:
            raise ValueError(f"samples must be mono (1-D), got shape {self.samples.shape}")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AudioSegment):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(
            self.samples, other.samples
        )

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class TurnSpan:
    """Placement of one utterance inside an assembled dialogue waveform.

    Offsets are stored in exact sample units; the *_seconds properties
    divide by the rate on demand so no float drift enters the map.
    """

    utterance_index: int
    start_sample: int
    end_sample: int
    sample_rate: int

    @property
    def start_seconds(self) -> float:
        return self.start_sample / self.sample_rate

    @property
    def end_seconds(self) -> float:
        return self.end_sample / self.sample_rate


@dataclass(frozen=True)
class DialogueAudio:
    """An assembled dialogue waveform plus its per-utterance turn map."""

    waveform: AudioSegment
    turn_map: tuple[TurnSpan, ...] = field(default_factory=tuple)

    @property
    def duration(self) -> float:
        return self.waveform.duration


def decode_wav(data: bytes) -> AudioSegment:
    """Parse RIFF/WAVE bytes into a mono AudioSegment.

    Accepts PCM-16 mono or stereo; stereo is downmixed by channel
    averaging.  Unknown chunks are skipped.  Raises FormatError with
    header diagnostics for anything else.
    """
    def head() -> str:
        return data[:12].hex() or "<empty>"

    if len(data) < 12:
        raise FormatError(f"payload too short for a RIFF header ({len(data)} bytes): {head()}")
    if data[0:4] != b"RIFF":
        raise FormatError(f"missing RIFF magic, header starts {head()}")
    if data[8:12] != b"WAVE":
        raise FormatError(f"missing WAVE form type, header starts {head()}")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise FormatError(f"fmt chunk truncated ({len(body)} bytes)")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            payload = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None:
        raise FormatError("no fmt chunk found")
    if payload is None:
        raise FormatError("no data chunk found")

    audio_format, channels, rate, _byte_rate, _block_align, bits = fmt
    if audio_format != 1:
        raise FormatError(f"not integer PCM (format tag {audio_format})")
    if bits != 16:
        raise FormatError(f"not 16-bit PCM ({bits} bits per sample)")
    if channels not in (1, 2):
        raise FormatError(f"unsupported channel count {channels}")
    if rate <= 0:
        raise FormatError(f"invalid sample rate {rate}")

    frames = np.frombuffer(payload[: len(payload) - (len(payload) % (2 * channels))],
                           dtype="<i2")
    if channels == 2:
        pairs = frames.reshape(-1, 2).astype(np.int32)
        mono = ((pairs[:, 0] + pairs[:, 1]) // 2).astype(np.int16)
    else:
        mono = frames.astype(np.int16)
    return AudioSegment(samples=mono, sample_rate=rate)


def encode_wav(segment: AudioSegment) -> bytes:
    """Serialize a mono segment as minimal PCM-16 RIFF/WAVE bytes.

    Output is bit-exact for equal inputs: fixed chunk order, no metadata.
    """
    payload = segment.samples.astype("<i2").tobytes()
    byte_rate = segment.sample_rate * 2
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE",
        b"fmt ", 16, 1, 1, segment.sample_rate, byte_rate, 2, 16,
        b"data", len(payload),
    )
    return header + payload


def read_wav(path: str) -> AudioSegment:
    with open(path, "rb") as fh:
        return decode_wav(fh.read())


def resample(segment: AudioSegment, target_rate: int) -> AudioSegment:
    """Linear-interpolation resample to target_rate.

    Output length is ceil(len * target / source); a segment already at
    the target rate is returned unchanged so repeated assembly is
    byte-stable.
    """
    if target_rate <= 0:
        raise ResampleError(f"target rate must be positive, got {target_rate}")
    if segment.sample_rate == target_rate:
        return segment
    n = len(segment.samples)
    if n == 0:
        raise ResampleError("cannot resample a zero-length segment")
    out_len = -(-n * target_rate // segment.sample_rate)  # ceil
    positions = np.arange(out_len, dtype=np.float64) * (segment.sample_rate / target_rate)
    values = np.interp(positions, np.arange(n, dtype=np.float64),
                       segment.samples.astype(np.float64))
    out = np.rint(np.clip(values, -32768, 32767)).astype(np.int16)
    return AudioSegment(samples=out, sample_rate=target_rate)


def assemble_dialogue(
    segments: list[AudioSegment],
    gap_seconds: float = DEFAULT_GAP_SECONDS,
    sample_rate: int = CANONICAL_RATE,
) -> DialogueAudio:
    """Concatenate utterance segments with silent gaps into one waveform.

    Each segment is resampled to sample_rate first.  The gap is rounded
    once to whole samples, so end(i) + gap == start(i+1) holds exactly
    in sample units for every adjacent pair.
    """
    if gap_seconds < 0:
        raise ValueError(f"gap_seconds must be >= 0, got {gap_seconds}")
    gap_samples = int(round(gap_seconds * sample_rate))
    silence = np.zeros(gap_samples, dtype=np.int16)

    pieces: list[np.ndarray] = []
    spans: list[TurnSpan] = []
    cursor = 0
    for index, segment in enumerate(segments):
        resampled = resample(segment, sample_rate)
        if index > 0:
            pieces.append(silence)
            cursor += gap_samples
        start = cursor
        pieces.append(resampled.samples)
        cursor += len(resampled.samples)
        spans.append(TurnSpan(index, start, cursor, sample_rate))

    waveform = np.concatenate(pieces) if pieces else np.zeros(0, dtype=np.int16)
    return DialogueAudio(
        waveform=AudioSegment(samples=waveform, sample_rate=sample_rate),
        turn_map=tuple(spans),
    )


def total_duration(audio: DialogueAudio | AudioSegment) -> float:
    """Duration in seconds of a segment or assembled dialogue."""
    return audio.duration
