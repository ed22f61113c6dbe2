"""WAV codec, resampling, and dialogue assembly.

The hand-rolled codec is cross-checked against the stdlib wave module in
both directions so an encoding bug cannot hide behind a matching decoder.
"""

import io
import struct
import wave

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from talkgen.audio import (AudioSegment, assemble_dialogue, decode_wav,
                           encode_wav, read_wav, resample, total_duration)
from talkgen.errors import FormatError, ResampleError


def _tone(n, rate=22050, freq=440.0, amp=12000):
    t = np.arange(n) / rate
    return AudioSegment((amp * np.sin(2 * np.pi * freq * t)).astype(np.int16), rate)


def _wave_module_bytes(samples: np.ndarray, rate: int, channels: int = 1) -> bytes:
    buf = io.BytesIO()
    with wave.open(buf, "wb") as fh:
        fh.setnchannels(channels)
        fh.setsampwidth(2)
        fh.setframerate(rate)
        fh.writeframes(samples.astype("<i2").tobytes())
    return buf.getvalue()


class TestCodec:
    @pytest.mark.parametrize("n", [1, 2, 7, 22050])
    def test_round_trip(self, n):
        segment = _tone(n)
        assert decode_wav(encode_wav(segment)) == segment

    def test_deterministic_bytes(self):
        segment = _tone(500)
        assert encode_wav(segment) == encode_wav(segment)

    def test_stdlib_reads_our_output(self):
        segment = _tone(300, rate=16000)
        with wave.open(io.BytesIO(encode_wav(segment)), "rb") as fh:
            assert fh.getnchannels() == 1
            assert fh.getsampwidth() == 2
            assert fh.getframerate() == 16000
            assert fh.getnframes() == 300
            frames = np.frombuffer(fh.readframes(300), dtype="<i2")
        assert np.array_equal(frames, segment.samples)

    def test_we_read_stdlib_output(self):
        samples = np.arange(-50, 50, dtype=np.int16)
        segment = decode_wav(_wave_module_bytes(samples, 8000))
        assert segment.sample_rate == 8000
        assert np.array_equal(segment.samples, samples)

    def test_stereo_downmix(self):
        left = np.array([100, -100, 32767], dtype=np.int16)
        right = np.array([300, -300, 32767], dtype=np.int16)
        interleaved = np.empty(6, dtype=np.int16)
        interleaved[0::2], interleaved[1::2] = left, right
        segment = decode_wav(_wave_module_bytes(interleaved, 22050, channels=2))
        assert np.array_equal(segment.samples,
                              np.array([200, -200, 32767], dtype=np.int16))

    def test_unknown_chunk_skipped(self):
        segment = _tone(10)
        raw = bytearray(encode_wav(segment))
        extra = b"LIST" + struct.pack("<I", 4) + b"INFO"
        patched = raw[:12] + extra + raw[12:]
        total = len(patched) - 8
        patched[4:8] = struct.pack("<I", total)
        assert decode_wav(bytes(patched)) == segment

    def test_odd_sized_chunk_alignment(self):
        segment = _tone(10)
        raw = bytearray(encode_wav(segment))
        # 3-byte chunk body must be padded to 4 before the next chunk starts
        extra = b"junk" + struct.pack("<I", 3) + b"abc\x00"
        patched = raw[:12] + extra + raw[12:]
        patched[4:8] = struct.pack("<I", len(patched) - 8)
        assert decode_wav(bytes(patched)) == segment

    def test_read_wav(self, tmp_path):
        segment = _tone(64)
        path = tmp_path / "x.wav"
        path.write_bytes(encode_wav(segment))
        assert read_wav(str(path)) == segment


class TestCodecErrors:
    def test_garbage(self):
        with pytest.raises(FormatError, match="RIFF"):
            decode_wav(b"\x00" * 40)

    def test_empty(self):
        with pytest.raises(FormatError, match="too short"):
            decode_wav(b"")

    def test_not_wave_form(self):
        raw = bytearray(encode_wav(_tone(4)))
        raw[8:12] = b"AVI "
        with pytest.raises(FormatError, match="WAVE"):
            decode_wav(bytes(raw))

    def test_eight_bit_rejected(self):
        buf = io.BytesIO()
        with wave.open(buf, "wb") as fh:
            fh.setnchannels(1)
            fh.setsampwidth(1)
            fh.setframerate(8000)
            fh.writeframes(b"\x80\x80\x80")
        with pytest.raises(FormatError, match="16-bit"):
            decode_wav(buf.getvalue())

    def test_float_format_rejected(self):
        raw = bytearray(encode_wav(_tone(4)))
        raw[20:22] = struct.pack("<H", 3)  # format tag: IEEE float
        with pytest.raises(FormatError, match="format tag 3"):
            decode_wav(bytes(raw))

    def test_missing_data_chunk(self):
        raw = encode_wav(_tone(4))
        with pytest.raises(FormatError, match="data"):
            decode_wav(raw[:36])  # header + fmt only

    def test_too_many_channels(self):
        raw = bytearray(encode_wav(_tone(4)))
        raw[22:24] = struct.pack("<H", 4)
        with pytest.raises(FormatError, match="channel"):
            decode_wav(bytes(raw))


class TestSegment:
    def test_requires_int16(self):
        with pytest.raises(ValueError, match="int16"):
            AudioSegment(np.zeros(4, dtype=np.float32), 22050)

    def test_requires_mono(self):
        with pytest.raises(ValueError, match="mono"):
            AudioSegment(np.zeros((4, 2), dtype=np.int16), 22050)

    def test_duration(self):
        assert _tone(11025).duration == 0.5


class TestResample:
    def test_identity_same_rate(self):
        segment = _tone(100)
        assert resample(segment, 22050) is segment

    def test_ceil_length(self):
        segment = _tone(5, rate=22050)
        assert len(resample(segment, 16000)) == -(-5 * 16000 // 22050)

    def test_up_then_length(self):
        segment = _tone(16000, rate=16000)
        out = resample(segment, 22050)
        assert out.sample_rate == 22050
        assert len(out) == 22050

    def test_constant_signal_preserved(self):
        segment = AudioSegment(np.full(400, 1234, dtype=np.int16), 8000)
        out = resample(segment, 22050)
        assert np.all(out.samples == 1234)

    def test_zero_length_rejected(self):
        segment = AudioSegment(np.zeros(0, dtype=np.int16), 8000)
        with pytest.raises(ResampleError):
            resample(segment, 22050)

    def test_bad_target(self):
        with pytest.raises(ResampleError):
            resample(_tone(10), 0)

    @given(st.integers(min_value=1, max_value=4000),
           st.sampled_from([8000, 16000, 22050, 44100]),
           st.sampled_from([8000, 16000, 22050, 44100]))
    @settings(max_examples=60, deadline=None)
    def test_duration_preserved_within_one_period(self, n, src, dst):
        segment = AudioSegment(np.zeros(n, dtype=np.int16), src)
        out = resample(segment, dst)
        assert abs(out.duration - segment.duration) <= 1.0 / dst


class TestAssembly:
    def test_gap_is_exact_samples(self):
        parts = [_tone(1000), _tone(800), _tone(600)]
        dialogue = assemble_dialogue(parts, gap_seconds=0.3, sample_rate=22050)
        gap = int(round(0.3 * 22050))
        assert gap == 6615
        assert len(dialogue.waveform) == 1000 + 800 + 600 + 2 * gap
        spans = dialogue.turn_map
        assert [s.utterance_index for s in spans] == [0, 1, 2]
        assert spans[0].start_sample == 0 and spans[0].end_sample == 1000
        assert spans[1].start_sample == 1000 + gap
        assert spans[2].start_sample == 1000 + gap + 800 + gap
        assert spans[2].end_sample == len(dialogue.waveform)

    def test_span_seconds(self):
        dialogue = assemble_dialogue([_tone(2205), _tone(2205)])
        assert dialogue.turn_map[1].start_seconds == pytest.approx(0.1 + 0.3)
        assert dialogue.duration == pytest.approx(0.1 + 0.3 + 0.1)

    def test_zero_gap(self):
        dialogue = assemble_dialogue([_tone(10), _tone(20)], gap_seconds=0.0)
        assert len(dialogue.waveform) == 30
        assert dialogue.turn_map[1].start_sample == 10

    def test_mixed_rates_resampled(self):
        parts = [_tone(8000, rate=8000), _tone(22050, rate=22050)]
        dialogue = assemble_dialogue(parts, sample_rate=22050)
        assert dialogue.waveform.sample_rate == 22050
        span0 = dialogue.turn_map[0]
        assert span0.end_sample - span0.start_sample == 22050

    def test_empty_input(self):
        dialogue = assemble_dialogue([])
        assert len(dialogue.waveform) == 0
        assert dialogue.turn_map == ()
        assert total_duration(dialogue) == 0.0

    def test_negative_gap_rejected(self):
        with pytest.raises(ValueError):
            assemble_dialogue([_tone(10)], gap_seconds=-0.1)

    def test_gap_content_is_silence(self):
        loud = AudioSegment(np.full(100, 9999, dtype=np.int16), 22050)
        dialogue = assemble_dialogue([loud, loud], gap_seconds=0.01)
        gap = dialogue.turn_map[1].start_sample - dialogue.turn_map[0].end_sample
        assert gap == int(round(0.01 * 22050))
        assert np.all(dialogue.waveform.samples[100:100 + gap] == 0)

    @given(st.lists(st.integers(min_value=1, max_value=5000), min_size=1, max_size=8),
           st.sampled_from([0.0, 0.1, 0.25, 0.3]))
    @settings(max_examples=60, deadline=None)
    def test_duration_conservation(self, lengths, gap):
        parts = [AudioSegment(np.zeros(n, dtype=np.int16), 22050) for n in lengths]
        dialogue = assemble_dialogue(parts, gap_seconds=gap)
        expected = sum(n / 22050 for n in lengths) + gap * (len(lengths) - 1)
        # one sample period of rounding slack per waveform
        assert abs(dialogue.duration - expected) <= len(lengths) / 22050
        for left, right in zip(dialogue.turn_map, dialogue.turn_map[1:]):
            assert right.start_sample - left.end_sample == int(round(gap * 22050))
