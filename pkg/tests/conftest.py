"""Shared fixtures: character pools with real (tiny) reference WAVs."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from talkgen.audio import AudioSegment, encode_wav
from talkgen.characters import load_pool

_PERSONALITIES = ("curious", "patient", "blunt", "cheerful", "wry", "earnest")
_STYLES = ("casual", "formal", "rapid-fire", "measured", "animated", "dry")


def silence_wav(seconds: float = 0.05, sample_rate: int = 22050) -> bytes:
    n = max(1, int(round(seconds * sample_rate)))
    return encode_wav(AudioSegment(np.zeros(n, dtype=np.int16), sample_rate))


def character_dict(i: int, language: str, ref_path: str, relations=()) -> dict:
    return {
        "id": f"{language.lower()}{i}",
        "name": f"{'Speaker' if language == 'EN' else '说话人'} {i}",
        "language": language,
        "profile": {
            "age": 24 + 3 * i,
            "gender": "female" if i % 2 else "male",
            "personality": _PERSONALITIES[i % len(_PERSONALITIES)],
            "speaking_style": _STYLES[i % len(_STYLES)],
        },
        "audio_ref": ref_path,
        "relations": list(relations),
    }


def write_pool_file(root: Path, counts: dict[str, int],
                    relations: dict[str, list[dict]] | None = None) -> Path:
    """Build a pool JSON under `root` with one tiny WAV per character.

    counts maps language -> number of characters; relations maps character
    id -> relation dicts (caller is responsible for symmetry).
    """
    refs = root / "refs"
    refs.mkdir(parents=True, exist_ok=True)
    characters = []
    for language, count in counts.items():
        for i in range(count):
            cid = f"{language.lower()}{i}"
            wav_rel = f"refs/{cid}.wav"
            (root / wav_rel).write_bytes(silence_wav())
            rel = (relations or {}).get(cid, [])
            characters.append(character_dict(i, language, wav_rel, rel))
    path = root / "pool.json"
    path.write_text(json.dumps({"characters": characters}, ensure_ascii=False),
                    encoding="utf-8")
    return path


@pytest.fixture
def pool_path(tmp_path) -> Path:
    return write_pool_file(tmp_path, {"EN": 6})


@pytest.fixture
def pool(pool_path):
    return load_pool(pool_path)


@pytest.fixture
def bilingual_pool_path(tmp_path) -> Path:
    return write_pool_file(tmp_path, {"EN": 6, "CN": 6})


@pytest.fixture
def bilingual_pool(bilingual_pool_path):
    return load_pool(bilingual_pool_path)


@pytest.fixture
def no_sleep():
    """Zero-delay sleep for retry/backoff tests."""
    calls: list[float] = []

    def _sleep(seconds: float) -> None:
        calls.append(seconds)

    _sleep.calls = calls
    return _sleep
