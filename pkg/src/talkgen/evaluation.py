"""Transcription accuracy and opinion-score evaluation.

Text normalization (version below) before any error-rate computation:
English is lowercased, stripped of a fixed punctuation set, and split on
whitespace (WER over words); Chinese drops whitespace, the same
punctuation plus CJK equivalents, and splits into single characters (CER
over characters).  Error rates are unit-cost Levenshtein distance over
the reference length; corpus rates pool edit distance and reference
length before dividing and are reported in percent.

Opinion scores aggregate as mean plus a normal-approximation 95%
confidence half-width: 1.96 * sample standard deviation / sqrt(n).
"""

from __future__ import annotations

import base64
import json
import os
import statistics
from dataclasses import dataclass
from typing import Protocol, Sequence

import requests

from .errors import (BackendError, ConfigError, EmptyReference, EmptySheet,
                     EmptyVotes, MalformedOutputError, OutOfRangeScore,
                     ParseError, ValidationError, Violation)

NORMALIZATION_VERSION = "norm-en1-cn1"

METRICS = ("MOS", "EMOS", "TMOS", "naturalness", "emotiveness")

_SHARED_PUNCT = ".,!?;:'\"()-"
_CJK_PUNCT = "。，！？；：“”‘’（）、"

_EN_TABLE = str.maketrans("", "", _SHARED_PUNCT)
_CN_TABLE = str.maketrans("", "", _SHARED_PUNCT + _CJK_PUNCT)


def normalize_text(text: str, language: str) -> list[str]:
    """Normalize to comparison units: EN words or CN characters."""
    if language == "EN":
        return text.lower().translate(_EN_TABLE).split()
    if language == "CN":
        compact = "".join(text.split()).translate(_CN_TABLE)
        return list(compact)
    raise ValueError(f"language must be CN or EN, got {language!r}")


def edit_distance(reference: Sequence, hypothesis: Sequence) -> int:
    """Unit-cost Levenshtein distance (substitution, insertion, deletion)."""
    if not reference:
        return len(hypothesis)
    if not hypothesis:
        return len(reference)
    previous = list(range(len(hypothesis) + 1))
    for i, ref_unit in enumerate(reference, start=1):
        current = [i] + [0] * len(hypothesis)
        for j, hyp_unit in enumerate(hypothesis, start=1):
            cost = 0 if ref_unit == hyp_unit else 1
            current[j] = min(previous[j] + 1,        # deletion
                             current[j - 1] + 1,     # insertion
                             previous[j - 1] + cost)  # substitution / match
        previous = current
    return previous[-1]


@dataclass(frozen=True)
class TranscriptPair:
    reference: str
    hypothesis: str
    language: str


def error_rate(pair: TranscriptPair) -> float:
    """WER (EN) or CER (CN) for one reference/hypothesis pair, as a fraction."""
    ref = normalize_text(pair.reference, pair.language)
    hyp = normalize_text(pair.hypothesis, pair.language)
    if not ref:
        raise EmptyReference("reference normalizes to zero units")
    return edit_distance(ref, hyp) / len(ref)


def corpus_error_rate(pairs: Sequence[TranscriptPair]) -> float:
    """Pooled error rate in percent: sum of distances over sum of lengths."""
    if not pairs:
        raise EmptyReference("no transcript pairs supplied")
    languages = {p.language for p in pairs}
    if len(languages) > 1:
        raise ValueError(f"pairs mix languages {sorted(languages)}; pool per language")
    total_distance = 0
    total_length = 0
    for pair in pairs:
        ref = normalize_text(pair.reference, pair.language)
        hyp = normalize_text(pair.hypothesis, pair.language)
        total_distance += edit_distance(ref, hyp)
        total_length += len(ref)
    if total_length == 0:
        raise EmptyReference("all references normalize to zero units")
    return 100.0 * total_distance / total_length


@dataclass(frozen=True)
class RatingItem:
    dialogue_id: str
    rater_id: str
    score: float


@dataclass(frozen=True)
class RatingSheet:
    """Scores for one metric; [1, 5] in half-point steps, one per (dialogue, rater)."""

    metric: str
    items: tuple[RatingItem, ...]

    def __post_init__(self) -> None:
        violations = []
        if self.metric not in METRICS:
            violations.append(Violation(
                "BAD_METRIC", self.metric, f"metric must be one of {METRICS}"))
        seen = set()
        for item in self.items:
            if not 1.0 <= item.score <= 5.0 or (item.score * 2) != int(item.score * 2):
                violations.append(Violation(
                    "BAD_SCORE", item.dialogue_id,
                    f"score {item.score} not in [1, 5] half-point steps"))
            key = (item.dialogue_id, item.rater_id)
            if key in seen:
                violations.append(Violation(
                    "DUPLICATE_RATING", item.dialogue_id,
                    f"rater {item.rater_id} rated this dialogue twice"))
            seen.add(key)
        if violations:
            raise ValidationError(violations)

    @property
    def scores(self) -> list[float]:
        return [item.score for item in self.items]


@dataclass(frozen=True)
class AggregateScore:
    mean: float
    dispersion: float
    n: int

    def __str__(self) -> str:
        return f"{self.mean:.2f} ± {self.dispersion:.3f} (n={self.n})"


def aggregate(sheet: RatingSheet | Sequence[float]) -> AggregateScore:
    """Mean and 95% normal-approximation half-width of a score collection."""
    scores = sheet.scores if isinstance(sheet, RatingSheet) else list(sheet)
    if not scores:
        raise EmptySheet("no scores to aggregate")
    mean = statistics.fmean(scores)
    if len(scores) == 1:
        dispersion = 0.0
    else:
        # grouping keeps the ratio exact when stdev equals sqrt(n)
        dispersion = 1.96 * (statistics.stdev(scores) / len(scores) ** 0.5)
    return AggregateScore(mean=mean, dispersion=dispersion, n=len(scores))


CHOICES = ("A", "B", "tie")


@dataclass(frozen=True)
class PreferenceTally:
    counts: dict[str, int]
    percentages: dict[str, float]
    n: int


def preference_tally(votes: Sequence[str]) -> PreferenceTally:
    """Percentage per choice over A/B/tie votes; percentages sum to 100."""
    if not votes:
        raise EmptyVotes("no votes to tally")
    unknown = sorted({v for v in votes} - set(CHOICES))
    if unknown:
        raise ValueError(f"unknown vote values {unknown}; allowed: {CHOICES}")
    counts = {choice: 0 for choice in CHOICES}
    for vote in votes:
        counts[vote] += 1
    percentages = {choice: 100.0 * count / len(votes)
                   for choice, count in counts.items()}
    return PreferenceTally(counts=counts, percentages=percentages, n=len(votes))


class PredictorClient(Protocol):
    """Automatic quality predictor: WAV bytes in, score in [1, 5] out."""

    def score(self, wav_bytes: bytes) -> float: ...


def score_with_predictor(client: PredictorClient, wav_bytes: bytes) -> float:
    value = float(client.score(wav_bytes))
    if not 1.0 <= value <= 5.0:
        raise OutOfRangeScore(f"predictor returned {value}, outside [1, 5]")
    return value


def predictor_mean(client: PredictorClient, clips: Sequence[bytes]) -> float:
    """Average predictor score over a clip list."""
    if not clips:
        raise EmptySheet("no clips to score")
    return statistics.fmean(score_with_predictor(client, clip) for clip in clips)


class HttpPredictorClient:
    """POSTs {"audio": <base64 WAV>} and reads {"score": <float>} back."""

    def __init__(self, url: str, token_env: str | None = None, timeout: float = 120.0):
        self.url = url
        self.timeout = timeout
        self._headers = {}
        if token_env:
            token = os.environ.get(token_env)
            if not token:
                raise ConfigError(f"environment variable {token_env} is not set")
            self._headers = {"Authorization": f"Bearer {token}"}

    def score(self, wav_bytes: bytes) -> float:
        body = {"audio": base64.b64encode(wav_bytes).decode("ascii")}
        try:
            response = requests.post(self.url, json=body, headers=self._headers,
                                     timeout=self.timeout)
        except requests.RequestException as exc:
            raise BackendError(f"request to {self.url} failed: {exc}") from exc
        if not 200 <= response.status_code < 300:
            raise BackendError(f"{self.url} returned an error",
                               status=response.status_code, detail=response.text)
        try:
            return float(response.json()["score"])
        except (ValueError, KeyError, TypeError) as exc:
            raise MalformedOutputError(
                f"predictor reply missing numeric 'score': {exc}",
                raw_text=response.text) from exc


def load_transcripts(path: str) -> list[tuple[str, int, str]]:
    """Read hypothesis transcripts from TSV: dialogue_id, utterance_index, text."""
    rows = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise ParseError(f"expected 3 tab-separated fields, got {len(parts)}",
                                     source=path, line=lineno)
                dialogue_id, index_text, hypothesis = parts
                try:
                    index = int(index_text)
                except ValueError:
                    raise ParseError(f"utterance index {index_text!r} is not an integer",
                                     source=path, line=lineno) from None
                rows.append((dialogue_id, index, hypothesis))
    except OSError as exc:
        raise ParseError(f"cannot read transcripts: {exc}", source=path) from exc
    return rows


def load_ratings(path: str) -> dict[str, RatingSheet]:
    """Read rating sheets from a JSON array of {metric, dialogue_id, rater_id, score}."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read ratings: {exc}", source=path) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", source=path, line=exc.lineno) from exc
    if not isinstance(data, list):
        raise ParseError("ratings file must hold a JSON array", source=path)

    by_metric: dict[str, list[RatingItem]] = {}
    for position, entry in enumerate(data):
        if not isinstance(entry, dict):
            raise ParseError(f"entry {position} is not an object", source=path)
        missing = [k for k in ("metric", "dialogue_id", "rater_id", "score")
                   if k not in entry]
        if missing:
            raise ParseError(f"entry {position} missing {', '.join(missing)}", source=path)
        if not isinstance(entry["score"], (int, float)) or isinstance(entry["score"], bool):
            raise ParseError(f"entry {position} score must be a number", source=path)
        by_metric.setdefault(str(entry["metric"]), []).append(RatingItem(
            dialogue_id=str(entry["dialogue_id"]),
            rater_id=str(entry["rater_id"]),
            score=float(entry["score"]),
        ))
    return {metric: RatingSheet(metric=metric, items=tuple(items))
            for metric, items in by_metric.items()}
