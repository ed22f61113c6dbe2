"""Error rates, rating aggregation, preference tallies, predictor client."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracle import make_oracle
from talkgen.errors import (EmptyReference, EmptySheet, EmptyVotes,
                            OutOfRangeScore, ParseError, ValidationError)
from talkgen.evaluation import (AggregateScore, RatingItem, RatingSheet,
                                TranscriptPair, aggregate, corpus_error_rate,
                                edit_distance, error_rate, load_ratings,
                                load_transcripts, normalize_text,
                                predictor_mean, preference_tally,
                                score_with_predictor)

_oracle = make_oracle()


class TestNormalize:
    def test_en_lowercase_and_punctuation(self):
        assert normalize_text("Hello, World!", "EN") == ["hello", "world"]

    def test_en_quotes_and_hyphens(self):
        assert normalize_text('He said "real-life" tools; right?', "EN") == [
            "he", "said", "reallife", "tools", "right"]

    def test_cn_characters(self):
        assert normalize_text("你好，世界！", "CN") == ["你", "好", "世", "界"]

    def test_cn_strips_whitespace_and_ascii_punct(self):
        assert normalize_text("早上 好。 (真的)", "CN") == ["早", "上", "好", "真", "的"]

    def test_unknown_language(self):
        with pytest.raises(ValueError):
            normalize_text("x", "DE")


class TestEditDistance:
    @pytest.mark.parametrize("a,b,d", [
        ("", "", 0),
        ("abc", "", 3),
        ("", "abc", 3),
        ("abc", "abc", 0),
        ("kitten", "sitting", 3),
        ("flaw", "lawn", 2),
    ])
    def test_known_values(self, a, b, d):
        assert edit_distance(a, b) == d

    def test_works_on_word_lists(self):
        assert edit_distance(["a", "b", "c"], ["a", "x", "c"]) == 1

    @given(st.text(alphabet="abcd", max_size=8), st.text(alphabet="abcd", max_size=8))
    @settings(max_examples=400, deadline=None)
    def test_matches_exhaustive_recursion(self, a, b):
        assert edit_distance(a, b) == _oracle(a, b)

    @given(st.text(alphabet="ab", max_size=7), st.text(alphabet="ab", max_size=7))
    @settings(max_examples=200, deadline=None)
    def test_symmetry(self, a, b):
        assert edit_distance(a, b) == edit_distance(b, a)

    @given(st.text(alphabet="abc", max_size=5), st.text(alphabet="abc", max_size=5),
           st.text(alphabet="abc", max_size=5))
    @settings(max_examples=200, deadline=None)
    def test_triangle_inequality(self, a, b, c):
        assert edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c)


class TestErrorRate:
    def test_worked_example_third(self):
        # one substitution plus one deletion against six reference words
        pair = TranscriptPair(reference="a b c d e f", hypothesis="a x c d e",
                              language="EN")
        assert error_rate(pair) == pytest.approx(2 / 6)
        assert corpus_error_rate([pair]) == pytest.approx(100 * 2 / 6)

    def test_worked_example_quarter(self):
        pair = TranscriptPair(reference="a b c d", hypothesis="a b c x",
                              language="EN")
        assert error_rate(pair) == pytest.approx(0.25)
        assert corpus_error_rate([pair]) == pytest.approx(25.0)

    def test_pooled_not_averaged(self):
        pairs = [
            TranscriptPair("a b c d e f", "a x c d e", "EN"),   # 2 errors / 6
            TranscriptPair("a b c d", "a b c x", "EN"),         # 1 error / 4
        ]
        # pooled: (2+1)/(6+4) = 30%, not mean(33.33, 25) = 29.17%
        assert corpus_error_rate(pairs) == pytest.approx(30.0)

    def test_cn_uses_characters(self):
        pair = TranscriptPair(reference="你好世界", hypothesis="你好地球", language="CN")
        assert error_rate(pair) == pytest.approx(0.5)

    def test_normalization_absorbs_case_and_punctuation(self):
        pair = TranscriptPair("Hello, world!", "hello world", "EN")
        assert error_rate(pair) == 0.0

    def test_empty_reference(self):
        with pytest.raises(EmptyReference):
            error_rate(TranscriptPair("!!!", "word", "EN"))

    def test_no_pairs(self):
        with pytest.raises(EmptyReference):
            corpus_error_rate([])

    def test_mixed_languages_rejected(self):
        pairs = [TranscriptPair("a", "a", "EN"), TranscriptPair("你", "你", "CN")]
        with pytest.raises(ValueError, match="mix"):
            corpus_error_rate(pairs)


class TestRatingSheet:
    def test_valid(self):
        sheet = RatingSheet("MOS", (
            RatingItem("d1", "r1", 4.5),
            RatingItem("d1", "r2", 3.0),
            RatingItem("d2", "r1", 5.0),
        ))
        assert sheet.scores == [4.5, 3.0, 5.0]

    def test_bad_metric(self):
        with pytest.raises(ValidationError) as exc:
            RatingSheet("SNR", (RatingItem("d1", "r1", 3.0),))
        assert exc.value.violations[0].code == "BAD_METRIC"

    @pytest.mark.parametrize("score", [0.5, 5.5, 4.3, 3.25])
    def test_bad_scores(self, score):
        with pytest.raises(ValidationError) as exc:
            RatingSheet("MOS", (RatingItem("d1", "r1", score),))
        assert any(v.code == "BAD_SCORE" for v in exc.value.violations)

    def test_duplicate_rating(self):
        with pytest.raises(ValidationError) as exc:
            RatingSheet("EMOS", (RatingItem("d1", "r1", 3.0),
                                 RatingItem("d1", "r1", 4.0)))
        assert any(v.code == "DUPLICATE_RATING" for v in exc.value.violations)

    def test_same_rater_different_dialogues_ok(self):
        RatingSheet("TMOS", (RatingItem("d1", "r1", 3.0),
                             RatingItem("d2", "r1", 4.0)))


class TestAggregate:
    def test_two_scores_exact(self):
        agg = aggregate([3.0, 5.0])
        assert agg.mean == 4.0
        assert agg.dispersion == 1.96
        assert agg.n == 2

    def test_constant_scores(self):
        agg = aggregate([4.0, 4.0, 4.0, 4.0])
        assert agg.mean == 4.0
        assert agg.dispersion == 0.0

    def test_single_score(self):
        agg = aggregate([2.5])
        assert agg == AggregateScore(mean=2.5, dispersion=0.0, n=1)

    def test_accepts_sheet(self):
        sheet = RatingSheet("MOS", (RatingItem("d1", "r1", 3.0),
                                    RatingItem("d2", "r2", 5.0)))
        assert aggregate(sheet).mean == 4.0

    def test_empty(self):
        with pytest.raises(EmptySheet):
            aggregate([])

    def test_str_format(self):
        assert str(aggregate([3.0, 5.0])) == "4.00 ± 1.960 (n=2)"

    @given(st.lists(st.sampled_from([1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0]),
                    min_size=2, max_size=30))
    @settings(max_examples=100, deadline=None)
    def test_mean_within_bounds(self, scores):
        agg = aggregate(scores)
        assert 1.0 <= agg.mean <= 5.0
        assert agg.dispersion >= 0.0


class TestPreferenceTally:
    def test_split(self):
        votes = ["A"] * 25 + ["B"] * 8
        tally = preference_tally(votes)
        assert tally.counts == {"A": 25, "B": 8, "tie": 0}
        assert tally.percentages["A"] == pytest.approx(75.7575, abs=1e-3)
        assert sum(tally.percentages.values()) == pytest.approx(100.0)

    def test_ties_counted(self):
        tally = preference_tally(["A", "tie", "B", "tie"])
        assert tally.counts["tie"] == 2
        assert tally.n == 4

    def test_unknown_vote(self):
        with pytest.raises(ValueError, match="unknown"):
            preference_tally(["A", "C"])

    def test_empty(self):
        with pytest.raises(EmptyVotes):
            preference_tally([])


class _StubPredictor:
    def __init__(self, value):
        self.value = value
        self.calls = 0

    def score(self, wav_bytes: bytes) -> float:
        self.calls += 1
        return self.value


class TestPredictor:
    def test_in_range(self):
        assert score_with_predictor(_StubPredictor(3.7), b"xx") == 3.7

    @pytest.mark.parametrize("value", [0.9, 5.2, -1.0])
    def test_out_of_range(self, value):
        with pytest.raises(OutOfRangeScore):
            score_with_predictor(_StubPredictor(value), b"xx")

    def test_mean(self):
        client = _StubPredictor(4.0)
        assert predictor_mean(client, [b"a", b"b", b"c"]) == 4.0
        assert client.calls == 3


class TestLoaders:
    def test_transcripts(self, tmp_path):
        path = tmp_path / "hyp.tsv"
        path.write_text("d1\t0\thello there\nd1\t1\tsecond line\n\nd2\t0\t你好\n",
                        encoding="utf-8")
        rows = load_transcripts(str(path))
        assert rows == [("d1", 0, "hello there"), ("d1", 1, "second line"),
                        ("d2", 0, "你好")]

    def test_transcripts_bad_column_count(self, tmp_path):
        path = tmp_path / "hyp.tsv"
        path.write_text("d1\t0\n", encoding="utf-8")
        with pytest.raises(ParseError) as exc:
            load_transcripts(str(path))
        assert exc.value.line == 1

    def test_transcripts_bad_index(self, tmp_path):
        path = tmp_path / "hyp.tsv"
        path.write_text("d1\tzero\ttext\n", encoding="utf-8")
        with pytest.raises(ParseError, match="integer"):
            load_transcripts(str(path))

    def test_transcripts_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            load_transcripts(str(tmp_path / "nope.tsv"))

    def test_ratings(self, tmp_path):
        path = tmp_path / "ratings.json"
        path.write_text(json.dumps([
            {"metric": "MOS", "dialogue_id": "d1", "rater_id": "r1", "score": 4.5},
            {"metric": "MOS", "dialogue_id": "d2", "rater_id": "r1", "score": 3},
            {"metric": "EMOS", "dialogue_id": "d1", "rater_id": "r1", "score": 5},
        ]), encoding="utf-8")
        sheets = load_ratings(str(path))
        assert set(sheets) == {"MOS", "EMOS"}
        assert sheets["MOS"].scores == [4.5, 3.0]

    def test_ratings_bad_shape(self, tmp_path):
        path = tmp_path / "ratings.json"
        path.write_text(json.dumps({"metric": "MOS"}), encoding="utf-8")
        with pytest.raises(ParseError, match="array"):
            load_ratings(str(path))

    def test_ratings_missing_field(self, tmp_path):
        path = tmp_path / "ratings.json"
        path.write_text(json.dumps([{"metric": "MOS", "score": 4.0}]), encoding="utf-8")
        with pytest.raises(ParseError, match="missing"):
            load_ratings(str(path))

    def test_ratings_invalid_scores_surface_as_validation(self, tmp_path):
        path = tmp_path / "ratings.json"
        path.write_text(json.dumps([
            {"metric": "MOS", "dialogue_id": "d1", "rater_id": "r1", "score": 4.1},
        ]), encoding="utf-8")
        with pytest.raises(ValidationError):
            load_ratings(str(path))
