"""Markup grammar and script model tests."""

from random import Random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grammar_gen import canonical_utterance, noisy
from talkgen.errors import MarkupError
from talkgen.script import (DialogueScript, EmphasisSpan, MarkupConfig,
                            PauseToken, PlainText, Utterance, parse_markup,
                            render_markup, strip_markup, validate_script)

# Hand-refined example lines exercising every grammar feature at once:
# emphasis, pauses, labels, and (last row) a bracketed word that is NOT a
# label because a period follows it.
REFINED_EXAMPLES = (
    "You know, financial literacy is <strong> so </strong>crucial for young "
    "adults today. Wouldn't you agree, Mark? [Engaging]",
    "Absolutely, James! [breath] Understanding budgeting and saving early can "
    "really set them up for success in the future. It's so important! [Agreeable]",
    "Right! [breath] But how do we make these concepts <strong> engaging "
    "</strong> for them? Maybe we could use practical examples and interactive "
    "tools. [Curious]",
    "We could let them manage a mock portfolio, perhaps. [breath] Real-life "
    "simulations could boost their interest and understanding. [Innovative]",
    "That's a solid idea, Mark. Those hands-on experiences can make all the "
    "difference! [Encouraged].",
)

ROW1_SPOKEN = ("You know, financial literacy is so crucial for young adults "
               "today. Wouldn't you agree, Mark?")


class TestParse:
    def test_plain(self):
        parsed = parse_markup("Just words here.")
        assert parsed.segments == (PlainText("Just words here."),)
        assert parsed.emotion_label is None
        assert parsed.warnings == ()

    def test_emphasis_and_label(self):
        parsed = parse_markup("That is <strong>very</strong> kind. [Happy]")
        assert parsed.segments == (PlainText("That is"), EmphasisSpan("very"),
                                   PlainText("kind."))
        assert parsed.emotion_label == "Happy"

    def test_pause_token(self):
        parsed = parse_markup("Wait. [breath] Go on.")
        assert parsed.segments == (PlainText("Wait."), PauseToken("breath"),
                                   PlainText("Go on."))

    def test_emphasis_glued_to_word(self):
        parsed = parse_markup("is <strong> so </strong>crucial")
        assert parsed.segments == (PlainText("is"), EmphasisSpan("so"),
                                   PlainText("crucial"))

    def test_label_must_trail(self):
        parsed = parse_markup("[Happy] morning to you")
        assert parsed.emotion_label is None
        assert parsed.segments == (PlainText("[Happy] morning to you"),)
        assert any("trailing" in w for w in parsed.warnings)

    def test_label_with_trailing_whitespace(self):
        assert parse_markup("fine [Calm]   ").emotion_label == "Calm"

    def test_trailing_punctuation_defeats_label(self):
        parsed = parse_markup("all the difference! [Encouraged].")
        assert parsed.emotion_label is None
        assert parsed.segments == (PlainText("all the difference! [Encouraged]."),)
        assert parsed.warnings

    def test_unknown_bracket_kept_verbatim(self):
        parsed = parse_markup("one [cough] two")
        assert parsed.segments == (PlainText("one [cough] two"),)
        assert any("unknown" in w for w in parsed.warnings)

    def test_custom_pause_vocabulary(self):
        config = MarkupConfig(pause_kinds=frozenset({"breath", "cough"}))
        parsed = parse_markup("one [cough] two", config)
        assert parsed.segments == (PlainText("one"), PauseToken("cough"),
                                   PlainText("two"))
        assert parsed.warnings == ()

    def test_bracket_inside_emphasis_stays_literal(self):
        parsed = parse_markup("<strong>very [breath] loud</strong> indeed")
        assert parsed.segments == (EmphasisSpan("very [breath] loud"),
                                   PlainText("indeed"))
        assert parsed.warnings

    def test_empty_emphasis_dropped(self):
        parsed = parse_markup("a <strong>  </strong> b")
        assert parsed.segments == (PlainText("a b"),)
        assert any("empty" in w for w in parsed.warnings)

    def test_whitespace_collapsed(self):
        parsed = parse_markup("a    b\t c")
        assert parsed.segments == (PlainText("a b c"),)

    def test_adjacent_plain_merged(self):
        # the unknown token splits the scan but not the segment sequence
        parsed = parse_markup("a [zzz] b")
        assert len(parsed.segments) == 1

    def test_nested_emphasis_rejected(self):
        with pytest.raises(MarkupError):
            parse_markup("a <strong>b <strong>c</strong></strong>")

    def test_unclosed_emphasis_rejected(self):
        with pytest.raises(MarkupError):
            parse_markup("a <strong>b")

    def test_stray_close_rejected(self):
        with pytest.raises(MarkupError):
            parse_markup("a b</strong>")


class TestRefinedExamples:
    @pytest.mark.parametrize("raw", REFINED_EXAMPLES)
    def test_round_trip(self, raw):
        first = parse_markup(raw)
        again = parse_markup(render_markup(first.segments, first.emotion_label))
        assert again.segments == first.segments
        assert again.emotion_label == first.emotion_label

    def test_row1_strip(self):
        assert strip_markup(REFINED_EXAMPLES[0]) == ROW1_SPOKEN

    def test_labels(self):
        labels = [parse_markup(r).emotion_label for r in REFINED_EXAMPLES]
        assert labels == ["Engaging", "Agreeable", "Curious", "Innovative", None]

    def test_pause_tokens(self):
        counts = [sum(isinstance(s, PauseToken) for s in parse_markup(r).segments)
                  for r in REFINED_EXAMPLES]
        assert counts == [0, 1, 1, 1, 0]

    def test_canonical_render_row3(self):
        parsed = parse_markup(REFINED_EXAMPLES[2])
        assert render_markup(parsed.segments, parsed.emotion_label) == (
            "Right! [breath] But how do we make these concepts "
            "<strong>engaging</strong> for them? Maybe we could use practical "
            "examples and interactive tools. [Curious]")


class TestGeneratedRoundTrip:
    def test_canonical_identity_bulk(self):
        rng = Random(7)
        for _ in range(300):
            text = canonical_utterance(rng)
            parsed = parse_markup(text)
            assert render_markup(parsed.segments, parsed.emotion_label) == text

    def test_noisy_parse_identity(self):
        rng = Random(11)
        for _ in range(300):
            text = canonical_utterance(rng)
            first = parse_markup(noisy(rng, text))
            second = parse_markup(render_markup(first.segments, first.emotion_label))
            assert (second.segments, second.emotion_label) == (
                first.segments, first.emotion_label)

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=200, deadline=None)
    def test_identity_property(self, seed):
        text = canonical_utterance(Random(seed))
        parsed = parse_markup(text)
        assert render_markup(parsed.segments, parsed.emotion_label) == text


def _script(utterance_texts, speakers, participants=("en0", "en1"), language="EN"):
    utterances = tuple(
        Utterance.parse(i, speakers[i % len(speakers)], text)
        for i, text in enumerate(utterance_texts))
    return DialogueScript(language=language, topic_tag="travel",
                          iteration_index=0, participants=tuple(participants),
                          utterances=utterances)


class TestUtterance:
    def test_parse_canonicalizes_raw_text(self):
        utt = Utterance.parse(0, "en0", "hello   <strong> big </strong>world [Happy]")
        assert utt.raw_text == "hello <strong>big</strong> world [Happy]"
        assert utt.emotion_label == "Happy"
        assert utt.stripped_text == "hello big world"

    def test_pause_count(self):
        utt = Utterance.parse(0, "en0", "a [breath] b [breath] c")
        assert utt.pause_count == 2


class TestDialogueScript:
    def test_round_trip_dict(self):
        script = _script(["Hi there. [breath] Morning. [Happy]", "Hello back."],
                         ["en0", "en1"])
        clone = DialogueScript.from_dict(script.to_dict())
        assert clone == script

    def test_render_lines(self):
        script = _script(["One two.", "Three four."], ["en0", "en1"])
        assert script.render_lines() == "en0: One two.\nen1: Three four."


class TestValidateScript:
    def test_clean(self, pool):
        script = _script(["Hello there, how are you?", "Fine, thanks for asking."],
                         ["en0", "en1"])
        assert validate_script(script, pool) == []

    def test_too_few(self):
        script = _script(["Only one line here."], ["en0"], participants=("en0",))
        codes = {v.code for v in validate_script(script)}
        assert "TOO_FEW_UTTERANCES" in codes

    def test_bad_index(self):
        good = _script(["a b", "c d"], ["en0", "en1"])
        twisted = DialogueScript(
            language=good.language, topic_tag=good.topic_tag, iteration_index=0,
            participants=good.participants,
            utterances=(good.utterances[1], good.utterances[0]))
        codes = [v.code for v in validate_script(twisted)]
        assert codes.count("BAD_INDEX") == 2

    def test_unknown_speaker_and_silent_participant(self):
        script = _script(["a b", "c d"], ["en0", "en9"], participants=("en0", "en1"))
        codes = {v.code for v in validate_script(script)}
        assert {"UNKNOWN_SPEAKER", "SILENT_PARTICIPANT"} <= codes

    def test_pool_language_mismatch(self, bilingual_pool):
        script = _script(["a b", "c d"], ["en0", "cn0"],
                         participants=("en0", "cn0"), language="EN")
        codes = {v.code for v in validate_script(script, bilingual_pool)}
        assert "LANGUAGE_MISMATCH" in codes

    def test_unknown_participant(self, pool):
        script = _script(["a b", "c d"], ["en0", "ghost"],
                         participants=("en0", "ghost"))
        codes = {v.code for v in validate_script(script, pool)}
        assert "UNKNOWN_PARTICIPANT" in codes
