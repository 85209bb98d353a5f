"""Unit and property tests for the CHAT parser.

Expected parses for the fixture files were written out by hand from the
documented marker grammar before the parser existed.
"""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptbench.chat_parser import (
    AnnotationKind,
    ErrorClass,
    MalformedHeader,
    TokenKind,
    UnterminatedTier,
    WarningSeverity,
    document_to_dict,
    parse_document,
    tokenize_main_tier,
)

HEADER = (
    "@UTF8\n"
    "@Begin\n"
    "@Languages:\teng\n"
    "@Participants:\tPAR Participant, INV Investigator\n"
    "@ID:\teng|study|PAR|61;|male|||Participant||\n"
    "@ID:\teng|study|INV|||||Investigator||\n"
)


def parse(body: str, path: str = "sample.cha"):
    return parse_document(HEADER + body + "@End\n", path)


def words(utt):
    return [t.surface for t in utt.tokens]


def kinds(utt):
    return [t.kind for t in utt.tokens]


class TestBasicParsing:
    def test_simple_utterance_with_bullet(self):
        doc = parse("*PAR:\tthe dog . •0_1500•\n")
        assert len(doc.utterances) == 1
        utt = doc.utterances[0]
        assert words(utt) == ["the", "dog"]
        assert utt.terminator == "."
        assert utt.alignment is not None
        assert (utt.alignment.start_ms, utt.alignment.end_ms) == (0, 1500)

    def test_nak_delimited_bullet(self):
        doc = parse("*PAR:\tyes . \x15100_900\x15\n")
        assert doc.utterances[0].alignment.start_ms == 100
        assert doc.utterances[0].alignment.end_ms == 900

    def test_leading_bom_stripped(self):
        doc = parse_document("﻿" + HEADER + "*PAR:\tyes .\n@End\n", "b.cha")
        assert len(doc.utterances) == 1

    def test_utt_ids_are_stem_plus_index(self):
        doc = parse("*PAR:\tone .\n*PAR:\ttwo .\n", path="dir/Adler01a.cha")
        assert [u.utt_id for u in doc.utterances] == [
            "Adler01a_00000",
            "Adler01a_00001",
        ]

    def test_replacement_and_error_code(self):
        doc = parse("*PAR:\twabbit [: rabbit] [* p:w] .\n")
        utt = doc.utterances[0]
        assert words(utt) == ["wabbit"]
        assert utt.tokens[0].replacement == "rabbit"
        errors = [a for a in utt.annotations if a.kind == AnnotationKind.ERROR_CODE]
        assert len(errors) == 1
        assert errors[0].error_class == ErrorClass.PRONUNCIATION
        assert errors[0].scope == (0, 1)

    def test_continuation_lines_merge(self):
        doc = parse("*PAR:\tthe dog ran\n\tover the hill .\n")
        assert words(doc.utterances[0]) == ["the", "dog", "ran", "over", "the", "hill"]
        assert doc.utterances[0].raw_text == "the dog ran over the hill ."

    def test_dependent_tier_attached_not_tokenized(self):
        doc = parse("*PAR:\tthe dog .\n%mor:\tdet|the n|dog .\n")
        utt = doc.utterances[0]
        assert words(utt) == ["the", "dog"]
        assert utt.tiers == {"mor": "det|the n|dog ."}

    def test_participants_recorded(self):
        doc = parse("*PAR:\tyes .\n")
        assert ("PAR", "Participant") in doc.participants
        assert ("INV", "Investigator") in doc.participants

    def test_utterances_preserve_file_order_and_speakers(self):
        doc = parse("*PAR:\tone .\n*INV:\ttwo .\n*PAR:\tthree .\n")
        assert [u.speaker_code for u in doc.utterances] == ["PAR", "INV", "PAR"]


class TestTokenKinds:
    def test_unintelligible_nonspeech_word(self):
        tokens, _ = tokenize_main_tier("xxx &=coughs yes .")
        assert [t.kind for t in tokens] == [
            TokenKind.UNINTELLIGIBLE,
            TokenKind.NONSPEECH,
            TokenKind.WORD,
        ]

    def test_fragment_and_filler(self):
        tokens, _ = tokenize_main_tier("&+fr &-um dog")
        assert [t.kind for t in tokens] == [
            TokenKind.FRAGMENT,
            TokenKind.WORD,
            TokenKind.WORD,
        ]

    def test_phonological_forms(self):
        tokens, _ = tokenize_main_tier("yyy bada@u word")
        assert [t.kind for t in tokens] == [
            TokenKind.PHONOLOGICAL,
            TokenKind.PHONOLOGICAL,
            TokenKind.WORD,
        ]

    def test_pause_is_nonspeech(self):
        tokens, _ = tokenize_main_tier("(.) well (...) yes")
        assert [t.kind for t in tokens] == [
            TokenKind.NONSPEECH,
            TokenKind.WORD,
            TokenKind.NONSPEECH,
            TokenKind.WORD,
        ]

    def test_shortening_gets_auto_replacement(self):
        tokens, _ = tokenize_main_tier("(be)cause yes")
        assert tokens[0].surface == "(be)cause"
        assert tokens[0].replacement == "because"


class TestMarkerGrammar:
    def test_retrace_scope_over_group(self):
        tokens, annotations = tokenize_main_tier("<I want> [//] I need it .")
        assert [t.surface for t in tokens] == ["I", "want", "I", "need", "it"]
        retraces = [a for a in annotations if a.kind == AnnotationKind.RETRACE]
        assert len(retraces) == 1
        assert retraces[0].scope == (0, 2)

    def test_repetition_on_single_token(self):
        tokens, annotations = tokenize_main_tier("the [/] the dog")
        assert [t.surface for t in tokens] == ["the", "the", "dog"]
        reps = [a for a in annotations if a.kind == AnnotationKind.REPETITION]
        assert reps[0].scope == (0, 1)

    def test_nested_group_scopes(self):
        # inner repetition covers the first "the"; outer retrace covers both
        tokens, annotations = tokenize_main_tier("<the [/] the> [//] a dog")
        assert [t.surface for t in tokens] == ["the", "the", "a", "dog"]
        reps = [a for a in annotations if a.kind == AnnotationKind.REPETITION]
        rets = [a for a in annotations if a.kind == AnnotationKind.RETRACE]
        assert reps[0].scope == (0, 1)
        assert rets[0].scope == (0, 2)

    def test_group_replacement_recorded_on_annotation(self):
        tokens, annotations = tokenize_main_tier("<gonna went> [: going to go] now")
        repl = [a for a in annotations if a.kind == AnnotationKind.REPLACEMENT]
        assert repl[0].scope == (0, 2)
        assert repl[0].replacement == "going to go"
        assert tokens[0].replacement is None

    def test_unknown_bracket_code_is_other(self):
        _, annotations = tokenize_main_tier("dog [% laughing] .")
        others = [a for a in annotations if a.kind == AnnotationKind.OTHER]
        assert others[0].raw_marker == "[% laughing]"

    def test_semantic_and_other_error_classes(self):
        _, annotations = tokenize_main_tier("cat [* s:r] mat [* n:k] hat [*]")
        classes = [
            a.error_class for a in annotations if a.kind == AnnotationKind.ERROR_CODE
        ]
        assert classes == [ErrorClass.SEMANTIC, ErrorClass.OTHER, ErrorClass.OTHER]

    def test_unbalanced_angle_is_recoverable(self):
        doc = parse("*PAR:\t<the dog .\n")
        assert words(doc.utterances[0]) == ["the", "dog"]
        assert any(
            w.severity == WarningSeverity.RECOVERABLE and "'<'" in w.message
            for w in doc.warnings
        )

    def test_unbalanced_bracket_is_recoverable(self):
        doc = parse("*PAR:\tdog [: unclosed\n")
        assert any("'['" in w.message for w in doc.warnings)
        assert any(
            a.kind == AnnotationKind.OTHER for a in doc.utterances[0].annotations
        )

    def test_special_terminator(self):
        doc = parse("*PAR:\tI was going +...\n")
        assert doc.utterances[0].terminator == "+..."
        assert words(doc.utterances[0]) == ["I", "was", "going"]


class TestErrors:
    def test_missing_participants_header(self):
        with pytest.raises(MalformedHeader):
            parse_document("@Begin\n*PAR:\tthe dog .\n@End\n", "x.cha")

    def test_undeclared_speaker(self):
        with pytest.raises(MalformedHeader) as exc:
            parse("*ZZZ:\thello .\n")
        assert exc.value.line_no is not None

    def test_id_for_undeclared_speaker(self):
        bad = HEADER + "@ID:\teng|study|QQQ|||||Participant||\n*PAR:\tyes .\n@End\n"
        with pytest.raises(MalformedHeader):
            parse_document(bad, "x.cha")

    def test_unterminated_tier_at_eof(self):
        with pytest.raises(UnterminatedTier):
            parse_document(HEADER + "*PAR:", "x.cha")

    def test_empty_tier_mid_file_is_warning(self):
        doc = parse("*PAR:\n*PAR:\tyes .\n")
        assert len(doc.utterances) == 2
        assert any("empty speaker tier" in w.message for w in doc.warnings)


class TestFullFixture:
    # three speakers, every marker family, hand-written expectations
    FIXTURE = (
        "@UTF8\n"
        "@Begin\n"
        "@Languages:\teng\n"
        "@Participants:\tPAR Participant, INV Investigator, OBS Observer\n"
        "@ID:\teng|study|PAR|58;|female|||Participant||\n"
        "@ID:\teng|study|INV|||||Investigator||\n"
        "@ID:\teng|study|OBS|||||Observer||\n"
        "@Media:\tsample3, audio\n"
        "*INV:\thow are you today ? •0_2100•\n"
        "*PAR:\t<I am> [//] I was xxx &=laughs fine . •2200_5900•\n"
        "*PAR:\tthe wabbit [: rabbit] [* p:w] ran &+aw away . •6000_9100•\n"
        "%mor:\tdet|the n|rabbit v|run adv|away .\n"
        "*OBS:\tshe seems &-um happy .\n"
        "*PAR:\tyyy .\n"
        "@End\n"
    )

    def test_expected_document(self):
        doc = parse_document(self.FIXTURE, "sample3.cha")
        assert len(doc.utterances) == 5
        assert [u.speaker_code for u in doc.utterances] == [
            "INV",
            "PAR",
            "PAR",
            "OBS",
            "PAR",
        ]
        assert not [w for w in doc.warnings if w.severity == WarningSeverity.DROPPED]

        u1 = doc.utterances[1]
        assert words(u1) == ["I", "am", "I", "was", "xxx", "&=laughs", "fine"]
        assert kinds(u1) == [
            TokenKind.WORD,
            TokenKind.WORD,
            TokenKind.WORD,
            TokenKind.WORD,
            TokenKind.UNINTELLIGIBLE,
            TokenKind.NONSPEECH,
            TokenKind.WORD,
        ]
        assert u1.alignment.duration_ms() == 3700

        u2 = doc.utterances[2]
        assert u2.tokens[1].replacement == "rabbit"
        assert u2.tiers["mor"].startswith("det|the")

        assert doc.utterances[4].tokens[0].kind == TokenKind.PHONOLOGICAL

    def test_utterance_count_equals_main_tier_starts(self):
        doc = parse_document(self.FIXTURE, "sample3.cha")
        starts = sum(
            1 for line in self.FIXTURE.splitlines() if line.startswith("*")
        )
        assert len(doc.utterances) == starts


class TestProperties:
    def test_span_fidelity_on_fixture(self):
        doc = parse_document(TestFullFixture.FIXTURE, "sample3.cha")
        for utt in doc.utterances:
            raw = utt.raw_text.encode("utf-8")
            for tok in utt.tokens:
                start, end = tok.span
                assert raw[start:end].decode("utf-8") == tok.surface

    @given(st.text(max_size=300))
    @settings(max_examples=200, deadline=None)
    def test_totality_on_arbitrary_text(self, content):
        try:
            parse_document(content, "fuzz.cha")
        except (MalformedHeader, UnterminatedTier):
            pass

    @given(
        st.lists(
            st.text(
                alphabet=st.characters(blacklist_categories=("Cs",)), max_size=40
            ),
            max_size=8,
        )
    )
    @settings(max_examples=100, deadline=None)
    def test_totality_on_arbitrary_tier_payloads(self, payload_lines):
        body = "".join(f"*PAR:\t{line}\n" for line in payload_lines)
        try:
            doc = parse_document(HEADER + body + "@End\n", "fuzz.cha")
        except (MalformedHeader, UnterminatedTier):
            return
        for utt in doc.utterances:
            raw = utt.raw_text.encode("utf-8")
            for tok in utt.tokens:
                start, end = tok.span
                assert raw[start:end].decode("utf-8") == tok.surface

    def test_deterministic_serialized_form(self):
        one = json.dumps(
            document_to_dict(parse_document(TestFullFixture.FIXTURE, "a.cha")),
            sort_keys=True,
        )
        two = json.dumps(
            document_to_dict(parse_document(TestFullFixture.FIXTURE, "a.cha")),
            sort_keys=True,
        )
        assert one == two
