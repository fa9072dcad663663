import random

import pytest

from sleepnotes._jsonl import InputFormatError
from sleepnotes.corpus import ClinicalDocument
from sleepnotes.extract import (
    Assertion,
    DocumentLabels,
    Mention,
    aggregate,
    assert_mention,
    extract_mentions,
    label_document,
    read_labels,
    read_mentions,
    segment_sentences,
    write_labels,
    write_mentions,
)
from sleepnotes.rules import CONCEPT_ORDER, ConceptCategory, DurationClass


def _doc(text, doc_id="d1"):
    return ClinicalDocument(doc_id, "p1", "2021-03-04", text)


def _sentences(text):
    return [text[start:end] for start, end in segment_sentences(text)]


class TestSegmentSentences:
    def test_period_splits(self):
        assert _sentences("He snores. She naps.") == ["He snores.", "She naps."]

    def test_question_mark_splits(self):
        text = "Change in social contacts/activities? No"
        assert _sentences(text) == ["Change in social contacts/activities?", "No"]

    def test_newline_splits(self):
        assert _sentences("line one\nline two") == ["line one", "line two"]

    def test_decimal_point_does_not_split(self):
        assert _sentences("Weight 72.5 kg today.") == ["Weight 72.5 kg today."]

    def test_empty_and_whitespace(self):
        assert segment_sentences("") == []
        assert segment_sentences(" \n \n ") == []

    def test_spans_are_trimmed_ordered_non_overlapping(self, default_bundle):
        for doc in default_bundle.documents[:50]:
            spans = segment_sentences(doc.text)
            previous_end = -1
            for start, end in spans:
                assert start > previous_end
                assert end > start
                chunk = doc.text[start:end]
                assert chunk == chunk.strip()
                previous_end = end


class TestAssertMention:
    @pytest.mark.parametrize(
        "cue", ["no", "not", "denies", "denied", "denying", "without", "never"]
    )
    def test_negation_cues(self, cue):
        sentence = f"Patient {cue} snoring."
        offset = sentence.index("snoring")
        assert assert_mention(sentence, offset) is Assertion.NEGATED

    def test_negative_for_phrase(self):
        sentence = "Review negative for insomnia this visit."
        assert assert_mention(sentence, sentence.index("insomnia")) is Assertion.NEGATED

    def test_cue_case_insensitive(self):
        sentence = "DENIES snoring."
        assert assert_mention(sentence, sentence.index("snoring")) is Assertion.NEGATED

    @pytest.mark.parametrize(
        "sentence, mention",
        [
            ("If snoring persists call the clinic.", "snoring"),
            ("Take melatonin for insomnia.", "insomnia"),
            ("Recommend evaluation for snoring.", "snoring"),
            ("Recommended CPAP for sleep apnea.", "sleep apnea"),
            ("Advised journaling about napping habits.", "napping"),
            ("Consider insomnia workup.", "insomnia"),
            ("Screen for daytime sleepiness.", "daytime sleepiness"),
            ("Monitor for snoring overnight.", "snoring"),
            ("High risk of sleep apnea.", "sleep apnea"),
        ],
    )
    def test_hypothetical_cues(self, sentence, mention):
        offset = sentence.index(mention)
        assert assert_mention(sentence, offset) is Assertion.HYPOTHETICAL

    def test_negation_beats_hypothetical(self):
        sentence = "Consider that patient denies snoring."
        assert assert_mention(sentence, sentence.index("snoring")) is Assertion.NEGATED

    def test_window_includes_sixth_token_back(self):
        sentence = "No alpha beta gamma delta epsilon insomnia tonight."
        assert assert_mention(sentence, sentence.index("insomnia")) is Assertion.NEGATED

    def test_window_excludes_seventh_token_back(self):
        sentence = "No alpha beta gamma delta epsilon zeta insomnia tonight."
        assert assert_mention(sentence, sentence.index("insomnia")) is Assertion.POSITIVE

    def test_hypothetical_cue_has_no_window(self):
        sentence = "Consider alpha beta gamma delta epsilon zeta eta theta snoring."
        assert assert_mention(sentence, sentence.index("snoring")) is Assertion.HYPOTHETICAL

    def test_but_terminates_negation(self):
        sentence = "Denies apnea but snoring persists."
        assert assert_mention(sentence, sentence.index("snoring")) is Assertion.POSITIVE

    def test_semicolon_terminates_negation(self):
        sentence = "Denies apnea; snoring noted."
        assert assert_mention(sentence, sentence.index("snoring")) is Assertion.POSITIVE

    def test_mention_at_sentence_start_is_positive(self):
        assert assert_mention("Snoring was denied.", 0) is Assertion.POSITIVE

    def test_cues_after_mention_ignored(self):
        sentence = "Snoring not observed."
        assert assert_mention(sentence, 0) is Assertion.POSITIVE

    def test_cue_inside_mention_not_scanned(self):
        # "no" belongs to the matched span itself, so it is not a prior cue.
        sentence = "Reports no sleep since Tuesday."
        offset = sentence.index("no sleep")
        assert assert_mention(sentence, offset) is Assertion.POSITIVE

    def test_negation_exempt_skips_negation_only(self):
        sentence = "Denies sleeplessness."
        offset = sentence.index("sleeplessness")
        assert assert_mention(sentence, offset) is Assertion.NEGATED
        assert assert_mention(sentence, offset, negation_exempt=True) is Assertion.POSITIVE

    def test_negation_exempt_still_hypothetical(self):
        sentence = "If asked, denies sleeplessness."
        offset = sentence.index("sleeplessness")
        assert assert_mention(sentence, offset) is Assertion.NEGATED
        assert (
            assert_mention(sentence, offset, negation_exempt=True)
            is Assertion.HYPOTHETICAL
        )


class TestExtractMentions:
    def test_simple_positive_mention(self):
        mentions = extract_mentions(_doc("Patient snores loudly."))
        assert len(mentions) == 1
        m = mentions[0]
        assert m.concept is ConceptCategory.SNORING
        assert (m.start, m.end) == (8, 14)
        assert m.matched_text == "snores"
        assert m.sentence_index == 0
        assert m.assertion is Assertion.POSITIVE
        assert m.duration_class is None

    def test_osa_fires_two_concepts(self):
        mentions = extract_mentions(_doc("PMH significant for OSA on BiPAP at home."))
        concepts = [m.concept for m in mentions]
        assert concepts == [ConceptCategory.SNORING, ConceptCategory.SLEEP_PROBLEM]
        assert all(m.assertion is Assertion.POSITIVE for m in mentions)
        assert all(m.matched_text == "OSA" for m in mentions)
        # Same span, so ordering falls back to concept declaration order.
        assert mentions[0].start == mentions[1].start

    def test_substring_never_fires(self):
        assert extract_mentions(_doc("Adjust the dosage as tolerated.")) == []
        assert extract_mentions(_doc("Remarkable recovery, no remaining issues.")) == []

    def test_mentions_sorted_by_start_concept_end(self, default_bundle):
        for doc in default_bundle.documents[:80]:
            mentions = extract_mentions(doc)
            keys = [(m.start, CONCEPT_ORDER[m.concept], m.end) for m in mentions]
            assert keys == sorted(keys)

    def test_spans_index_original_text(self, default_bundle):
        for doc in default_bundle.documents[:80]:
            for m in extract_mentions(doc):
                assert doc.text[m.start : m.end] == m.matched_text
                spans = segment_sentences(doc.text)
                s_start, s_end = spans[m.sentence_index]
                assert s_start <= m.start and m.end <= s_end

    def test_deterministic(self, default_bundle):
        docs = default_bundle.documents[:30]
        first = [extract_mentions(d) for d in docs]
        second = [extract_mentions(d) for d in docs]
        assert first == second

    def test_mention_counted_once_per_sentence(self):
        mentions = extract_mentions(_doc("Snoring at night. Snoring again today."))
        assert len(mentions) == 2
        assert [m.sentence_index for m in mentions] == [0, 1]


class TestDurationMentions:
    @pytest.mark.parametrize(
        "text, expected",
        [
            ("He sleeps less than 5 hours nightly.", DurationClass.SHORT),
            ("She sleeps 4-5 hours on most nights.", DurationClass.SHORT),
            ("He sleeps about 7-8 hours per night.", DurationClass.MEDIUM),
            ("Sleeping 10-12 hours has become typical for her.", DurationClass.LONG),
            ("Reportedly will sleep more than 12 hours on weekends.", DurationClass.LONG),
        ],
    )
    def test_duration_class_assignment(self, text, expected):
        labels = label_document(_doc(text))
        assert labels.sleep_duration is expected

    def test_overlapping_band_prefers_earlier_rule(self):
        # "6-6 hours" is matched by both the short and the medium pattern;
        # the short rule is listed first so it owns the span.
        labels = label_document(_doc("He sleeps 6-6 hours most nights."))
        assert labels.sleep_duration is DurationClass.SHORT

    def test_negated_duration_abstains(self):
        labels = label_document(_doc("Denies sleeping more than 12 hours."))
        assert labels.sleep_duration is None


def _mention(
    concept,
    assertion,
    start=0,
    end=5,
    doc_id="d1",
    duration=None,
):
    return Mention(doc_id, concept, start, end, "x", 0, assertion, duration)


SNO = ConceptCategory.SNORING
PRB = ConceptCategory.SLEEP_PROBLEM
DUR = ConceptCategory.SLEEP_DURATION


class TestAggregate:
    def test_majority_yes(self):
        labels = aggregate(
            "d1",
            [
                _mention(SNO, Assertion.POSITIVE),
                _mention(SNO, Assertion.POSITIVE, start=10, end=15),
                _mention(SNO, Assertion.NEGATED, start=20, end=25),
            ],
        )
        assert labels.snoring is True

    def test_all_negated_is_no(self):
        labels = aggregate(
            "d1",
            [
                _mention(PRB, Assertion.NEGATED),
                _mention(PRB, Assertion.NEGATED, start=10, end=15),
            ],
        )
        assert labels.sleep_problem is False

    def test_tie_with_a_yes_resolves_yes(self):
        labels = aggregate(
            "d1",
            [
                _mention(SNO, Assertion.POSITIVE),
                _mention(SNO, Assertion.NEGATED, start=10, end=15),
            ],
        )
        assert labels.snoring is True

    def test_hypothetical_abstains(self):
        labels = aggregate("d1", [_mention(SNO, Assertion.HYPOTHETICAL)])
        assert labels.snoring is False
        labels = aggregate(
            "d1",
            [
                _mention(SNO, Assertion.HYPOTHETICAL),
                _mention(SNO, Assertion.POSITIVE, start=10, end=15),
            ],
        )
        assert labels.snoring is True

    def test_no_mentions_all_no(self):
        labels = aggregate("d1", [])
        assert labels == DocumentLabels(doc_id="d1")
        assert labels.sleep_duration is None

    def test_duration_majority(self):
        labels = aggregate(
            "d1",
            [
                _mention(DUR, Assertion.POSITIVE, 0, 5, duration=DurationClass.SHORT),
                _mention(DUR, Assertion.POSITIVE, 10, 15, duration=DurationClass.LONG),
                _mention(DUR, Assertion.POSITIVE, 20, 25, duration=DurationClass.LONG),
            ],
        )
        assert labels.sleep_duration is DurationClass.LONG

    def test_duration_tie_breaks_to_earliest(self):
        mentions = [
            _mention(DUR, Assertion.POSITIVE, 30, 35, duration=DurationClass.LONG),
            _mention(DUR, Assertion.POSITIVE, 10, 15, duration=DurationClass.SHORT),
        ]
        for ordering in (mentions, list(reversed(mentions))):
            labels = aggregate("d1", ordering)
            assert labels.sleep_duration is DurationClass.SHORT

    def test_duration_non_positive_abstains(self):
        labels = aggregate(
            "d1",
            [
                _mention(DUR, Assertion.NEGATED, duration=DurationClass.LONG),
                _mention(DUR, Assertion.HYPOTHETICAL, 10, 15, duration=DurationClass.SHORT),
            ],
        )
        assert labels.sleep_duration is None

    def test_doc_id_mismatch_raises(self):
        with pytest.raises(ValueError, match="aggregated under"):
            aggregate("other", [_mention(SNO, Assertion.POSITIVE)])


class TestDocumentLabeling:
    def test_osa_document(self):
        labels = label_document(_doc("PMH significant for OSA on BiPAP at home."))
        assert labels.snoring is True
        assert labels.sleep_problem is True
        assert labels.napping is False
        assert labels.bad_sleep_quality is False
        assert labels.daytime_sleepiness is False
        assert labels.night_wakings is False
        assert labels.sleep_duration is None

    def test_melatonin_instruction_stays_no(self):
        text = (
            "Take Melatonin 5 mg at bedtime every night for 3-4 weeks "
            "for difficulty falling asleep"
        )
        mentions = extract_mentions(_doc(text))
        assert [m.concept for m in mentions] == [ConceptCategory.BAD_SLEEP_QUALITY]
        assert mentions[0].assertion is Assertion.HYPOTHETICAL
        assert label_document(_doc(text)).bad_sleep_quality is False

    def test_tie_vote_resolves_yes(self):
        labels = label_document(
            _doc("Patient denies snoring but wife reports snoring nightly.")
        )
        assert labels.snoring is True

    def test_semicolon_resets_negation(self):
        labels = label_document(_doc("Denies apnea; snoring noted."))
        assert labels.snoring is True

    def test_problem_list_mention_is_positive(self):
        text = (
            "Change in social contacts/activities? No Patient Active Problem List "
            "Diagnosis Primary open angle glaucoma Urge incontinence Backache, "
            "unspecified Pneumonia, organism unspecified Insomnia"
        )
        labels = label_document(_doc(text))
        assert labels.sleep_problem is True

    def test_distant_negation_does_not_reach_mention(self):
        text = (
            "The patient's daughter states that she has not been complaining of "
            "her back pain or of her leg cramps we discussed the fact that she "
            "is doing less and does nap during the day"
        )
        labels = label_document(_doc(text))
        assert labels.napping is True

    @pytest.mark.parametrize(
        "text, concept",
        [
            ("Snoring was reported.", "snoring"),
            ("Napping daily after lunch.", "napping"),
            ("Insomnia has worsened.", "sleep_problem"),
            ("Restless sleep most nights.", "bad_sleep_quality"),
            ("Daytime sleepiness during visits.", "daytime_sleepiness"),
            ("Night wakings after midnight.", "night_wakings"),
        ],
    )
    def test_denies_prefix_flips_every_concept(self, text, concept):
        positive = label_document(_doc(text))
        assert positive.get(ConceptCategory(concept)) is True
        negated = label_document(_doc("Patient denies " + text.lower()))
        assert negated.get(ConceptCategory(concept)) is False


class TestLabelRecords:
    def test_round_trip(self):
        labels = DocumentLabels(
            doc_id="d1",
            snoring=True,
            night_wakings=True,
            sleep_duration=DurationClass.MEDIUM,
        )
        assert DocumentLabels.from_record(labels.as_record()) == labels

    def test_record_shape(self):
        record = DocumentLabels(doc_id="d1").as_record()
        assert record == {
            "doc_id": "d1",
            "snoring": False,
            "napping": False,
            "sleep_problem": False,
            "bad_sleep_quality": False,
            "daytime_sleepiness": False,
            "night_wakings": False,
            "sleep_duration": None,
        }

    def test_non_boolean_rejected(self):
        record = DocumentLabels(doc_id="d1").as_record()
        record["snoring"] = "yes"
        with pytest.raises(InputFormatError, match="snoring must be a boolean"):
            DocumentLabels.from_record(record)

    def test_unknown_duration_rejected(self):
        record = DocumentLabels(doc_id="d1").as_record()
        record["sleep_duration"] = "tiny"
        with pytest.raises(InputFormatError, match="sleep_duration"):
            DocumentLabels.from_record(record)


class TestMentionAndLabelFiles:
    def test_mentions_round_trip(self, tmp_path, default_bundle):
        docs = default_bundle.documents[:40]
        mentions = [m for doc in docs for m in extract_mentions(doc)]
        assert mentions
        path = tmp_path / "mentions.jsonl"
        assert write_mentions(path, mentions) == len(mentions)
        assert read_mentions(path) == mentions

    def test_labels_round_trip(self, tmp_path, default_bundle):
        labels = [label_document(doc) for doc in default_bundle.documents[:40]]
        path = tmp_path / "labels.jsonl"
        assert write_labels(path, labels) == len(labels)
        assert read_labels(path) == labels

    def test_labels_file_line_numbers_in_errors(self, tmp_path):
        path = tmp_path / "labels.jsonl"
        good = DocumentLabels(doc_id="d1").as_record()
        import json

        path.write_text(json.dumps(good) + "\n" + '{"doc_id": "d2"}\n')
        with pytest.raises(InputFormatError) as err:
            read_labels(path)
        assert err.value.line_no == 2
