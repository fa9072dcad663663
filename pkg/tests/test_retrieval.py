import random
import string

import pytest

from sleepnotes.corpus import ClinicalDocument
from sleepnotes.retrieval import (
    DEFAULT_KEYWORDS,
    KeywordLexicon,
    is_relevant,
    load_lexicon,
    match_keywords,
    retrieve,
    stem,
)

_VOWELS = set("aeiou")


def oracle_stem(token):
    """Reference stemmer: try each suffix in priority order, keep >= 3 chars,
    and undo consonant doubling after ing/ed."""
    for suffix in ["ness", "ing", "es", "ed", "s", "e"]:
        if not token.endswith(suffix):
            continue
        remainder = token[: len(token) - len(suffix)]
        if len(remainder) < 3:
            continue
        if suffix in {"ing", "ed"} and len(remainder) >= 2:
            if remainder[-1] == remainder[-2] and remainder[-1] not in _VOWELS:
                remainder = remainder[:-1]
        return remainder
    return token


def variants_of(keyword):
    """Plausible inflections of a keyword that share its stem."""
    candidates = {
        keyword,
        keyword + "s",
        keyword + "es",
        keyword + "ed",
        keyword + "ing",
        keyword + keyword[-1] + "ing",
        keyword + keyword[-1] + "ed",
    }
    if keyword.endswith("e"):
        candidates.add(keyword[:-1] + "ing")
        candidates.add(keyword[:-1] + "ed")
    return sorted(v for v in candidates if oracle_stem(v) == oracle_stem(keyword))


def _doc(doc_id, text):
    return ClinicalDocument(doc_id, "p1", "2021-03-04", text)


class TestStem:
    def test_worked_examples(self):
        assert stem("snoring") == "snor"
        assert stem("napping") == "nap"
        assert stem("rem") == "rem"
        assert stem("snored") == stem("snore")

    def test_suffix_priority(self):
        assert stem("sleeplessness") == "sleepless"
        assert stem("wheezes") == "wheez"
        assert stem("waked") == "wak"

    def test_doubling_not_collapsed_after_vowel(self):
        assert stem("seeing") == "see"

    def test_doubling_collapsed_after_consonant(self):
        assert stem("stopped") == "stop"
        assert stem("napping") == "nap"

    def test_short_remainder_falls_through_to_next_suffix(self):
        # "ness" would leave under three characters, so only "s" applies.
        assert stem("ness") == "nes"

    def test_no_applicable_suffix(self):
        assert stem("osa") == "osa"
        assert stem("nocturnal") == "nocturnal"

    def test_matches_reference_on_generated_words(self):
        rng = random.Random(11)
        words = set(DEFAULT_KEYWORDS)
        for keyword in DEFAULT_KEYWORDS:
            for suffix in ("", "s", "es", "ed", "ing", "ness", "e"):
                words.add(keyword + suffix)
        for _ in range(1000):
            words.add("".join(rng.choices(string.ascii_lowercase, k=rng.randint(1, 10))))
        for word in sorted(words):
            assert stem(word) == oracle_stem(word), word


class TestLexiconBuild:
    def test_dedup_preserves_first_occurrence_order(self):
        lex = KeywordLexicon.build(["Nap", "sleep", "NAP ", "apnea"])
        assert lex.keywords == ("nap", "sleep", "apnea")
        assert len(lex) == 3

    def test_default_has_all_keywords(self):
        lex = KeywordLexicon.build()
        assert lex.keywords == DEFAULT_KEYWORDS
        assert len(lex) == 27


class TestMatchKeywords:
    def test_negated_text_still_matches(self):
        lex = KeywordLexicon.build()
        matched, tokens = match_keywords("Patient denies wheezing.", lex)
        assert "wheezing" in matched
        assert tokens == 3

    def test_substring_never_matches(self):
        lex = KeywordLexicon.build()
        for text in (
            "Remarkable recovery, no remaining issues.",
            "Adjust the dosage as tolerated.",
            "A snapshot of the chart was attached.",
        ):
            matched, _ = match_keywords(text, lex)
            assert matched == (), text

    def test_matches_sorted(self):
        # Keywords sharing a stem fire together: "nap" also surfaces
        # "napping", "wake" also surfaces "waking".
        lex = KeywordLexicon.build()
        matched, _ = match_keywords("wake nap insomnia", lex)
        assert matched == ("insomnia", "nap", "napping", "wake", "waking")
        assert list(matched) == sorted(matched)

    def test_variant_matches_base_keyword(self):
        lex = KeywordLexicon.build()
        matched, _ = match_keywords("patient snores at night", lex)
        assert "snore" in matched

    def test_case_and_punctuation_invariant(self):
        lex = KeywordLexicon.build()
        a, _ = match_keywords("APNEA!!! observed", lex)
        b, _ = match_keywords("apnea observed", lex)
        assert a == b != ()

    def test_phrase_requires_contiguous_tokens(self):
        lex = KeywordLexicon.build(["sleep apnea"])
        assert match_keywords("Obstructive sleep apnea noted.", lex)[0] == ("sleep apnea",)
        assert match_keywords("sleep was fine; apnea ruled out", lex)[0] == ()

    def test_phrase_matches_through_stemming(self):
        lex = KeywordLexicon.build(["sleep apnea"])
        matched, _ = match_keywords("history of sleeping apneas", lex)
        assert matched == ("sleep apnea",)


class TestRetrieve:
    def test_keeps_input_order_and_filters(self):
        docs = [
            _doc("d3", "Sleep study scheduled."),
            _doc("d1", "Blood pressure stable."),
            _doc("d2", "Denies snoring."),
        ]
        pairs = retrieve(docs)
        assert [doc.doc_id for doc, _ in pairs] == ["d3", "d2"]
        assert all(hit.doc_id == doc.doc_id for doc, hit in pairs)

    def test_empty_corpus(self):
        assert retrieve([]) == []

    def test_is_relevant_none_for_miss(self):
        lex = KeywordLexicon.build()
        assert is_relevant(_doc("d1", "Remarkable dosage snapshot."), lex) is None

    def test_every_default_keyword_retrieves_a_note(self):
        lex = KeywordLexicon.build()
        for keyword in DEFAULT_KEYWORDS:
            doc = _doc("d1", f"Chart mentions {keyword} today.")
            hit = is_relevant(doc, lex)
            assert hit is not None, keyword
            assert keyword in hit.matched_keywords

    def test_every_variant_retrieves_its_keyword(self):
        lex = KeywordLexicon.build()
        for keyword in DEFAULT_KEYWORDS:
            for variant in variants_of(keyword):
                hit = is_relevant(_doc("d1", f"Patient reports {variant} lately."), lex)
                assert hit is not None, variant
                assert keyword in hit.matched_keywords, variant

    def test_retrieval_idempotent(self, default_bundle):
        pairs = retrieve(default_bundle.documents)
        again = retrieve([doc for doc, _ in pairs])
        assert [d.doc_id for d, _ in again] == [d.doc_id for d, _ in pairs]


class TestLoadLexicon:
    def test_comments_and_blanks_skipped(self, tmp_path):
        path = tmp_path / "keywords.txt"
        path.write_text(
            "# sleep vocabulary\n"
            "snore\n"
            "\n"
            "sleep apnea  # phrase entry\n"
            "   \n"
            "NAP\n"
        )
        lex = load_lexicon(path)
        assert lex.keywords == ("snore", "sleep apnea", "nap")
        matched, _ = match_keywords("naps and snoring and sleep apnea", lex)
        assert matched == ("nap", "sleep apnea", "snore")
