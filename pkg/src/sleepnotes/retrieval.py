"""Keyword retrieval: select the notes worth running extraction over.

Matching is whole-token with a light suffix stemmer on both sides, so
"snored" matches the keyword "snore" but "remarkable" never matches "rem".
Multi-word lexicon entries match as contiguous token sequences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .corpus import ClinicalDocument, tokenize

# Default lexicon: the sleep vocabulary used to pull candidate notes.
DEFAULT_KEYWORDS: tuple[str, ...] = (
    "snore",
    "snoring",
    "wheeze",
    "wheezing",
    "sleep",
    "sleepiness",
    "sleeping",
    "sleepless",
    "sleeplessness",
    "apnea",
    "hypopnea",
    "osa",
    "insomnia",
    "nap",
    "napping",
    "narcolepsy",
    "nocturnal",
    "somnolence",
    "somnolent",
    "dizziness",
    "hypersomnia",
    "rem",
    "nrem",
    "wake",
    "wakefulness",
    "waking",
    "polysomnography",
)

# Suffixes stripped by stem(), longest first. A bare final "e" is stripped
# too so that "snore", "snores", "snored", and "snoring" share one stem.
_SUFFIXES = ("ness", "ing", "es", "ed", "s", "e")
_VOWELS = frozenset("aeiou")
_MIN_STEM = 3


def stem(token: str) -> str:
    """Strip one inflectional suffix from a lowercase token.

    The longest applicable suffix in {ness, ing, es, ed, s, e} is removed
    when at least three characters remain. Stripping "ing" or "ed" also
    collapses a doubled final consonant ("napping" -> "nap"). Tokens with
    no applicable suffix are returned unchanged.
    """
    for suffix in _SUFFIXES:
        if token.endswith(suffix) and len(token) - len(suffix) >= _MIN_STEM:
            stemmed = token[: -len(suffix)]
            if suffix in ("ing", "ed") and len(stemmed) >= 2:
                if stemmed[-1] == stemmed[-2] and stemmed[-1] not in _VOWELS:
                    stemmed = stemmed[:-1]
            return stemmed
    return token


@dataclass(frozen=True)
class KeywordLexicon:
    """An ordered, deduplicated set of lowercase keywords with their stems."""

    keywords: tuple[str, ...]
    # Derived lookups; single-token stems map a stem to the matching
    # keywords, phrases are stored as stem tuples for sequence matching.
    _stem_index: dict[str, tuple[str, ...]] = field(repr=False, default_factory=dict)
    _phrases: tuple[tuple[str, tuple[str, ...]], ...] = field(repr=False, default=())

    @staticmethod
    def build(keywords: Iterable[str] = DEFAULT_KEYWORDS) -> "KeywordLexicon":
        ordered: list[str] = []
        seen = set()
        for raw in keywords:
            keyword = raw.strip().lower()
            if not keyword or keyword in seen:
                continue
            seen.add(keyword)
            ordered.append(keyword)

        stem_index: dict[str, list[str]] = {}
        phrases: list[tuple[str, tuple[str, ...]]] = []
        for keyword in ordered:
            parts = tokenize(keyword)
            if not parts:
                continue
            if len(parts) == 1:
                stem_index.setdefault(stem(parts[0]), []).append(keyword)
            else:
                phrases.append((keyword, tuple(stem(part) for part in parts)))
        return KeywordLexicon(
            tuple(ordered),
            {key: tuple(values) for key, values in stem_index.items()},
            tuple(phrases),
        )

    def __len__(self) -> int:
        return len(self.keywords)


@dataclass(frozen=True)
class RetrievalHit:
    """A document selected by the lexicon and the keywords that fired."""

    doc_id: str
    matched_keywords: tuple[str, ...]
    token_count: int


def match_keywords(text: str, lexicon: KeywordLexicon) -> tuple[tuple[str, ...], int]:
    """Return (matched keywords, token count) for a text under a lexicon."""
    tokens = tokenize(text)
    stems = [stem(token) for token in tokens]
    matched: set[str] = set()
    for token_stem in stems:
        matched.update(lexicon._stem_index.get(token_stem, ()))
    for keyword, phrase in lexicon._phrases:
        width = len(phrase)
        for start in range(len(stems) - width + 1):
            if tuple(stems[start : start + width]) == phrase:
                matched.add(keyword)
                break
    return tuple(sorted(matched)), len(tokens)


def is_relevant(document: ClinicalDocument, lexicon: KeywordLexicon) -> RetrievalHit | None:
    """Return a hit when any lexicon entry matches; None otherwise."""
    matched, token_count = match_keywords(document.text, lexicon)
    if not matched:
        return None
    return RetrievalHit(document.doc_id, matched, token_count)


def retrieve(
    documents: Iterable[ClinicalDocument], lexicon: KeywordLexicon | None = None
) -> list[tuple[ClinicalDocument, RetrievalHit]]:
    """Run is_relevant over a corpus, keeping input order."""
    if lexicon is None:
        lexicon = KeywordLexicon.build()
    pairs = []
    for document in documents:
        hit = is_relevant(document, lexicon)
        if hit is not None:
            pairs.append((document, hit))
    return pairs


def load_lexicon(path: str | Path) -> KeywordLexicon:
    """Load a lexicon file: one keyword per line, '#' starts a comment."""
    keywords = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            entry = line.split("#", 1)[0].strip()
            if entry:
                keywords.append(entry)
    return KeywordLexicon.build(keywords)
