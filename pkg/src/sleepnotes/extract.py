"""Mention extraction and document labeling.

Documents are segmented into sentences, every rule is run over every
sentence, and each resulting mention is asserted as positive, negated,
or hypothetical from nearby cue words. Document labels are then a
majority vote of the mentions: positive mentions vote yes, negated
mentions vote no, hypothetical mentions abstain.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from ._jsonl import InputFormatError, read_records, require_field
from .corpus import ClinicalDocument
from .rules import (
    BINARY_CONCEPTS,
    CONCEPT_ORDER,
    ConceptCategory,
    DurationClass,
    RuleSet,
    default_ruleset,
)


class Assertion(Enum):
    """How a mention is asserted in its sentence."""

    POSITIVE = "positive"
    NEGATED = "negated"
    HYPOTHETICAL = "hypothetical"


@dataclass(frozen=True)
class Mention:
    """One rule match, located in the original document text."""

    doc_id: str
    concept: ConceptCategory
    start: int
    end: int
    matched_text: str
    sentence_index: int
    assertion: Assertion
    duration_class: DurationClass | None = None


_SENTENCE_END = frozenset(".?!")


def segment_sentences(text: str) -> list[tuple[int, int]]:
    """Split text into sentence spans over the original string.

    A sentence ends after '.', '?', or '!' followed by whitespace, and at
    every newline. Spans exclude surrounding whitespace and are never
    empty, so they partition the non-whitespace content in order.
    """
    spans: list[tuple[int, int]] = []
    length = len(text)
    start = 0
    position = 0
    while position < length:
        ch = text[position]
        if ch == "\n":
            _append_span(spans, text, start, position)
            start = position + 1
        elif ch in _SENTENCE_END and (position + 1 == length or text[position + 1].isspace()):
            _append_span(spans, text, start, position + 1)
            start = position + 1
        position += 1
    _append_span(spans, text, start, length)
    return spans


def _append_span(spans: list[tuple[int, int]], text: str, start: int, end: int) -> None:
    while start < end and text[start].isspace():
        start += 1
    while end > start and text[end - 1].isspace():
        end -= 1
    if end > start:
        spans.append((start, end))


# Cue vocabularies for assertion. Multi-word cues are token sequences.
NEGATION_CUES = frozenset({"no", "not", "denies", "denied", "denying", "without", "never"})
NEGATION_CUE_PHRASES = (("negative", "for"),)
HYPOTHETICAL_CUES = frozenset(
    {"if", "take", "recommend", "recommended", "advised", "consider", "screen"}
)
HYPOTHETICAL_CUE_PHRASES = (("monitor", "for"), ("risk", "of"))
SCOPE_TERMINATORS = frozenset({"but", ";"})
NEGATION_WINDOW = 6

# Assertion looks at word tokens plus ';', which terminates negation scope.
_CUE_TOKEN_RE = re.compile(r"[^\W_]+|;", re.UNICODE)


def assert_mention(sentence: str, mention_offset: int, negation_exempt: bool = False) -> Assertion:
    """Classify the assertion of a mention starting at ``mention_offset``.

    Negated: a negation cue sits within the six tokens immediately before
    the mention and no scope terminator ("but" or ";") intervenes.
    Hypothetical: a hypothetical cue appears anywhere earlier in the
    sentence. Otherwise positive. Cues inside the mention itself never
    count because only the text before the mention is scanned.
    """
    tokens = [
        (match.group().lower(), match.start())
        for match in _CUE_TOKEN_RE.finditer(sentence, 0, mention_offset)
    ]

    if not negation_exempt and _has_negation_cue(tokens):
        return Assertion.NEGATED
    if _has_hypothetical_cue(tokens):
        return Assertion.HYPOTHETICAL
    return Assertion.POSITIVE


def _has_negation_cue(tokens: list[tuple[str, int]]) -> bool:
    window_start = max(0, len(tokens) - NEGATION_WINDOW)
    cue_ends = []
    for index in range(window_start, len(tokens)):
        token = tokens[index][0]
        if token in NEGATION_CUES:
            cue_ends.append(index)
        for phrase in NEGATION_CUE_PHRASES:
            width = len(phrase)
            if index + width <= len(tokens) and all(
                tokens[index + offset][0] == phrase[offset] for offset in range(width)
            ):
                cue_ends.append(index + width - 1)
    for cue_end in cue_ends:
        trailing = [tokens[position][0] for position in range(cue_end + 1, len(tokens))]
        if not any(word in SCOPE_TERMINATORS for word in trailing):
            return True
    return False


def _has_hypothetical_cue(tokens: list[tuple[str, int]]) -> bool:
    words = [token for token, _ in tokens]
    if any(word in HYPOTHETICAL_CUES for word in words):
        return True
    for phrase in HYPOTHETICAL_CUE_PHRASES:
        width = len(phrase)
        for start in range(len(words) - width + 1):
            if tuple(words[start : start + width]) == phrase:
                return True
    return False


def extract_mentions(document: ClinicalDocument, ruleset: RuleSet | None = None) -> list[Mention]:
    """Run every rule over every sentence of a document.

    Matches are found per rule without overlap; identical (concept, span)
    matches from later rules are dropped, so rule order settles which
    duration class owns a shared span. Mentions are returned ordered by
    (start, concept, end).
    """
    if ruleset is None:
        ruleset = default_ruleset()
    text = document.text
    mentions: list[Mention] = []
    seen: set[tuple[ConceptCategory, int, int]] = set()
    for sentence_index, (s_start, s_end) in enumerate(segment_sentences(text)):
        sentence = text[s_start:s_end]
        for compiled in ruleset:
            for match in compiled.regex.finditer(sentence):
                if match.start() == match.end():
                    continue
                start = s_start + match.start()
                end = s_start + match.end()
                key = (compiled.concept, start, end)
                if key in seen:
                    continue
                seen.add(key)
                assertion = assert_mention(sentence, match.start(), compiled.negation_exempt)
                mentions.append(
                    Mention(
                        doc_id=document.doc_id,
                        concept=compiled.concept,
                        start=start,
                        end=end,
                        matched_text=text[start:end],
                        sentence_index=sentence_index,
                        assertion=assertion,
                        duration_class=compiled.duration_class,
                    )
                )
    mentions.sort(key=lambda m: (m.start, CONCEPT_ORDER[m.concept], m.end))
    return mentions


@dataclass(frozen=True)
class DocumentLabels:
    """Document-level answers for every concept."""

    doc_id: str
    snoring: bool = False
    napping: bool = False
    sleep_problem: bool = False
    bad_sleep_quality: bool = False
    daytime_sleepiness: bool = False
    night_wakings: bool = False
    sleep_duration: DurationClass | None = None

    def get(self, concept: ConceptCategory) -> bool | DurationClass | None:
        return getattr(self, concept.value)

    def as_record(self) -> dict[str, object]:
        record: dict[str, object] = {"doc_id": self.doc_id}
        for concept in BINARY_CONCEPTS:
            record[concept.value] = getattr(self, concept.value)
        record["sleep_duration"] = self.sleep_duration.value if self.sleep_duration else None
        return record

    @staticmethod
    def from_record(record: dict[str, object], path: str | Path = "<memory>", line_no: int = 0) -> "DocumentLabels":
        doc_id = require_field(record, "doc_id", path, line_no)
        values: dict[str, object] = {}
        for concept in BINARY_CONCEPTS:
            value = require_field(record, concept.value, path, line_no)
            if not isinstance(value, bool):
                raise InputFormatError(path, line_no, f"{concept.value} must be a boolean")
            values[concept.value] = value
        duration_raw = record.get("sleep_duration")
        duration = None
        if duration_raw is not None:
            try:
                duration = DurationClass(duration_raw)
            except ValueError:
                raise InputFormatError(
                    path, line_no, f"unknown sleep_duration {duration_raw!r}"
                ) from None
        return DocumentLabels(doc_id=str(doc_id), sleep_duration=duration, **values)  # type: ignore[arg-type]


def aggregate(doc_id: str, mentions: Iterable[Mention]) -> DocumentLabels:
    """Majority-vote mentions into document labels.

    For each binary concept, positive mentions vote yes and negated
    mentions vote no; ties with at least one yes vote resolve to yes
    (a positive statement outweighs an equivocal chart). No votes at all
    means no. Sleep duration takes the majority class among positive
    duration mentions, breaking ties toward the earliest mention.
    """
    yes_votes = {concept: 0 for concept in BINARY_CONCEPTS}
    no_votes = {concept: 0 for concept in BINARY_CONCEPTS}
    duration_mentions: list[Mention] = []
    for mention in mentions:
        if mention.doc_id != doc_id:
            raise ValueError(f"mention for {mention.doc_id!r} aggregated under {doc_id!r}")
        if mention.concept is ConceptCategory.SLEEP_DURATION:
            if mention.assertion is Assertion.POSITIVE:
                duration_mentions.append(mention)
            continue
        if mention.assertion is Assertion.POSITIVE:
            yes_votes[mention.concept] += 1
        elif mention.assertion is Assertion.NEGATED:
            no_votes[mention.concept] += 1

    values = {
        concept.value: yes_votes[concept] >= 1 and yes_votes[concept] >= no_votes[concept]
        for concept in BINARY_CONCEPTS
    }

    duration = None
    if duration_mentions:
        counts: dict[DurationClass, int] = {}
        for mention in duration_mentions:
            assert mention.duration_class is not None
            counts[mention.duration_class] = counts.get(mention.duration_class, 0) + 1
        best = max(counts.values())
        tied = {cls for cls, count in counts.items() if count == best}
        for mention in sorted(duration_mentions, key=lambda m: (m.start, m.end)):
            if mention.duration_class in tied:
                duration = mention.duration_class
                break

    return DocumentLabels(doc_id=doc_id, sleep_duration=duration, **values)  # type: ignore[arg-type]


def label_document(document: ClinicalDocument, ruleset: RuleSet | None = None) -> DocumentLabels:
    """Extract and aggregate in one step."""
    return aggregate(document.doc_id, extract_mentions(document, ruleset))


# ---------------------------------------------------------------------------
# File formats


def write_mentions(path: str | Path, mentions: Iterable[Mention]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for mention in mentions:
            record = {
                "doc_id": mention.doc_id,
                "concept": mention.concept.value,
                "start": mention.start,
                "end": mention.end,
                "matched_text": mention.matched_text,
                "sentence_index": mention.sentence_index,
                "assertion": mention.assertion.value,
                "duration_class": mention.duration_class.value if mention.duration_class else None,
            }
            handle.write(json.dumps(record, ensure_ascii=True))
            handle.write("\n")
            count += 1
    return count


def read_mentions(path: str | Path) -> list[Mention]:
    mentions = []
    for line_no, record in read_records(path):
        try:
            concept = ConceptCategory(require_field(record, "concept", path, line_no))
            assertion = Assertion(require_field(record, "assertion", path, line_no))
        except ValueError as exc:
            raise InputFormatError(path, line_no, str(exc)) from None
        duration_raw = record.get("duration_class")
        duration = DurationClass(duration_raw) if duration_raw is not None else None
        mentions.append(
            Mention(
                doc_id=str(require_field(record, "doc_id", path, line_no)),
                concept=concept,
                start=int(require_field(record, "start", path, line_no)),
                end=int(require_field(record, "end", path, line_no)),
                matched_text=str(require_field(record, "matched_text", path, line_no)),
                sentence_index=int(require_field(record, "sentence_index", path, line_no)),
                assertion=assertion,
                duration_class=duration,
            )
        )
    return mentions


def write_labels(path: str | Path, labels: Iterable[DocumentLabels]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for item in labels:
            handle.write(json.dumps(item.as_record(), ensure_ascii=True))
            handle.write("\n")
            count += 1
    return count


def read_labels(path: str | Path) -> list[DocumentLabels]:
    return [
        DocumentLabels.from_record(record, path, line_no) for line_no, record in read_records(path)
    ]
