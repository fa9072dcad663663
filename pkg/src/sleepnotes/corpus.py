"""Corpus assembly and near-duplicate removal for clinical note collections.

Notes arrive as one record per stored line of text. This module merges the
line records back into whole documents, builds bag-of-words term vectors,
and drops near-duplicate documents (boilerplate copies of the same note)
using cosine similarity over those vectors.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import random
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping

from ._jsonl import InputFormatError, read_records, require_field

logger = logging.getLogger(__name__)

# A token is a maximal run of letters or digits; everything else separates.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

# Term-frequency vector: lowercased token -> count.
TermVector = Mapping[str, int]


@dataclass(frozen=True)
class RawNoteLine:
    """One stored line of a clinical note."""

    doc_id: str
    line_no: int
    patient_id: str
    note_date: str
    text: str


@dataclass(frozen=True)
class ClinicalDocument:
    """A whole note: its lines rejoined in storage order."""

    doc_id: str
    patient_id: str
    note_date: str
    text: str


def tokenize(text: str) -> list[str]:
    """Lowercase and split on any non-alphanumeric character."""
    return _TOKEN_RE.findall(text.lower())


def term_vector(text: str) -> Counter[str]:
    """Term-frequency vector of the lowercased tokens of ``text``."""
    return Counter(tokenize(text))


def cosine_similarity(vec_a: TermVector, vec_b: TermVector) -> float:
    """Cosine similarity of two term vectors; 0.0 if either is empty."""
    if not vec_a or not vec_b:
        return 0.0
    if len(vec_b) < len(vec_a):
        vec_a, vec_b = vec_b, vec_a
    dot = sum(count * vec_b.get(term, 0) for term, count in vec_a.items())
    norm_a = math.sqrt(sum(c * c for c in vec_a.values()))
    norm_b = math.sqrt(sum(c * c for c in vec_b.values()))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return dot / (norm_a * norm_b)


def merge_note_lines(
    lines: Iterable[RawNoteLine],
    on_error: Callable[[str, str], None] | None = None,
) -> list[ClinicalDocument]:
    """Group line records by doc_id and rejoin them into documents.

    Lines are sorted by line_no within a document and joined with newlines.
    The patient_id and note_date are taken from the lowest-numbered line.
    A document whose lines disagree on patient_id is skipped and reported
    through ``on_error`` (default: a warning log); processing continues.

    Returns documents sorted by doc_id.
    """
    if on_error is None:
        on_error = lambda doc_id, message: logger.warning("skipping %s: %s", doc_id, message)

    grouped: dict[str, list[RawNoteLine]] = {}
    for line in lines:
        grouped.setdefault(line.doc_id, []).append(line)

    documents = []
    for doc_id in sorted(grouped):
        records = sorted(grouped[doc_id], key=lambda rec: rec.line_no)
        patient_ids = {rec.patient_id for rec in records}
        if len(patient_ids) > 1:
            on_error(doc_id, f"conflicting patient_id values {sorted(patient_ids)}")
            continue
        first = records[0]
        text = "\n".join(rec.text for rec in records)
        documents.append(ClinicalDocument(doc_id, first.patient_id, first.note_date, text))
    return documents


@dataclass(frozen=True)
class RemovedPair:
    """A near-duplicate removal: which document was dropped and why."""

    removed_id: str
    kept_id: str
    similarity: float


def _removal_pick(seed: int, id_a: str, id_b: str) -> str:
    """Deterministically pick which of a duplicate pair to remove.

    The draw is keyed on the seed and the unordered pair of ids, so the
    outcome does not depend on scan order or on unrelated documents.
    """
    low, high = sorted((id_a, id_b))
    rng = random.Random(f"{seed}|{low}|{high}")
    return low if rng.random() < 0.5 else high


def deduplicate(
    documents: Iterable[ClinicalDocument],
    threshold: float = 0.9,
    seed: int = 0,
) -> tuple[list[ClinicalDocument], list[RemovedPair]]:
    """Remove near-duplicate documents within each patient's notes.

    Only documents sharing a patient_id are compared (duplicate notes are
    copies within one chart; cross-patient comparison would be quadratic in
    the corpus). Documents are scanned in doc_id order; when a pair's cosine
    similarity strictly exceeds ``threshold``, one member is removed, chosen
    by a seeded draw keyed on (seed, pair ids). The kept set never contains
    a pair above the threshold, so a second pass removes nothing.

    Returns (kept documents in doc_id order, removal records in scan order).
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")

    by_patient: dict[str, list[ClinicalDocument]] = {}
    for doc in sorted(documents, key=lambda d: d.doc_id):
        by_patient.setdefault(doc.patient_id, []).append(doc)

    kept_ids = set()
    removed = []
    for patient_id in sorted(by_patient):
        block = by_patient[patient_id]
        vectors = {doc.doc_id: term_vector(doc.text) for doc in block}
        kept_block: list[ClinicalDocument] = []
        for doc in block:
            candidate: ClinicalDocument | None = doc
            while candidate is not None:
                clash = None
                for other in kept_block:
                    sim = cosine_similarity(vectors[candidate.doc_id], vectors[other.doc_id])
                    if sim > threshold:
                        clash = (other, sim)
                        break
                if clash is None:
                    kept_block.append(candidate)
                    candidate = None
                    continue
                other, sim = clash
                loser_id = _removal_pick(seed, candidate.doc_id, other.doc_id)
                if loser_id == candidate.doc_id:
                    removed.append(RemovedPair(candidate.doc_id, other.doc_id, sim))
                    candidate = None
                else:
                    # The previously kept doc loses; the candidate must still
                    # clear the remaining kept docs before it is accepted.
                    kept_block.remove(other)
                    removed.append(RemovedPair(other.doc_id, candidate.doc_id, sim))
        kept_ids.update(doc.doc_id for doc in kept_block)

    kept = [doc for block in by_patient.values() for doc in block if doc.doc_id in kept_ids]
    kept.sort(key=lambda d: d.doc_id)
    return kept, removed


# ---------------------------------------------------------------------------
# File formats


def read_note_lines(path: str | Path) -> list[RawNoteLine]:
    """Read raw note-line records from a JSONL file.

    Each record needs doc_id, patient_id, note_date, and text; line_no
    defaults to 0 so merged-document files can be re-read as input.
    """
    lines = []
    for line_no, record in read_records(path):
        doc_id = require_field(record, "doc_id", path, line_no)
        text = require_field(record, "text", path, line_no)
        patient_id = require_field(record, "patient_id", path, line_no)
        note_date = require_field(record, "note_date", path, line_no)
        seq = record.get("line_no", 0)
        if not isinstance(seq, int):
            raise InputFormatError(path, line_no, "line_no must be an integer")
        if not isinstance(text, str):
            raise InputFormatError(path, line_no, "text must be a string")
        lines.append(RawNoteLine(str(doc_id), seq, str(patient_id), str(note_date), text))
    return lines


def read_documents(path: str | Path) -> list[ClinicalDocument]:
    """Read merged documents from a JSONL file (line records are re-merged)."""
    return merge_note_lines(read_note_lines(path))


def write_documents(path: str | Path, documents: Iterable[ClinicalDocument]) -> int:
    """Write one document per line; returns the count written."""
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for doc in documents:
            record = {
                "doc_id": doc.doc_id,
                "patient_id": doc.patient_id,
                "note_date": doc.note_date,
                "text": doc.text,
            }
            handle.write(json.dumps(record, ensure_ascii=True))
            handle.write("\n")
            count += 1
    return count


def write_removed_pairs(path: str | Path, pairs: Iterable[RemovedPair]) -> int:
    """Write removal records as CSV with similarities at six decimals."""
    count = 0
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["removed_id", "kept_id", "similarity"])
        for pair in pairs:
            writer.writerow([pair.removed_id, pair.kept_id, f"{pair.similarity:.6f}"])
            count += 1
    return count
