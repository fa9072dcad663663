"""Evaluation: confusion counts, the four report metrics, weighted F1,
inter-annotator agreement, and report rendering.

Zero-denominator metrics are defined as 0.0 and flagged rather than
raising, so sparse concepts still produce a full report row.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ._jsonl import InputFormatError, read_records, require_field
from .extract import DocumentLabels
from .rules import BINARY_CONCEPTS, ConceptCategory

SPLITS = ("train", "test")


@dataclass(frozen=True)
class GoldRecord:
    """A document's annotated labels and its train/test assignment."""

    doc_id: str
    split: str
    labels: DocumentLabels

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")


def split_gold(
    records: Sequence[GoldRecord],
    train_fraction: float | None = None,
    seed: int = 0,
) -> tuple[list[GoldRecord], list[GoldRecord]]:
    """Partition gold records into (train, test).

    With ``train_fraction`` set, records are shuffled with the seed and the
    first round(n * fraction) become the train split, overriding any splits
    they carried. With the fraction omitted, the records' own split fields
    are honored verbatim.
    """
    if train_fraction is None:
        train = [record for record in records if record.split == "train"]
        test = [record for record in records if record.split == "test"]
        return train, test
    if not 0.0 <= train_fraction <= 1.0:
        raise ValueError(f"train_fraction must be in [0, 1], got {train_fraction}")
    shuffled = list(records)
    random.Random(seed).shuffle(shuffled)
    n_train = int(round(len(shuffled) * train_fraction))
    train = [GoldRecord(record.doc_id, "train", record.labels) for record in shuffled[:n_train]]
    test = [GoldRecord(record.doc_id, "test", record.labels) for record in shuffled[n_train:]]
    return train, test


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(predictions: Mapping[str, bool], gold: Mapping[str, bool]) -> ConfusionMatrix:
    """Count agreement between predicted and gold boolean labels.

    The two maps must cover exactly the same documents; any difference is
    an alignment bug upstream and is reported with the missing ids.
    """
    missing = sorted(set(gold) - set(predictions))
    extra = sorted(set(predictions) - set(gold))
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing from predictions: {', '.join(missing)}")
        if extra:
            parts.append(f"missing from gold: {', '.join(extra)}")
        raise ValueError("prediction/gold document sets differ; " + "; ".join(parts))
    tp = fp = tn = fn = 0
    for doc_id, truth in gold.items():
        predicted = predictions[doc_id]
        if predicted and truth:
            tp += 1
        elif predicted and not truth:
            fp += 1
        elif not predicted and truth:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)


@dataclass(frozen=True)
class ConceptMetrics:
    """The four report metrics plus support-weighted F1.

    ``undefined`` lists metrics whose denominator was zero; their value
    is reported as 0.0.
    """

    sensitivity: float
    specificity: float
    ppv: float
    f1_positive: float
    f1_weighted: float
    undefined: frozenset[str] = frozenset()


def _ratio(numerator: int, denominator: int, name: str, undefined: set[str]) -> float:
    if denominator == 0:
        undefined.add(name)
        return 0.0
    return numerator / denominator


def metrics(cm: ConfusionMatrix) -> ConceptMetrics:
    """Compute sensitivity, specificity, PPV, F1, and weighted F1."""
    undefined: set[str] = set()
    sensitivity = _ratio(cm.tp, cm.tp + cm.fn, "sensitivity", undefined)
    specificity = _ratio(cm.tn, cm.tn + cm.fp, "specificity", undefined)
    ppv = _ratio(cm.tp, cm.tp + cm.fp, "ppv", undefined)
    f1_positive = _ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn, "f1_positive", undefined)
    # Weighted F1 averages the positive-class and negative-class F1,
    # weighted by true support of each class.
    f1_negative = _ratio(2 * cm.tn, 2 * cm.tn + cm.fn + cm.fp, "f1_negative", undefined)
    support_pos = cm.tp + cm.fn
    support_neg = cm.tn + cm.fp
    if support_pos + support_neg == 0:
        undefined.add("f1_weighted")
        f1_weighted = 0.0
    else:
        f1_weighted = (support_pos * f1_positive + support_neg * f1_negative) / (
            support_pos + support_neg
        )
    undefined.discard("f1_negative")
    return ConceptMetrics(
        sensitivity=sensitivity,
        specificity=specificity,
        ppv=ppv,
        f1_positive=f1_positive,
        f1_weighted=f1_weighted,
        undefined=frozenset(undefined),
    )


@dataclass(frozen=True)
class KappaResult:
    """Cohen's kappa; ``degenerate`` marks the chance-agreement-1 case."""

    value: float
    degenerate: bool = False


def cohens_kappa(annotator_a: Sequence[object], annotator_b: Sequence[object]) -> KappaResult:
    """Chance-corrected agreement between two label sequences.

    kappa = (po - pe) / (1 - pe) with pe from the annotators' marginals.
    When pe == 1 (both annotators constant and equal marginals), kappa is
    1.0 for perfect agreement and 0.0 otherwise, flagged as degenerate.
    """
    if len(annotator_a) != len(annotator_b):
        raise ValueError("annotator sequences differ in length")
    if len(annotator_a) == 0:
        raise ValueError("cannot compute kappa on empty sequences")
    n = len(annotator_a)
    observed = sum(1 for a, b in zip(annotator_a, annotator_b) if a == b) / n
    categories = set(annotator_a) | set(annotator_b)
    expected = 0.0
    for category in categories:
        pa = sum(1 for a in annotator_a if a == category) / n
        pb = sum(1 for b in annotator_b if b == category) / n
        expected += pa * pb
    if expected >= 1.0:
        return KappaResult(1.0 if observed == 1.0 else 0.0, degenerate=True)
    return KappaResult((observed - expected) / (1.0 - expected))


# ---------------------------------------------------------------------------
# Gold file format


def read_gold(path: str | Path) -> list[GoldRecord]:
    """Read gold records: doc_id, split, and a labels object per line."""
    records = []
    for line_no, record in read_records(path):
        doc_id = str(require_field(record, "doc_id", path, line_no))
        split = require_field(record, "split", path, line_no)
        if split not in SPLITS:
            raise InputFormatError(path, line_no, f"split must be one of {SPLITS}, got {split!r}")
        labels_record = require_field(record, "labels", path, line_no)
        if not isinstance(labels_record, dict):
            raise InputFormatError(path, line_no, "labels must be an object")
        labels_record = dict(labels_record)
        labels_record.setdefault("doc_id", doc_id)
        labels = DocumentLabels.from_record(labels_record, path, line_no)
        records.append(GoldRecord(doc_id=doc_id, split=split, labels=labels))
    return records


def write_gold(path: str | Path, records: Iterable[GoldRecord]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            labels = record.labels.as_record()
            labels.pop("doc_id", None)
            payload = {"doc_id": record.doc_id, "split": record.split, "labels": labels}
            handle.write(json.dumps(payload, ensure_ascii=True))
            handle.write("\n")
            count += 1
    return count


# ---------------------------------------------------------------------------
# Reports

# system name -> concept value -> ConceptMetrics
ReportResults = Mapping[str, Mapping[str, ConceptMetrics]]


def evaluate_systems(
    predictions_by_system: Mapping[str, Iterable[DocumentLabels]],
    gold: Sequence[GoldRecord],
) -> dict[str, dict[str, ConceptMetrics]]:
    """Score each system's labels against gold on the six binary concepts."""
    gold_maps = {
        concept.value: {record.doc_id: bool(record.labels.get(concept)) for record in gold}
        for concept in BINARY_CONCEPTS
    }
    results: dict[str, dict[str, ConceptMetrics]] = {}
    for system, labels in predictions_by_system.items():
        by_id = {item.doc_id: item for item in labels}
        missing = [record.doc_id for record in gold if record.doc_id not in by_id]
        if missing:
            raise ValueError(
                f"system {system!r} is missing predictions for: " + ", ".join(sorted(missing))
            )
        results[system] = {}
        for concept in BINARY_CONCEPTS:
            predictions = {
                doc_id: bool(by_id[doc_id].get(concept)) for doc_id in gold_maps[concept.value]
            }
            cm = confusion(predictions, gold_maps[concept.value])
            results[system][concept.value] = metrics(cm)
    return results


def round_half_up(value: float, places: int = 2) -> str:
    """Decimal string with round-half-up, e.g. 0.945 -> '0.95' at 2 places."""
    quantum = Decimal(1).scaleb(-places)
    return str(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def render_text_report(results: ReportResults) -> str:
    """Systems as rows, concepts as columns, 'Sens Spec PPV F1' per cell."""
    concepts = [concept.value for concept in BINARY_CONCEPTS]
    header = ["system"] + concepts
    rows = [header]
    for system, by_concept in results.items():
        row = [system]
        for concept in concepts:
            cell = by_concept.get(concept)
            if cell is None:
                row.append("-")
                continue
            row.append(
                " ".join(
                    round_half_up(value)
                    for value in (cell.sensitivity, cell.specificity, cell.ppv, cell.f1_positive)
                )
            )
        rows.append(row)
    widths = [max(len(row[col]) for row in rows) for col in range(len(header))]
    lines = ["cells: sensitivity specificity ppv f1_positive"]
    for index, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip())
        if index == 0:
            lines.append("  ".join("-" * width for width in widths))
    return "\n".join(lines) + "\n"


def write_csv_report(path: str | Path, results: ReportResults) -> int:
    """Machine-readable counterpart of the text table, one row per cell."""
    count = 0
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            [
                "system",
                "concept",
                "sensitivity",
                "specificity",
                "ppv",
                "f1_positive",
                "f1_weighted",
                "flags",
            ]
        )
        for system, by_concept in results.items():
            for concept in [c.value for c in BINARY_CONCEPTS]:
                cell = by_concept.get(concept)
                if cell is None:
                    continue
                writer.writerow(
                    [
                        system,
                        concept,
                        f"{cell.sensitivity:.6f}",
                        f"{cell.specificity:.6f}",
                        f"{cell.ppv:.6f}",
                        f"{cell.f1_positive:.6f}",
                        f"{cell.f1_weighted:.6f}",
                        ";".join(sorted(cell.undefined)),
                    ]
                )
                count += 1
    return count
