"""Figure rendering for evaluation reports.

Renders grouped bar charts of the report metrics to PNG files next to
the CSV output. Uses the Agg backend so it works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import ReportResults
from .rules import BINARY_CONCEPTS

_PANEL_METRICS = ("sensitivity", "specificity", "ppv", "f1_positive")


def render_metric_figures(results: ReportResults, output_dir: str | Path) -> list[Path]:
    """Write metrics.png (four panels) and f1_weighted.png to output_dir.

    Bars are grouped by concept with one series per system. Returns the
    written paths; an empty result set still produces empty axes so the
    caller can rely on the files existing.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    concepts = [concept.value for concept in BINARY_CONCEPTS]
    systems = list(results)

    paths = []
    figure, axes = plt.subplots(2, 2, figsize=(11, 7), sharey=True)
    for axis, metric in zip(axes.flat, _PANEL_METRICS):
        _grouped_bars(axis, results, systems, concepts, metric)
        axis.set_title(metric)
    if systems:
        handles, labels = axes.flat[0].get_legend_handles_labels()
        figure.legend(handles, labels, loc="lower center", ncol=max(1, len(systems)))
    figure.suptitle("Evaluation metrics by concept")
    figure.tight_layout(rect=(0, 0.06, 1, 1))
    panel_path = output_dir / "metrics.png"
    figure.savefig(panel_path, dpi=150)
    plt.close(figure)
    paths.append(panel_path)

    figure, axis = plt.subplots(figsize=(8, 4.5))
    _grouped_bars(axis, results, systems, concepts, "f1_weighted")
    axis.set_title("weighted F1 by concept")
    if systems:
        axis.legend(loc="lower right")
    figure.tight_layout()
    weighted_path = output_dir / "f1_weighted.png"
    figure.savefig(weighted_path, dpi=150)
    plt.close(figure)
    paths.append(weighted_path)
    return paths


def _grouped_bars(axis, results: ReportResults, systems, concepts, metric: str) -> None:
    width = 0.8 / max(1, len(systems))
    for offset, system in enumerate(systems):
        values = [
            getattr(results[system][concept], metric) if concept in results[system] else 0.0
            for concept in concepts
        ]
        positions = [index + offset * width for index in range(len(concepts))]
        axis.bar(positions, values, width=width, label=system)
    centers = [index + 0.4 - width / 2 for index in range(len(concepts))]
    axis.set_xticks(centers)
    axis.set_xticklabels(concepts, rotation=30, ha="right", fontsize=8)
    axis.set_ylim(0.0, 1.05)
