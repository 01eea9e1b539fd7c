"""Figure rendering for evaluation reports.

Figures are written next to the delimited report files.  The PNG
metadata is stripped so repeated runs with identical inputs produce
byte-identical images.
"""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import METRIC_NAMES, MetricReport

_SAVE_OPTS = {"dpi": 150, "metadata": {"Software": None}}
_LABELS = {"acc_at_1": "Acc@1", "ndcg_at_10": "nDCG@10", "recall_at_100": "Recall@100"}


def save_metric_bars(report: MetricReport, path: str, title: str = "Retrieval quality") -> None:
    """Bar chart of the three aggregate metrics for one run."""
    fig, ax = plt.subplots(figsize=(5, 3.2))
    values = [report.mean(m) for m in METRIC_NAMES]
    ax.bar([_LABELS[m] for m in METRIC_NAMES], values, color="#4878a8", width=0.55)
    for x, v in enumerate(values):
        ax.text(x, v + 0.02, f"{v:.3f}", ha="center", fontsize=9)
    ax.set_ylim(0, 1.1)
    ax.set_ylabel("score")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def save_decoder_comparison(
    rows: Sequence[tuple[str, MetricReport]], path: str
) -> None:
    """Grouped bars: one cluster per metric, one bar per decoder."""
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    n = max(len(rows), 1)
    width = 0.8 / n
    for pos, (tag, report) in enumerate(rows):
        offsets = [i + (pos - (n - 1) / 2) * width for i in range(len(METRIC_NAMES))]
        ax.bar(offsets, [report.mean(m) for m in METRIC_NAMES], width=width, label=tag)
    ax.set_xticks(range(len(METRIC_NAMES)))
    ax.set_xticklabels([_LABELS[m] for m in METRIC_NAMES])
    ax.set_ylim(0, 1.1)
    ax.set_ylabel("score")
    ax.set_title("Decoding strategies")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)
