"""Retrieval quality metrics and indexing diagnostics.

Metrics follow the trec_eval conventions: gain 2^rel - 1 for nDCG,
graded judgments, and per-metric skipping of queries that cannot be
scored (no judgments at all for Acc@1, no positive judgment for
nDCG@10 / Recall@100).  Skipped queries are counted, not scored zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import Qrels, RunEntry
from .decoder import DecoderSpec, decode_query, run_entries
from .docid import DocidAssignment
from .errors import ContractError
from .scorer import Scorer
from .trie import DocidTrie
from .vocab import Vocabulary, tokenize

NDCG_CUTOFF = 10
RECALL_CUTOFF = 100

METRIC_NAMES = ("acc_at_1", "ndcg_at_10", "recall_at_100")


@dataclass(frozen=True)
class MetricReport:
    """Mean and per-query metric values for one run."""

    acc_at_1: float
    ndcg_at_10: float
    recall_at_100: float
    per_query: dict[str, dict[str, float]]
    evaluated: dict[str, int]  # queries contributing to each mean
    skipped: dict[str, int]  # queries excluded from each mean

    def mean(self, metric: str) -> float:
        if metric not in METRIC_NAMES:
            raise KeyError(metric)
        return getattr(self, metric)


def _group_run(run: Sequence[RunEntry]) -> dict[str, list[str]]:
    """Ranked doc_ids per query, in run order."""
    grouped: dict[str, list[str]] = {}
    for entry in run:
        grouped.setdefault(entry.query_id, []).append(entry.doc_id)
    return grouped


def _dcg(gains: Iterable[int]) -> float:
    return sum(
        (2**rel - 1) / math.log2(pos + 1)
        for pos, rel in enumerate(gains, start=1)
    )


def evaluate_run(run: Sequence[RunEntry], qrels: Qrels) -> MetricReport:
    """Score a run against qrels on Acc@1, nDCG@10, and Recall@100."""
    grouped = _group_run(run)
    per_query: dict[str, dict[str, float]] = {}
    sums = {m: 0.0 for m in METRIC_NAMES}
    counts = {m: 0 for m in METRIC_NAMES}
    skips = {m: 0 for m in METRIC_NAMES}

    for query_id, ranked in grouped.items():
        judged = qrels.judgments(query_id)
        values: dict[str, float] = {}

        if judged:
            values["acc_at_1"] = 1.0 if judged.get(ranked[0], 0) >= 1 else 0.0
        else:
            skips["acc_at_1"] += 1

        ideal = sorted(judged.values(), reverse=True)[:NDCG_CUTOFF]
        idcg = _dcg(ideal)
        if idcg > 0:
            dcg = _dcg(judged.get(d, 0) for d in ranked[:NDCG_CUTOFF])
            values["ndcg_at_10"] = dcg / idcg
        else:
            skips["ndcg_at_10"] += 1

        relevant = {d for d, rel in judged.items() if rel >= 1}
        if relevant:
            hit = len(relevant & set(ranked[:RECALL_CUTOFF]))
            values["recall_at_100"] = hit / len(relevant)
        else:
            skips["recall_at_100"] += 1

        for metric, value in values.items():
            sums[metric] += value
            counts[metric] += 1
        if values:
            per_query[query_id] = values

    means = {
        m: (sums[m] / counts[m] if counts[m] else 0.0) for m in METRIC_NAMES
    }
    return MetricReport(
        means["acc_at_1"],
        means["ndcg_at_10"],
        means["recall_at_100"],
        per_query,
        counts,
        skips,
    )


def acc_at_1(run: Sequence[RunEntry], qrels: Qrels) -> float:
    """Fraction of judged queries whose rank-1 document is relevant."""
    return evaluate_run(run, qrels).acc_at_1


def ndcg_at_10(run: Sequence[RunEntry], qrels: Qrels) -> float:
    """Mean nDCG@10 over queries with at least one positive judgment."""
    return evaluate_run(run, qrels).ndcg_at_10


def recall_at_100(run: Sequence[RunEntry], qrels: Qrels) -> float:
    """Mean fraction of relevant documents found in the top 100."""
    return evaluate_run(run, qrels).recall_at_100


def conflict_rate(assignment: DocidAssignment) -> float:
    """Raw docid conflict rate before deduplication."""
    return assignment.conflict_rate_before_dedup


@dataclass(frozen=True)
class RetrievalQuery:
    """One evaluation query plus its task instruction text."""

    query_id: str
    text: str
    instr_text: str = ""


def compare_decoders(
    scorer: Scorer,
    trie: DocidTrie,
    vocab: Vocabulary,
    queries: Sequence[RetrievalQuery],
    qrels: Qrels,
    specs: Sequence[DecoderSpec],
) -> list[tuple[str, MetricReport]]:
    """Run each decoder over the same index/scorer and tabulate metrics."""
    tags = [spec.tag() for spec in specs]
    if len(tags) != len(set(tags)):
        raise ContractError(f"decoder tags are not unique: {tags}")
    rows: list[tuple[str, MetricReport]] = []
    for spec in specs:
        entries: list[RunEntry] = []
        for query in queries:
            retrieval = decode_query(
                spec,
                scorer,
                trie,
                vocab.encode(tokenize(query.instr_text)),
                vocab.encode(tokenize(query.text)),
                query.query_id,
            )
            entries.extend(
                run_entries(
                    retrieval, query.query_id, spec.tag(), spec.total_docids
                )
            )
        rows.append((spec.tag(), evaluate_run(entries, qrels)))
    return rows


def comparison_rows(rows: Sequence[tuple[str, MetricReport]]) -> list[dict]:
    """Machine-readable comparison table rows."""
    return [
        {
            "decoder": tag,
            "acc_at_1": report.acc_at_1,
            "ndcg_at_10": report.ndcg_at_10,
            "recall_at_100": report.recall_at_100,
            "evaluated": report.evaluated,
            "skipped": report.skipped,
        }
        for tag, report in rows
    ]


def format_comparison(rows: Sequence[tuple[str, MetricReport]]) -> str:
    """Aligned text table of the decoder comparison."""
    header = ["decoder", "acc@1", "ndcg@10", "recall@100", "queries"]
    table = [header]
    for tag, report in rows:
        table.append(
            [
                tag,
                f"{report.acc_at_1:.4f}",
                f"{report.ndcg_at_10:.4f}",
                f"{report.recall_at_100:.4f}",
                str(max(report.evaluated.values(), default=0)),
            ]
        )
    widths = [max(len(row[col]) for row in table) for col in range(len(header))]
    lines = [
        "  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip()
        for row in table
    ]
    return "\n".join(lines) + "\n"
