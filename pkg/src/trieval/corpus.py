"""Data model and file I/O for corpora, instructions, qrels, and runs.

File formats:
  corpus        JSONL, one document per line:
                  {"doc_id": "...", "text": "...", "metadata": {...}?}
  instructions  JSONL: {"instr_id": "...", "text": "..."}
  qrels         TREC: `query_id 0 doc_id relevance`, whitespace-separated
  run           TREC: `query_id Q0 doc_id rank score tag`, scores with
                6 decimal places, strictly decreasing within a query

All types are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

from .errors import IntegrityError, ParseError


@dataclass(frozen=True)
class Document:
    """One corpus item: external id, flattened text, optional metadata."""

    doc_id: str
    text: str
    metadata: Mapping[str, str] | None = None

    def __post_init__(self):
        if not self.doc_id:
            raise IntegrityError("document with empty doc_id")
        if not self.text.strip():
            raise IntegrityError(f"document {self.doc_id!r} has empty text")


@dataclass(frozen=True)
class TaskInstruction:
    """Natural-language description of a retrieval task."""

    instr_id: str
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise IntegrityError(f"instruction {self.instr_id!r} has empty text")


class Corpus:
    """Ordered, id-unique collection of documents."""

    def __init__(self, documents: Sequence[Document]):
        self.documents = tuple(documents)
        self._by_id: dict[str, Document] = {}
        for doc in self.documents:
            if doc.doc_id in self._by_id:
                raise IntegrityError(f"duplicate doc_id {doc.doc_id!r}")
            self._by_id[doc.doc_id] = doc

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._by_id

    def __getitem__(self, doc_id: str) -> Document:
        return self._by_id[doc_id]

    @property
    def doc_ids(self) -> list[str]:
        return [d.doc_id for d in self.documents]


@dataclass(frozen=True)
class QrelEntry:
    query_id: str
    doc_id: str
    relevance: int


class Qrels:
    """TREC relevance judgments with unique (query_id, doc_id) pairs."""

    def __init__(self, entries: Sequence[QrelEntry]):
        self.entries = tuple(entries)
        self._by_query: dict[str, dict[str, int]] = {}
        for e in self.entries:
            if e.relevance < 0:
                raise IntegrityError(
                    f"negative relevance for ({e.query_id}, {e.doc_id})"
                )
            judged = self._by_query.setdefault(e.query_id, {})
            if e.doc_id in judged:
                raise IntegrityError(
                    f"duplicate qrels pair ({e.query_id}, {e.doc_id})"
                )
            judged[e.doc_id] = e.relevance

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, query_id: str) -> bool:
        return query_id in self._by_query

    @property
    def query_ids(self) -> list[str]:
        return list(self._by_query)

    def judgments(self, query_id: str) -> dict[str, int]:
        """All judged (doc_id -> relevance) for a query; empty if unjudged."""
        return dict(self._by_query.get(query_id, {}))

    def relevance(self, query_id: str, doc_id: str) -> int:
        return self._by_query.get(query_id, {}).get(doc_id, 0)

    def relevant_docs(self, query_id: str) -> set[str]:
        return {
            d for d, rel in self._by_query.get(query_id, {}).items() if rel >= 1
        }


@dataclass(frozen=True)
class RunEntry:
    """One ranked result line of a retrieval run."""

    query_id: str
    doc_id: str
    rank: int
    score: float
    tag: str = "trieval"


def load_corpus(path: str) -> Corpus:
    """Load a JSONL corpus, preserving file order."""
    documents: list[Document] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, line_no, f"invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict) or "doc_id" not in obj or "text" not in obj:
                raise ParseError(
                    path, line_no, "expected object with keys 'doc_id' and 'text'"
                )
            doc_id = str(obj["doc_id"])
            if doc_id in seen:
                raise IntegrityError(f"{path}: duplicate doc_id {doc_id!r}")
            seen.add(doc_id)
            metadata = obj.get("metadata")
            if metadata is not None:
                metadata = {str(k): str(v) for k, v in metadata.items()}
            try:
                documents.append(Document(doc_id, str(obj["text"]), metadata))
            except IntegrityError as exc:
                raise ParseError(path, line_no, str(exc)) from exc
    return Corpus(documents)


def load_instructions(path: str) -> dict[str, TaskInstruction]:
    """Load task instructions from JSONL, keyed by instr_id."""
    out: dict[str, TaskInstruction] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, line_no, f"invalid JSON: {exc.msg}") from exc
            if "instr_id" not in obj or "text" not in obj:
                raise ParseError(
                    path, line_no, "expected object with keys 'instr_id' and 'text'"
                )
            instr_id = str(obj["instr_id"])
            if instr_id in out:
                raise IntegrityError(f"{path}: duplicate instr_id {instr_id!r}")
            out[instr_id] = TaskInstruction(instr_id, str(obj["text"]))
    return out


def load_qrels(path: str) -> Qrels:
    """Parse TREC qrels (`query_id 0 doc_id relevance`)."""
    entries: list[QrelEntry] = []
    seen: set[tuple[str, str]] = set()
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ParseError(path, line_no, f"expected 4 fields, got {len(parts)}")
            query_id, _, doc_id, rel_str = parts
            try:
                relevance = int(rel_str)
            except ValueError as exc:
                raise ParseError(
                    path, line_no, f"non-integer relevance {rel_str!r}"
                ) from exc
            if relevance < 0:
                raise ParseError(path, line_no, f"negative relevance {relevance}")
            if (query_id, doc_id) in seen:
                raise IntegrityError(
                    f"{path}: duplicate qrels pair ({query_id}, {doc_id})"
                )
            seen.add((query_id, doc_id))
            entries.append(QrelEntry(query_id, doc_id, relevance))
    return Qrels(entries)


def validate_run(entries: Sequence[RunEntry]) -> None:
    """Reject rank gaps and non-strictly-decreasing scores.

    Each query's entries must be contiguous within the list, ranked
    1..R in order, with strictly decreasing scores.
    """
    finished: set[str] = set()
    current: str | None = None
    prev_rank = 0
    prev_score = 0.0
    for e in entries:
        if e.query_id != current:
            if e.query_id in finished:
                raise IntegrityError(
                    f"entries for query {e.query_id!r} are not contiguous"
                )
            if current is not None:
                finished.add(current)
            current = e.query_id
            prev_rank = 0
        if e.rank != prev_rank + 1:
            raise IntegrityError(
                f"query {e.query_id!r}: rank {e.rank} after rank {prev_rank} (gap)"
            )
        if prev_rank >= 1 and not e.score < prev_score:
            raise IntegrityError(
                f"query {e.query_id!r}: score {e.score} at rank {e.rank} "
                f"not strictly below {prev_score}"
            )
        prev_rank = e.rank
        prev_score = e.score


def write_run(entries: Sequence[RunEntry], path: str) -> None:
    """Write a TREC run file (validates invariants before writing)."""
    validate_run(entries)
    with open(path, "w", encoding="utf-8") as f:
        for e in entries:
            f.write(f"{e.query_id} Q0 {e.doc_id} {e.rank} {e.score:.6f} {e.tag}\n")


def load_run(path: str) -> list[RunEntry]:
    """Parse a TREC run file back into entries."""
    entries: list[RunEntry] = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 6:
                raise ParseError(path, line_no, f"expected 6 fields, got {len(parts)}")
            query_id, _, doc_id, rank_str, score_str, tag = parts
            try:
                rank = int(rank_str)
                score = float(score_str)
            except ValueError as exc:
                raise ParseError(path, line_no, "bad rank or score field") from exc
            entries.append(RunEntry(query_id, doc_id, rank, score, tag))
    validate_run(entries)
    return entries
