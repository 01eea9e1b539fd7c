"""Instruction-conditioned pseudo-query sampling.

The reference sampler is a seeded template generator: per draw it picks
a style (keyword / question / claim) by hashing (seed, doc_id, j), then
fills the style from the document's top TF terms.  Instructions that
mention code/error/table/conversation shift the style mix toward
keyword queries.  LM-generated queries produced offline load from JSONL
through the same batch type.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterator, Mapping

from .corpus import Corpus, Document, TaskInstruction
from .docid import load_stopwords, ranked_candidate_terms
from .errors import ContractError, DegenerateDocumentError, IntegrityError, ParseError
from .rng import spawn
from .vocab import tokenize

STYLES = ("keyword", "question", "claim")

# (keyword, question, claim) selection weights
BASE_STYLE_WEIGHTS = (0.5, 0.3, 0.2)
MARKED_STYLE_WEIGHTS = (0.8, 0.12, 0.08)
INSTRUCTION_MARKERS = frozenset({"code", "error", "table", "conversation"})

QUESTION_TEMPLATES = (
    "what is {a} in {b}",
    "how does {a} relate to {b}",
    "which {b} uses {a}",
    "why is {a} important for {b}",
)

KEYWORD_POOL_SIZE = 10  # sample from the doc's top-10 terms
CLAIM_MAX_TOKENS = 24

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+|\n+")


@dataclass(frozen=True)
class PseudoQuery:
    doc_id: str
    instr_id: str
    text: str
    style: str | None  # None for externally generated queries
    seed_index: int

    def __post_init__(self):
        if self.style is not None and self.style not in STYLES:
            raise IntegrityError(f"unknown query style {self.style!r}")
        if not tokenize(self.text):
            raise IntegrityError(
                f"pseudo-query for {self.doc_id!r} has no tokens: {self.text!r}"
            )


class QueryBatch:
    """Exactly B pseudo-queries per indexed document."""

    def __init__(self, per_doc: Mapping[str, list[PseudoQuery]]):
        sizes = {len(queries) for queries in per_doc.values()}
        if len(sizes) > 1:
            raise IntegrityError(f"uneven query counts per document: {sorted(sizes)}")
        self.queries_per_doc = sizes.pop() if sizes else 0
        self.per_doc: dict[str, tuple[PseudoQuery, ...]] = {
            doc_id: tuple(queries) for doc_id, queries in per_doc.items()
        }

    def __len__(self) -> int:
        return sum(len(q) for q in self.per_doc.values())

    def __getitem__(self, doc_id: str) -> tuple[PseudoQuery, ...]:
        return self.per_doc[doc_id]

    def __iter__(self) -> Iterator[PseudoQuery]:
        for queries in self.per_doc.values():
            yield from queries

    def dump(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for q in self:
                row = {
                    "doc_id": q.doc_id,
                    "instr_id": q.instr_id,
                    "text": q.text,
                    "j": q.seed_index,
                }
                f.write(json.dumps(row, sort_keys=True) + "\n")


def _style_weights(instr: TaskInstruction) -> tuple[float, float, float]:
    instr_tokens = set(tokenize(instr.text))
    if instr_tokens & INSTRUCTION_MARKERS:
        return MARKED_STYLE_WEIGHTS
    return BASE_STYLE_WEIGHTS


def _best_claim_sentence(doc: Document, scores: Mapping[str, float]) -> str:
    best_text = ""
    best_mass = -1.0
    for sentence in _SENTENCE_SPLIT.split(doc.text):
        tokens = tokenize(sentence)
        if not tokens:
            continue
        mass = sum(scores.get(tok, 0.0) for tok in tokens)
        if mass > best_mass:
            best_mass = mass
            best_text = " ".join(tokens[:CLAIM_MAX_TOKENS])
    return best_text


def generate_queries(
    doc: Document,
    instr: TaskInstruction,
    queries_per_doc: int,
    seed: int,
    stopwords: frozenset[str] | None = None,
) -> list[PseudoQuery]:
    """Deterministic pseudo-queries for one document."""
    if queries_per_doc < 1:
        raise ValueError("queries_per_doc must be >= 1")
    if stopwords is None:
        stopwords = load_stopwords()
    tokens = tokenize(doc.text)
    candidates = ranked_candidate_terms(tokens, stopwords)
    if not candidates:
        raise DegenerateDocumentError(
            f"document {doc.doc_id!r} has no content tokens"
        )
    pool = candidates[:KEYWORD_POOL_SIZE]
    candidate_set = set(candidates)
    tf: dict[str, float] = {}
    for tok in tokens:
        if tok in candidate_set:
            tf[tok] = tf.get(tok, 0.0) + 1.0
    keyword_w, question_w, _ = _style_weights(instr)

    queries: list[PseudoQuery] = []
    for j in range(queries_per_doc):
        rng = spawn(seed, doc.doc_id, j)
        u = rng.random()
        if u < keyword_w:
            style = "keyword"
            want = int(rng.integers(2, 6))
            count = min(want, len(pool))
            picks = rng.choice(len(pool), size=count, replace=False)
            text = " ".join(pool[i] for i in picks)
        elif u < keyword_w + question_w:
            style = "question"
            template = QUESTION_TEMPLATES[int(rng.integers(0, len(QUESTION_TEMPLATES)))]
            first = candidates[0]
            second = candidates[1] if len(candidates) > 1 else candidates[0]
            text = template.format(a=first, b=second)
        else:
            style = "claim"
            text = _best_claim_sentence(doc, tf)
        queries.append(PseudoQuery(doc.doc_id, instr.instr_id, text, style, j))
    return queries


def generate_batch(
    corpus: Corpus,
    instr: TaskInstruction,
    queries_per_doc: int,
    seed: int,
    stopwords: frozenset[str] | None = None,
) -> QueryBatch:
    if stopwords is None:
        stopwords = load_stopwords()
    return QueryBatch(
        {
            doc.doc_id: generate_queries(doc, instr, queries_per_doc, seed, stopwords)
            for doc in corpus
        }
    )


def load_external_queries(path: str, corpus: Corpus | None = None) -> QueryBatch:
    """Load offline-generated pseudo-queries, enforcing B per document."""
    per_doc: dict[str, dict[int, PseudoQuery]] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, line_no, f"invalid JSON: {exc.msg}") from exc
            for key in ("doc_id", "instr_id", "text", "j"):
                if key not in obj:
                    raise ParseError(path, line_no, f"missing key {key!r}")
            doc_id = str(obj["doc_id"])
            j = int(obj["j"])
            slots = per_doc.setdefault(doc_id, {})
            if j in slots:
                raise IntegrityError(f"{path}: duplicate query index {j} for {doc_id!r}")
            slots[j] = PseudoQuery(doc_id, str(obj["instr_id"]), str(obj["text"]), None, j)

    counts = {len(slots) for slots in per_doc.values()}
    if len(counts) > 1:
        raise IntegrityError(
            f"{path}: uneven query counts per document: {sorted(counts)}"
        )
    for doc_id, slots in per_doc.items():
        expected = set(range(len(slots)))
        if set(slots) != expected:
            raise IntegrityError(
                f"{path}: query indices for {doc_id!r} are not 0..{len(slots) - 1}"
            )
    if corpus is not None:
        unknown = [d for d in per_doc if d not in corpus]
        if unknown:
            raise IntegrityError(f"{path}: unknown doc_ids: {', '.join(unknown)}")
        missing = [d for d in corpus.doc_ids if d not in per_doc]
        if missing:
            raise IntegrityError(
                f"{path}: queries missing for documents: {', '.join(missing)}"
            )
    return QueryBatch(
        {doc_id: [slots[j] for j in sorted(slots)] for doc_id, slots in per_doc.items()}
    )


def avg_query_length(batch: QueryBatch) -> float:
    """Mean token count over all queries in the batch."""
    if len(batch) == 0:
        raise ContractError("cannot average over an empty batch")
    lengths = [len(tokenize(q.text)) for q in batch]
    return sum(lengths) / len(lengths)
