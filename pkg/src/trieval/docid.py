"""Keyword docid generation, validation, and deduplication.

The reference generator is extractive: candidate terms are scored by
term frequency times corpus IDF and emitted best-first, which keeps
docids short, keyword-rich, and deterministic.  Model-generated docids
produced offline can be loaded from JSONL instead.

Docid terms are lowercase `[a-z0-9][a-z0-9.#-]*` tokens; the articles
a/an/the are never admitted regardless of the active stopword list.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Iterable, Mapping

from .corpus import Corpus, Document
from .errors import DegenerateDocumentError, IntegrityError, ParseError
from .vocab import tokenize

DEFAULT_DOCID_LENGTH = 8

TERM_RE = re.compile(r"[a-z0-9][a-z0-9.#-]*\Z")
ARTICLES = frozenset({"a", "an", "the"})

DedupPolicy = str  # "error" | "suffix-term" | "suffix-ordinal"


def load_stopwords(path: str | None = None) -> frozenset[str]:
    """Stopword list, one word per line; defaults to the packaged file."""
    if path is None:
        text = (
            resources.files("trieval").joinpath("data/stopwords.txt").read_text("utf-8")
        )
    else:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    return frozenset(w for w in (line.strip() for line in text.splitlines()) if w)


@dataclass(frozen=True)
class Docid:
    """A short keyword term sequence identifying one document."""

    terms: tuple[str, ...]
    doc_id: str

    def __post_init__(self):
        if not self.terms:
            raise IntegrityError(f"empty docid for document {self.doc_id!r}")
        for term in self.terms:
            if not TERM_RE.match(term):
                raise IntegrityError(
                    f"docid term {term!r} for {self.doc_id!r} is not a valid term"
                )
            if term in ARTICLES:
                raise IntegrityError(
                    f"docid for {self.doc_id!r} contains article {term!r}"
                )

    def text(self) -> str:
        return " ".join(self.terms)


def ranked_candidate_terms(
    tokens: Iterable[str],
    stopwords: frozenset[str],
    idf: Mapping[str, float] | None = None,
) -> list[str]:
    """Distinct candidate terms, best first.

    Score is tf * idf (uniform idf when none is given); ties go to the
    term that occurs earlier in the document.
    """
    tf: dict[str, int] = {}
    first_pos: dict[str, int] = {}
    for pos, tok in enumerate(tokens):
        if tok in stopwords or tok in ARTICLES or not TERM_RE.match(tok):
            continue
        tf[tok] = tf.get(tok, 0) + 1
        first_pos.setdefault(tok, pos)
    scored = sorted(
        tf,
        key=lambda t: (-(tf[t] * (idf[t] if idf is not None else 1.0)), first_pos[t]),
    )
    return scored


class TfidfDocidGenerator:
    """Extractive docid source backed by corpus-level IDF statistics."""

    def __init__(
        self,
        corpus: Corpus,
        length: int = DEFAULT_DOCID_LENGTH,
        stopwords: frozenset[str] | None = None,
    ):
        if length < 1:
            raise ValueError("docid length must be >= 1")
        self.length = length
        self.stopwords = load_stopwords() if stopwords is None else stopwords
        n = len(corpus)
        df: dict[str, int] = {}
        for doc in corpus:
            for tok in set(tokenize(doc.text)):
                df[tok] = df.get(tok, 0) + 1
        # ln((n+1)/(df+1)) + 1; unseen terms take df=0
        self.idf: dict[str, float] = {
            t: math.log((n + 1) / (d + 1)) + 1.0 for t, d in df.items()
        }
        self._default_idf = math.log(n + 1) + 1.0

    def ranked_terms(self, doc: Document) -> list[str]:
        """Every candidate term of the document, best first."""
        tokens = tokenize(doc.text)
        idf = {t: self.idf.get(t, self._default_idf) for t in tokens}
        return ranked_candidate_terms(tokens, self.stopwords, idf)

    def generate(self, doc: Document) -> Docid:
        candidates = self.ranked_terms(doc)
        if not candidates:
            raise DegenerateDocumentError(
                f"document {doc.doc_id!r} has no candidate docid terms"
            )
        return Docid(tuple(candidates[: self.length]), doc.doc_id)

    def __call__(self, doc: Document) -> Docid:
        return self.generate(doc)


def generate_docid(
    doc: Document,
    corpus: Corpus,
    length: int = DEFAULT_DOCID_LENGTH,
    stopwords: frozenset[str] | None = None,
) -> Docid:
    """One-off docid for a single document (builds IDF from `corpus`)."""
    return TfidfDocidGenerator(corpus, length, stopwords).generate(doc)


def load_external_docids(
    path: str, corpus: Corpus, length: int = DEFAULT_DOCID_LENGTH
) -> tuple[dict[str, Docid], int]:
    """Load offline-generated docids; returns (mapping, truncation count).

    Every corpus document must be covered.  Docids longer than `length`
    are truncated and counted.
    """
    out: dict[str, Docid] = {}
    truncated = 0
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, line_no, f"invalid JSON: {exc.msg}") from exc
            if "doc_id" not in obj or "docid" not in obj:
                raise ParseError(
                    path, line_no, "expected object with keys 'doc_id' and 'docid'"
                )
            doc_id = str(obj["doc_id"])
            if doc_id not in corpus:
                raise IntegrityError(f"{path}: unknown doc_id {doc_id!r}")
            if doc_id in out:
                raise IntegrityError(f"{path}: duplicate doc_id {doc_id!r}")
            terms = tuple(str(obj["docid"]).split())
            if len(terms) > length:
                terms = terms[:length]
                truncated += 1
            out[doc_id] = Docid(terms, doc_id)
    missing = [d for d in corpus.doc_ids if d not in out]
    if missing:
        raise IntegrityError(
            f"{path}: docids missing for documents: {', '.join(missing)}"
        )
    return out, truncated


@dataclass(frozen=True)
class DocidAssignment:
    """Deduplicated docid per document plus the raw conflict diagnostic."""

    docids: dict[str, Docid]  # corpus order
    conflict_rate_before_dedup: float
    deduped: frozenset[str]  # doc_ids whose docid was modified

    def __post_init__(self):
        seen: dict[tuple[str, ...], str] = {}
        for doc_id, docid in self.docids.items():
            if docid.terms in seen:
                raise IntegrityError(
                    f"docid conflict survived dedup: {doc_id!r} vs {seen[docid.terms]!r}"
                )
            seen[docid.terms] = doc_id

    def dump(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for doc_id, docid in self.docids.items():
                row = {
                    "doc_id": doc_id,
                    "docid": docid.text(),
                    "deduped": doc_id in self.deduped,
                }
                f.write(json.dumps(row, sort_keys=True) + "\n")


def load_assignment(path: str) -> dict[str, Docid]:
    """Read a dumped assignment back as doc_id -> Docid."""
    out: dict[str, Docid] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, line_no, f"invalid JSON: {exc.msg}") from exc
            doc_id = str(obj["doc_id"])
            if doc_id in out:
                raise IntegrityError(f"{path}: duplicate doc_id {doc_id!r}")
            out[doc_id] = Docid(tuple(str(obj["docid"]).split()), doc_id)
    return out


def _conflict_groups(raw: dict[str, Docid]) -> dict[tuple[str, ...], list[str]]:
    groups: dict[tuple[str, ...], list[str]] = {}
    for doc_id, docid in raw.items():
        groups.setdefault(docid.terms, []).append(doc_id)
    return {terms: ids for terms, ids in groups.items() if len(ids) > 1}


def assign_docids(
    corpus: Corpus,
    generator: Callable[[Document], Docid] | Mapping[str, Docid],
    dedup: DedupPolicy = "suffix-term",
) -> DocidAssignment:
    """Generate one docid per document and resolve conflicts.

    Policies: `error` fails on any conflict; `suffix-term` appends the
    document's best unused candidate term (falling back to an ordinal);
    `suffix-ordinal` appends "2", "3", ...  Either suffix may push a
    docid one token past the generator's length cap.
    """
    if dedup not in ("error", "suffix-term", "suffix-ordinal"):
        raise ValueError(f"unknown dedup policy {dedup!r}")

    raw: dict[str, Docid] = {}
    for doc in corpus:
        if callable(generator):
            raw[doc.doc_id] = generator(doc)
        else:
            if doc.doc_id not in generator:
                raise IntegrityError(f"no docid provided for {doc.doc_id!r}")
            raw[doc.doc_id] = generator[doc.doc_id]

    groups = _conflict_groups(raw)
    n = len(corpus)
    conflicted = sum(len(ids) for ids in groups.values())
    conflict_rate = conflicted / n if n else 0.0

    if groups and dedup == "error":
        listing = "; ".join(
            f"[{' '.join(terms)}] <- {', '.join(ids)}" for terms, ids in groups.items()
        )
        raise IntegrityError(f"docid conflicts: {listing}")

    used: set[tuple[str, ...]] = set()
    final: dict[str, Docid] = {}
    deduped: set[str] = set()
    for doc in corpus:
        docid = raw[doc.doc_id]
        if docid.terms not in used:
            used.add(docid.terms)
            final[doc.doc_id] = docid
            continue
        new_terms = None
        if dedup == "suffix-term":
            candidates = (
                generator.ranked_terms(doc)
                if hasattr(generator, "ranked_terms")
                else []
            )
            for term in candidates:
                if term in docid.terms:
                    continue
                trial = docid.terms + (term,)
                if trial not in used:
                    new_terms = trial
                    break
        if new_terms is None:  # suffix-ordinal, or no unused candidate left
            ordinal = 2
            while docid.terms + (str(ordinal),) in used:
                ordinal += 1
            new_terms = docid.terms + (str(ordinal),)
        used.add(new_terms)
        final[doc.doc_id] = Docid(new_terms, doc.doc_id)
        deduped.add(doc.doc_id)

    return DocidAssignment(final, conflict_rate, frozenset(deduped))
