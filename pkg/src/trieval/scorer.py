"""Conditional next-token scorers over the docid vocabulary.

The reference scorer is a smoothed bigram model over docid token
transitions (BOS -> t, t -> t', t -> EOS) plus an additive bonus for
candidates that appear in the query or in the instruction's content
words:

    logit(v) = ln P_bigram(v | prev) + beta * 1[v in bonus set]

P_bigram is add-alpha smoothed over the full vocabulary, so every
logit is finite.  (alpha, beta) are chosen by minimizing mean held-out
cross-entropy of the true docids, with probabilities masked to the
trie's valid continuations and renormalized.

A table-backed scorer reads per-(query, prefix) logits from JSONL and
makes decoder behavior exactly testable; an LM-backed adapter would
implement the same `logits(ctx, candidates)` surface.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Protocol, Sequence

from .corpus import TaskInstruction
from .docid import Docid, load_stopwords
from .errors import ContractError, IntegrityError, ParseError
from .querygen import PseudoQuery
from .trie import DocidTrie
from .vocab import BOS, EOS, TokenSeq, Vocabulary, tokenize

DEFAULT_ALPHA_GRID = (0.01, 0.1, 1.0)
DEFAULT_BETA_GRID = (0.0, 0.5, 1.0, 2.0, 4.0)


@dataclass(frozen=True)
class ScorerContext:
    """Everything a scorer may condition on at one decoding step."""

    instr_tokens: TokenSeq
    query_tokens: TokenSeq
    prefix: TokenSeq  # docid tokens decoded so far, no EOS
    query_id: str | None = None

    def __post_init__(self):
        if EOS in self.prefix:
            raise ContractError("scorer prefix may not contain EOS")


@dataclass(frozen=True)
class TrainingPair:
    query: PseudoQuery
    docid: Docid


class Scorer(Protocol):
    def logits(
        self, ctx: ScorerContext, candidates: Iterable[int]
    ) -> dict[int, float]: ...


@dataclass
class LexicalScorerParams:
    """Fitted bigram counts and smoothing/bonus hyperparameters."""

    counts: dict[int, dict[int, int]]  # prev token id -> next token id -> count
    alpha: float
    beta: float
    vocab_size: int
    fit_on_training: bool = False  # held-out set was empty

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        for row in self.counts.values():
            if any(c < 0 for c in row.values()):
                raise IntegrityError("negative bigram count")

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            meta = {
                "type": "meta",
                "alpha": self.alpha,
                "beta": self.beta,
                "vocab_size": self.vocab_size,
                "fit_on_training": self.fit_on_training,
            }
            f.write(json.dumps(meta, sort_keys=True) + "\n")
            for prev in sorted(self.counts):
                for nxt in sorted(self.counts[prev]):
                    row = {
                        "type": "bigram",
                        "prev": prev,
                        "next": nxt,
                        "count": self.counts[prev][nxt],
                    }
                    f.write(json.dumps(row, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str) -> "LexicalScorerParams":
        meta = None
        counts: dict[int, dict[int, int]] = {}
        with open(path, "r", encoding="utf-8") as f:
            for line_no, raw in enumerate(f, start=1):
                line = raw.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(path, line_no, f"invalid JSON: {exc.msg}") from exc
                if obj.get("type") == "meta":
                    meta = obj
                elif obj.get("type") == "bigram":
                    counts.setdefault(int(obj["prev"]), {})[int(obj["next"])] = int(
                        obj["count"]
                    )
                else:
                    raise ParseError(path, line_no, f"unknown row type {obj.get('type')!r}")
        if meta is None:
            raise IntegrityError(f"{path}: missing meta row")
        return cls(
            counts,
            float(meta["alpha"]),
            float(meta["beta"]),
            int(meta["vocab_size"]),
            bool(meta.get("fit_on_training", False)),
        )


def count_bigrams(
    docid_paths: Iterable[TokenSeq], counts: dict[int, dict[int, int]] | None = None
) -> dict[int, dict[int, int]]:
    """Accumulate BOS->t, t->t', t->EOS transition counts."""
    if counts is None:
        counts = {}
    for ids in docid_paths:
        prev = BOS
        for token in tuple(ids) + (EOS,):
            row = counts.setdefault(prev, {})
            row[token] = row.get(token, 0) + 1
            prev = token
    return counts


class LexicalScorer:
    """Bigram prior plus query/instruction overlap bonus."""

    def __init__(
        self,
        params: LexicalScorerParams,
        vocab: Vocabulary,
        stopwords: frozenset[str] | None = None,
    ):
        self.params = params
        self.vocab = vocab
        self.stopwords = load_stopwords() if stopwords is None else stopwords
        self._totals = {p: sum(row.values()) for p, row in params.counts.items()}
        self._instr_content: dict[TokenSeq, frozenset[int]] = {}

    def _bonus_ids(self, ctx: ScorerContext) -> frozenset[int]:
        content = self._instr_content.get(ctx.instr_tokens)
        if content is None:
            content = frozenset(
                t
                for t in ctx.instr_tokens
                if self.vocab.token_of(t) not in self.stopwords
            )
            self._instr_content[ctx.instr_tokens] = content
        return content | frozenset(ctx.query_tokens)

    def logits(
        self, ctx: ScorerContext, candidates: Iterable[int]
    ) -> dict[int, float]:
        prev = ctx.prefix[-1] if ctx.prefix else BOS
        row = self.params.counts.get(prev, {})
        total = self._totals.get(prev, 0)
        alpha = self.params.alpha
        denom = total + alpha * self.params.vocab_size
        bonus = self._bonus_ids(ctx)
        beta = self.params.beta
        return {
            v: math.log((row.get(v, 0) + alpha) / denom) + (beta if v in bonus else 0.0)
            for v in candidates
        }


def masked_log_softmax(logits: Mapping[int, float]) -> dict[int, float]:
    """Log-softmax over exactly the given candidates (max-stabilized).

    Computed on max-relative values so a uniform logit shift cannot
    change the result even at the bit level.
    """
    top = max(logits.values())
    log_z = math.log(sum(math.exp(v - top) for v in logits.values()))
    return {t: (v - top) - log_z for t, v in logits.items()}


def sequence_logprob(
    scorer: Scorer,
    instr_tokens: TokenSeq,
    query_tokens: TokenSeq,
    docid_path: TokenSeq,
    trie: DocidTrie,
    query_id: str | None = None,
) -> float:
    """Sum of per-step masked log-softmax values along a leaf path."""
    docid_path = tuple(docid_path)
    trie.lookup_doc(docid_path)  # precondition: must be a leaf
    total = 0.0
    prefix: TokenSeq = ()
    for token in docid_path:
        candidates = trie.valid_next(prefix)
        if token not in candidates:
            raise ContractError(f"token {token} not reachable from prefix {prefix}")
        ctx = ScorerContext(instr_tokens, query_tokens, prefix, query_id)
        log_probs = masked_log_softmax(scorer.logits(ctx, candidates))
        total += log_probs[token]
        if token == EOS:
            break
        prefix = prefix + (token,)
    return total


def _instruction_text(
    instructions: Mapping[str, TaskInstruction] | TaskInstruction | None,
    instr_id: str,
) -> str:
    if instructions is None:
        return ""
    if isinstance(instructions, TaskInstruction):
        return instructions.text
    instr = instructions.get(instr_id)
    return instr.text if instr is not None else ""


def fit(
    pairs: Sequence[TrainingPair],
    heldout: Sequence[TrainingPair],
    alpha_grid: Sequence[float] = DEFAULT_ALPHA_GRID,
    beta_grid: Sequence[float] = DEFAULT_BETA_GRID,
    *,
    vocab: Vocabulary,
    trie: DocidTrie,
    instructions: Mapping[str, TaskInstruction] | TaskInstruction | None = None,
    stopwords: frozenset[str] | None = None,
) -> LexicalScorerParams:
    """Count bigrams, then pick (alpha, beta) by held-out cross-entropy.

    With no held-out pairs the training pairs are scored instead and
    the result is flagged.  Grid ties resolve toward the smaller
    (alpha, beta).
    """
    if not pairs:
        raise ContractError("fit requires at least one training pair")
    counts = count_bigrams(vocab.encode(p.docid.terms) for p in pairs)

    eval_pairs = list(heldout)
    fit_on_training = not eval_pairs
    if fit_on_training:
        eval_pairs = list(pairs)

    encoded = [
        (
            vocab.encode(tokenize(_instruction_text(instructions, p.query.instr_id))),
            vocab.encode(tokenize(p.query.text)),
            vocab.encode(p.docid.terms) + (EOS,),
        )
        for p in eval_pairs
    ]

    best: tuple[float, float] | None = None
    best_ce = math.inf
    for alpha in sorted(alpha_grid):
        for beta in sorted(beta_grid):
            params = LexicalScorerParams(counts, alpha, beta, len(vocab))
            scorer = LexicalScorer(params, vocab, stopwords)
            total = 0.0
            for instr_toks, query_toks, path in encoded:
                total -= sequence_logprob(scorer, instr_toks, query_toks, path, trie)
            ce = total / len(encoded)
            if ce < best_ce:
                best_ce = ce
                best = (alpha, beta)
    assert best is not None
    return LexicalScorerParams(counts, best[0], best[1], len(vocab), fit_on_training)


class TableScorer:
    """Deterministic test double reading logits from a lookup table.

    Rows: {"query_id": ..., "prefix": "t1 t2", "logits": {token: value}}.
    Prefixes and logit keys are token strings; an unlisted (query,
    prefix) pair, or an unlisted candidate within a listed row, scores
    0.0 (uniform after softmax).
    """

    def __init__(
        self,
        rows: Mapping[tuple[str | None, str], Mapping[str, float]],
        vocab: Vocabulary,
    ):
        self.rows = {key: dict(val) for key, val in rows.items()}
        self.vocab = vocab

    @classmethod
    def load(cls, path: str, vocab: Vocabulary) -> "TableScorer":
        rows: dict[tuple[str | None, str], dict[str, float]] = {}
        with open(path, "r", encoding="utf-8") as f:
            for line_no, raw in enumerate(f, start=1):
                line = raw.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(path, line_no, f"invalid JSON: {exc.msg}") from exc
                for key in ("query_id", "prefix", "logits"):
                    if key not in obj:
                        raise ParseError(path, line_no, f"missing key {key!r}")
                rows[(obj["query_id"], str(obj["prefix"]))] = {
                    str(t): float(v) for t, v in obj["logits"].items()
                }
        return cls(rows, vocab)

    def dump(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for (query_id, prefix), logits in sorted(
                self.rows.items(), key=lambda kv: (str(kv[0][0]), kv[0][1])
            ):
                row = {"query_id": query_id, "prefix": prefix, "logits": logits}
                f.write(json.dumps(row, sort_keys=True) + "\n")

    def logits(
        self, ctx: ScorerContext, candidates: Iterable[int]
    ) -> dict[int, float]:
        prefix_text = " ".join(self.vocab.token_of(t) for t in ctx.prefix)
        row = self.rows.get((ctx.query_id, prefix_text), {})
        return {v: row.get(self.vocab.token_of(v), 0.0) for v in candidates}
