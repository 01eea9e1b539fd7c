"""Docid decoding strategies over a (scorer, trie) pair.

Reverse annealing generates K docids, one per iteration, sampling each
token from the trie-masked softmax at a per-iteration temperature that
follows a normalized sigmoid from 0 up to the configured maximum: the
first docids are effectively argmax picks, later ones grow exploratory.
Every emitted leaf is removed from the session trie so no docid can
repeat.  Greedy-without-replacement and nucleus sampling share the same
emit-and-remove loop; beam search enumerates leaves by total masked
log-probability and needs no removal.

Temperatures at or below EPSILON switch sampling to a deterministic
argmax with lowest-token-id tie-breaking, since softmax at t ~= 0
overflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .corpus import RunEntry
from .errors import ContractError
from .rng import spawn
from .scorer import Scorer, ScorerContext, masked_log_softmax, sequence_logprob
from .trie import DocidTrie
from .vocab import EOS, TokenSeq

EPSILON = 1e-6


def _odd_tanh(z: float) -> float:
    # enforce tanh(-z) == -tanh(z) bitwise regardless of libm
    t = math.tanh(abs(z))
    return math.copysign(t, z) if z != 0 else 0.0


@dataclass(frozen=True)
class TemperatureSchedule:
    """Normalized-sigmoid temperature ramp over K docid emissions.

    temperature(i) = max_temperature
        * (sig(slope*(i/K - midpoint)) - sig(-slope*midpoint))
        / (sig(slope*(1 - midpoint)) - sig(-slope*midpoint))

    so temperature(0) == 0 and temperature(K) == max_temperature.  A
    zero max_temperature degenerates to greedy decoding.
    """

    total_docids: int
    slope: float = 10.0
    midpoint: float = 0.5
    max_temperature: float = 1.0

    def __post_init__(self):
        if self.total_docids < 1:
            raise ValueError("total_docids must be >= 1")
        if self.slope <= 0:
            raise ValueError("slope must be > 0")
        if not 0 < self.midpoint < 1:
            raise ValueError("midpoint must be in (0, 1)")
        if self.max_temperature < 0:
            raise ValueError("max_temperature must be >= 0")

    def _arg(self, i: float) -> float:
        # sigma(x) - sigma(y) == (tanh(x/2) - tanh(y/2)) / 2; the halves
        # cancel in the ratio, so only tanh(arg) values are needed
        return 0.5 * self.slope * (i / self.total_docids - self.midpoint)

    def temperature(self, i: int) -> float:
        if not 0 <= i <= self.total_docids:
            raise ContractError(
                f"iteration {i} outside [0, {self.total_docids}]"
            )
        low = _odd_tanh(self._arg(0))
        high = _odd_tanh(self._arg(self.total_docids))
        at = _odd_tanh(self._arg(i))
        return self.max_temperature * ((at - low) / (high - low))


@dataclass(frozen=True)
class RetrievedDoc:
    doc_id: str
    docid_path: TokenSeq
    logprob: float  # sequence log-probability at temperature 1
    emission_index: int  # 1-based emission order


@dataclass(frozen=True)
class Retrieval:
    """Ordered decoding output for one query."""

    results: tuple[RetrievedDoc, ...]
    decoder: str
    seed: int | None = None

    def __post_init__(self):
        doc_ids = [r.doc_id for r in self.results]
        if len(doc_ids) != len(set(doc_ids)):
            raise ContractError("retrieval contains duplicate doc_ids")
        for pos, r in enumerate(self.results, start=1):
            if r.emission_index != pos:
                raise ContractError("emission indices are not contiguous from 1")


def sample_step(
    scorer: Scorer,
    ctx: ScorerContext,
    trie: DocidTrie,
    t: float,
    rng: np.random.Generator | None,
) -> int:
    """One trie-masked token draw at temperature t (argmax when t <= EPSILON)."""
    candidates = sorted(trie.valid_next(ctx.prefix))
    logits = scorer.logits(ctx, candidates)
    if t <= EPSILON:
        return min(candidates, key=lambda c: (-logits[c], c))
    top = max(logits.values())
    weights = [math.exp((logits[c] - top) / t) for c in candidates]
    return _draw(candidates, weights, rng)


def _draw(
    candidates: Sequence[int], weights: Sequence[float], rng: np.random.Generator
) -> int:
    total = sum(weights)
    u = rng.random() * total
    acc = 0.0
    for token, w in zip(candidates, weights):
        acc += w
        if u < acc:
            return token
    return candidates[-1]


def _nucleus_step(
    scorer: Scorer,
    ctx: ScorerContext,
    trie: DocidTrie,
    top_p: float,
    rng: np.random.Generator,
) -> int:
    """Temperature-1 draw from the smallest candidate set with mass >= top_p."""
    candidates = sorted(trie.valid_next(ctx.prefix))
    log_probs = masked_log_softmax(scorer.logits(ctx, candidates))
    ordered = sorted(candidates, key=lambda c: (-log_probs[c], c))
    kept: list[int] = []
    mass = 0.0
    for token in ordered:
        kept.append(token)
        mass += math.exp(log_probs[token])
        if mass >= top_p:
            break
    weights = [math.exp(log_probs[c]) for c in kept]
    return _draw(kept, weights, rng)


def _decode_leaf(
    scorer: Scorer,
    instr_tokens: TokenSeq,
    query_tokens: TokenSeq,
    session: DocidTrie,
    step: Callable[[ScorerContext], int],
    query_id: str | None,
) -> TokenSeq:
    prefix: TokenSeq = ()
    while True:
        token = step(ScorerContext(instr_tokens, query_tokens, prefix, query_id))
        if token == EOS:
            return prefix + (EOS,)
        prefix = prefix + (token,)


def _emit_with_removal(
    scorer: Scorer,
    instr_tokens: TokenSeq,
    query_tokens: TokenSeq,
    trie: DocidTrie,
    total: int,
    step_for: Callable[[int, DocidTrie], Callable[[ScorerContext], int]],
    decoder: str,
    seed: int | None,
    query_id: str | None,
) -> Retrieval:
    session = trie.session()
    results: list[RetrievedDoc] = []
    for i in range(1, total + 1):
        if session.live_leaf_count == 0:
            break
        path = _decode_leaf(
            scorer, instr_tokens, query_tokens, session, step_for(i, session), query_id
        )
        logprob = sequence_logprob(
            scorer, instr_tokens, query_tokens, path, trie, query_id
        )
        results.append(RetrievedDoc(trie.lookup_doc(path), path, logprob, i))
        session.remove_leaf(path)
    return Retrieval(tuple(results), decoder, seed)


def reverse_annealing(
    scorer: Scorer,
    instr_tokens: TokenSeq,
    query_tokens: TokenSeq,
    trie: DocidTrie,
    schedule: TemperatureSchedule,
    seed: int,
    query_id: str | None = None,
) -> Retrieval:
    """Emit docids at the schedule's rising per-iteration temperature.

    Iteration i samples every token of docid i at fixed temperature
    g(i); the emitted leaf is removed before the next iteration.  The
    random stream is split per (query, emission index).
    """

    def step_for(i: int, session: DocidTrie) -> Callable[[ScorerContext], int]:
        t = schedule.temperature(i)
        rng = spawn(seed, query_id or "", i) if t > EPSILON else None
        return lambda ctx: sample_step(scorer, ctx, session, t, rng)

    return _emit_with_removal(
        scorer,
        instr_tokens,
        query_tokens,
        trie,
        schedule.total_docids,
        step_for,
        "reverse-annealing",
        seed,
        query_id,
    )


def greedy_no_replacement(
    scorer: Scorer,
    instr_tokens: TokenSeq,
    query_tokens: TokenSeq,
    trie: DocidTrie,
    total: int,
    query_id: str | None = None,
) -> Retrieval:
    """Repeated argmax decoding with leaf removal between docids."""

    def step_for(i: int, session: DocidTrie) -> Callable[[ScorerContext], int]:
        return lambda ctx: sample_step(scorer, ctx, session, 0.0, None)

    return _emit_with_removal(
        scorer,
        instr_tokens,
        query_tokens,
        trie,
        total,
        step_for,
        "greedy",
        None,
        query_id,
    )


def nucleus(
    scorer: Scorer,
    instr_tokens: TokenSeq,
    query_tokens: TokenSeq,
    trie: DocidTrie,
    total: int,
    top_p: float,
    seed: int,
    query_id: str | None = None,
) -> Retrieval:
    """Top-p sampling at temperature 1 with leaf removal between docids."""
    if not 0 < top_p <= 1:
        raise ValueError("top_p must be in (0, 1]")

    def step_for(i: int, session: DocidTrie) -> Callable[[ScorerContext], int]:
        rng = spawn(seed, query_id or "", i)
        return lambda ctx: _nucleus_step(scorer, ctx, session, top_p, rng)

    return _emit_with_removal(
        scorer,
        instr_tokens,
        query_tokens,
        trie,
        total,
        step_for,
        "nucleus",
        seed,
        query_id,
    )


def beam(
    scorer: Scorer,
    instr_tokens: TokenSeq,
    query_tokens: TokenSeq,
    trie: DocidTrie,
    total: int,
    width: int,
    query_id: str | None = None,
) -> Retrieval:
    """Constrained beam search; top-K completed leaves by summed log-softmax.

    No length normalization; score ties resolve in lexicographic
    token-id order.  Leaves are collected with set semantics, so no
    removal is needed.
    """
    if width < 1:
        raise ValueError("beam width must be >= 1")
    if trie.live_leaf_count == 0:
        return Retrieval((), "beam", None)
    frontier: list[tuple[float, TokenSeq]] = [(0.0, ())]
    completed: list[tuple[float, TokenSeq]] = []
    while frontier:
        expansions: list[tuple[float, TokenSeq]] = []
        for score, prefix in frontier:
            candidates = trie.valid_next(prefix)
            ctx = ScorerContext(instr_tokens, query_tokens, prefix, query_id)
            log_probs = masked_log_softmax(scorer.logits(ctx, candidates))
            for token in sorted(candidates):
                branch = (score + log_probs[token], prefix + (token,))
                if token == EOS:
                    completed.append(branch)
                else:
                    expansions.append(branch)
        expansions.sort(key=lambda sp: (-sp[0], sp[1]))
        frontier = expansions[:width]
    completed.sort(key=lambda sp: (-sp[0], sp[1]))
    results = tuple(
        RetrievedDoc(trie.lookup_doc(path), path, score, rank)
        for rank, (score, path) in enumerate(completed[:total], start=1)
    )
    return Retrieval(results, "beam", None)


STRATEGIES = ("reverse-annealing", "greedy", "nucleus", "beam")


@dataclass(frozen=True)
class DecoderSpec:
    """A decoding strategy plus every parameter it may need."""

    strategy: str = "reverse-annealing"
    total_docids: int = 100
    slope: float = 10.0
    midpoint: float = 0.5
    max_temperature: float = 1.0
    top_p: float = 0.9
    width: int = 10
    seed: int = 0
    label: str | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(
                f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}"
            )
        if self.total_docids < 1:
            raise ValueError("total_docids must be >= 1")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.width < 1:
            raise ValueError("width must be >= 1")

    def tag(self) -> str:
        return self.label or self.strategy

    def schedule(self) -> TemperatureSchedule:
        return TemperatureSchedule(
            self.total_docids, self.slope, self.midpoint, self.max_temperature
        )


def decode_query(
    spec: DecoderSpec,
    scorer: Scorer,
    trie: DocidTrie,
    instr_tokens: TokenSeq,
    query_tokens: TokenSeq,
    query_id: str | None = None,
) -> Retrieval:
    """Dispatch one query to the configured decoding strategy."""
    if spec.strategy == "reverse-annealing":
        return reverse_annealing(
            scorer, instr_tokens, query_tokens, trie, spec.schedule(), spec.seed, query_id
        )
    if spec.strategy == "greedy":
        return greedy_no_replacement(
            scorer, instr_tokens, query_tokens, trie, spec.total_docids, query_id
        )
    if spec.strategy == "nucleus":
        return nucleus(
            scorer,
            instr_tokens,
            query_tokens,
            trie,
            spec.total_docids,
            spec.top_p,
            spec.seed,
            query_id,
        )
    return beam(
        scorer, instr_tokens, query_tokens, trie, spec.total_docids, spec.width, query_id
    )


def run_entries(
    retrieval: Retrieval,
    query_id: str,
    tag: str | None = None,
    k_requested: int | None = None,
) -> list[RunEntry]:
    """TREC run rows: rank = emission order, score consistent with rank.

    The sequence log-probability is exported as the score when it is
    strictly decreasing at 6-decimal precision; otherwise (sampling
    decoders reorder freely) a rank-derived score K - emission_index is
    used and the log-probability stays in the auxiliary output.
    """
    tag = tag or retrieval.decoder
    k = k_requested if k_requested is not None else len(retrieval.results)
    rounded = [round(r.logprob, 6) for r in retrieval.results]
    monotone = all(a > b for a, b in zip(rounded, rounded[1:]))
    entries = []
    for r in retrieval.results:
        score = r.logprob if monotone else float(k - r.emission_index)
        entries.append(RunEntry(query_id, r.doc_id, r.emission_index, score, tag))
    return entries
