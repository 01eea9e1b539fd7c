"""Shared fixtures: small corpora and a fully fitted index."""

from __future__ import annotations

from dataclasses import dataclass

import pytest

from trieval import (
    Corpus,
    Document,
    DocidTrie,
    LexicalScorer,
    TaskInstruction,
    TrainingPair,
    TfidfDocidGenerator,
    Vocabulary,
    assign_docids,
    build_trie,
    build_vocabulary,
    fit,
    generate_batch,
    load_stopwords,
    tokenize,
)


@dataclass
class FittedIndex:
    corpus: Corpus
    instruction: TaskInstruction
    assignment: object
    vocab: Vocabulary
    trie: DocidTrie
    scorer: LexicalScorer
    batch: object

    def instr_tokens(self):
        return self.vocab.encode(tokenize(self.instruction.text))

    def query_tokens(self, text: str):
        return self.vocab.encode(tokenize(text))


FIVE_DOCS = [
    Document("d1", "binary search tree insertion lookup balanced node"),
    Document("d2", "quick sort partition pivot array recursion swap"),
    Document("d3", "hash map bucket collision chaining probe slot"),
    Document("d4", "graph shortest path priority queue weighted edge"),
    Document("d5", "dynamic programming memoization subproblem optimal substructure"),
]


def random_index(rng, max_docs=12, max_len=4, alphabet=9, alpha=0.3, beta=1.0):
    """Random docid trie plus a lightly trained lexical scorer."""
    from trieval.docid import Docid
    from trieval.scorer import LexicalScorerParams, count_bigrams

    n = int(rng.integers(1, max_docs + 1))
    seen, mapping = set(), {}
    for i in range(n):
        while True:
            length = int(rng.integers(1, max_len + 1))
            terms = tuple(f"w{int(t)}" for t in rng.integers(0, alphabet, length))
            if terms not in seen:
                seen.add(terms)
                mapping[f"d{i}"] = Docid(terms, f"d{i}")
                break
    vocab = build_vocabulary([d.terms for d in mapping.values()], [])
    trie = build_trie(mapping, vocab)
    counts = count_bigrams(
        vocab.encode(mapping[f"d{int(i)}"].terms)
        for i in rng.integers(0, n, size=n * 2)
    )
    params = LexicalScorerParams(counts, alpha, beta, len(vocab))
    scorer = LexicalScorer(params, vocab, frozenset())
    return mapping, vocab, trie, scorer


@pytest.fixture(scope="session")
def stopwords():
    return load_stopwords()


@pytest.fixture(scope="session")
def five_doc_corpus():
    return Corpus(FIVE_DOCS)


@pytest.fixture(scope="session")
def fitted_index(five_doc_corpus, stopwords):
    """Deterministic 5-doc index with a grid-fitted lexical scorer."""
    instruction = TaskInstruction("algo", "retrieve algorithm descriptions")
    generator = TfidfDocidGenerator(five_doc_corpus, stopwords=stopwords)
    assignment = assign_docids(five_doc_corpus, generator)
    batch = generate_batch(five_doc_corpus, instruction, 4, seed=11, stopwords=stopwords)
    vocab = build_vocabulary(
        (assignment.docids[d].terms for d in five_doc_corpus.doc_ids),
        [tokenize(q.text) for q in batch] + [tokenize(instruction.text)],
    )
    trie = build_trie(assignment, vocab)
    train, heldout = [], []
    for doc_id in five_doc_corpus.doc_ids:
        for query in batch[doc_id]:
            pair = TrainingPair(query, assignment.docids[doc_id])
            (heldout if query.seed_index == 3 else train).append(pair)
    params = fit(
        train,
        heldout,
        vocab=vocab,
        trie=trie,
        instructions=instruction,
        stopwords=stopwords,
    )
    scorer = LexicalScorer(params, vocab, stopwords)
    return FittedIndex(
        five_doc_corpus, instruction, assignment, vocab, trie, scorer, batch
    )
