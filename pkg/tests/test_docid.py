"""Docid generation, dedup policies, and conflict accounting."""

import json
import math
from collections import Counter

import pytest

from trieval import (
    Corpus,
    DegenerateDocumentError,
    Docid,
    Document,
    IntegrityError,
    TfidfDocidGenerator,
    assign_docids,
    generate_docid,
    load_external_docids,
    load_stopwords,
)
from trieval.docid import ARTICLES, TERM_RE
from trieval.rng import spawn
from trieval.vocab import tokenize

STOPWORDS = load_stopwords()


def oracle_ranking(text, corpus_texts, limit=8):
    """Brute-force tf*idf ranking with first-occurrence tie-break."""
    n = len(corpus_texts)
    df = Counter()
    for other in corpus_texts:
        df.update(set(tokenize(other)))
    tokens = tokenize(text)
    tf = Counter(
        t for t in tokens if t not in STOPWORDS and t not in ARTICLES and TERM_RE.match(t)
    )
    first = {}
    for pos, tok in enumerate(tokens):
        first.setdefault(tok, pos)
    idf = {t: math.log((n + 1) / (df[t] + 1)) + 1.0 for t in tf}
    ranked = sorted(tf, key=lambda t: (-(tf[t] * idf[t]), first[t]))
    return ranked[:limit]


class TestGenerateDocid:
    def test_tf_and_tie_break_oracle(self):
        # single-doc corpus => uniform IDF, ranking is tf then first occurrence
        text = "the cat sat on the mat, the cat purred"
        corpus = Corpus([Document("d1", text)])
        docid = generate_docid(corpus["d1"], corpus)
        assert set(docid.terms) == {"cat", "mat", "sat", "purred", "on"}
        assert docid.terms == tuple(oracle_ranking(text, [text]))
        assert docid.terms == ("cat", "sat", "on", "mat", "purred")

    def test_degenerate_document(self):
        corpus = Corpus([Document("d1", "a a a")])
        assert "a" in STOPWORDS
        with pytest.raises(DegenerateDocumentError):
            generate_docid(corpus["d1"], corpus)

    def test_constraints_on_random_docs(self):
        # |terms| <= 8, valid term shape, and never an article
        rng = spawn("docid-constraints")
        words = ["alpha", "beta", "the", "gamma", "a", "delta", "an", "x9", "pd3.1",
                 "epsilon", "zeta", "eta", "theta", "iota", "kappa", "mu"]
        texts = []
        for _ in range(40):
            k = int(rng.integers(3, 30))
            texts.append(" ".join(words[i] for i in rng.integers(0, len(words), k)))
        docs = [Document(f"d{i}", t) for i, t in enumerate(texts)]
        corpus = Corpus(docs)
        generator = TfidfDocidGenerator(corpus)
        for doc in corpus:
            try:
                docid = generator.generate(doc)
            except DegenerateDocumentError:
                continue
            assert 1 <= len(docid.terms) <= 8
            for term in docid.terms:
                assert TERM_RE.match(term)
                assert term not in ARTICLES

    def test_multi_doc_idf_matches_oracle(self):
        texts = [
            "tree tree node shared",
            "sort pivot shared shared",
            "hash bucket node shared",
        ]
        corpus = Corpus([Document(f"d{i}", t) for i, t in enumerate(texts)])
        generator = TfidfDocidGenerator(corpus)
        for doc, text in zip(corpus, texts):
            assert generator.generate(doc).terms == tuple(oracle_ranking(text, texts))

    def test_determinism(self):
        texts = ["tree node leaf branch", "sort pivot swap merge"]
        corpus = Corpus([Document(f"d{i}", t) for i, t in enumerate(texts)])
        a = TfidfDocidGenerator(corpus).generate(corpus["d0"])
        b = TfidfDocidGenerator(corpus).generate(corpus["d0"])
        assert a == b

    def test_length_cap(self):
        text = " ".join(f"w{i} w{i}" for i in range(20))
        corpus = Corpus([Document("d1", text)])
        assert len(generate_docid(corpus["d1"], corpus).terms) == 8
        assert len(generate_docid(corpus["d1"], corpus, length=3).terms) == 3


class TestDocidType:
    def test_article_rejected(self):
        with pytest.raises(IntegrityError):
            Docid(("the", "cat"), "d1")

    def test_bad_term_rejected(self):
        with pytest.raises(IntegrityError):
            Docid(("Cat",), "d1")
        with pytest.raises(IntegrityError):
            Docid(("#cat",), "d1")

    def test_empty_rejected(self):
        with pytest.raises(IntegrityError):
            Docid((), "d1")


class TestAssignDocids:
    def _map_source(self, mapping):
        return {k: Docid(tuple(v.split()), k) for k, v in mapping.items()}

    def test_conflict_rate_and_suffix_ordinal(self):
        corpus = Corpus(
            [Document("d1", "t"), Document("d2", "t"), Document("d3", "t")]
        )
        source = self._map_source({"d1": "x y", "d2": "x y", "d3": "w"})
        assignment = assign_docids(corpus, source, dedup="suffix-ordinal")
        assert assignment.conflict_rate_before_dedup == pytest.approx(2 / 3)
        assert assignment.docids["d1"].terms == ("x", "y")
        assert assignment.docids["d2"].terms == ("x", "y", "2")
        assert assignment.docids["d3"].terms == ("w",)
        assert assignment.deduped == {"d2"}

    def test_all_distinct(self):
        corpus = Corpus([Document("d1", "t"), Document("d2", "t")])
        source = self._map_source({"d1": "x", "d2": "y"})
        assignment = assign_docids(corpus, source)
        assert assignment.conflict_rate_before_dedup == 0.0
        assert assignment.deduped == frozenset()

    def test_error_policy(self):
        corpus = Corpus([Document("d1", "t"), Document("d2", "t")])
        source = self._map_source({"d1": "x", "d2": "x"})
        with pytest.raises(IntegrityError, match="conflict"):
            assign_docids(corpus, source, dedup="error")

    def test_suffix_term_uses_best_unused_candidate(self):
        # identical texts => identical docids; the suffix policy must fall
        # back to ordinals because no unused candidate exists
        corpus = Corpus([Document("d1", "cat mat"), Document("d2", "cat mat")])
        generator = TfidfDocidGenerator(corpus)
        assignment = assign_docids(corpus, generator, dedup="suffix-term")
        assert assignment.docids["d1"].terms == ("cat", "mat")
        assert assignment.docids["d2"].terms == ("cat", "mat", "2")

    def test_suffix_term_prefers_semantic_suffix(self):
        # identical 9-candidate texts: the docid keeps the top 8, so the
        # 9th-ranked candidate is the best unused suffix for d2
        text = "cat mat sat rat bat hat pat vat extra"
        corpus = Corpus([Document("d1", text), Document("d2", text)])
        generator = TfidfDocidGenerator(corpus)
        raw = generator.generate(corpus["d2"]).terms
        assert raw == tuple(text.split()[:8])
        assignment = assign_docids(corpus, generator, dedup="suffix-term")
        assert assignment.docids["d1"].terms == raw
        assert assignment.docids["d2"].terms == raw + ("extra",)

    def test_ordinal_suffix_avoids_existing_sequence(self):
        corpus = Corpus([Document(f"d{i}", "t") for i in range(1, 4)])
        source = self._map_source({"d1": "x y", "d2": "x y 2", "d3": "x y"})
        assignment = assign_docids(corpus, source, dedup="suffix-ordinal")
        assert assignment.docids["d3"].terms == ("x", "y", "3")

    def test_length_bound_after_dedup(self):
        text = " ".join(f"w{i}" for i in range(8))
        corpus = Corpus([Document("d1", text), Document("d2", text)])
        generator = TfidfDocidGenerator(corpus)
        assignment = assign_docids(corpus, generator)
        for docid in assignment.docids.values():
            assert len(docid.terms) <= 9

    def test_post_dedup_uniqueness_random(self):
        rng = spawn("assign-unique")
        for _ in range(20):
            n = int(rng.integers(2, 30))
            pool = ["x", "y", "z", "w"]
            source = {}
            docs = []
            for i in range(n):
                doc_id = f"d{i}"
                docs.append(Document(doc_id, "t"))
                terms = tuple(
                    pool[j] for j in rng.integers(0, len(pool), int(rng.integers(1, 3)))
                )
                source[doc_id] = Docid(tuple(dict.fromkeys(terms)), doc_id)
            assignment = assign_docids(Corpus(docs), source, dedup="suffix-ordinal")
            sequences = [d.terms for d in assignment.docids.values()]
            assert len(sequences) == len(set(sequences))
            rate = assignment.conflict_rate_before_dedup
            assert 0.0 <= rate <= 1.0
            raw = [source[f"d{i}"].terms for i in range(n)]
            assert (rate == 0.0) == (len(raw) == len(set(raw)))


class TestExternalDocids:
    def _corpus(self):
        return Corpus([Document("d1", "alpha"), Document("d2", "beta")])

    def test_full_coverage(self, tmp_path):
        path = tmp_path / "ids.jsonl"
        path.write_text(
            '{"doc_id":"d1","docid":"alpha prime"}\n{"doc_id":"d2","docid":"beta"}\n'
        )
        mapping, truncated = load_external_docids(str(path), self._corpus())
        assert mapping["d1"].terms == ("alpha", "prime")
        assert truncated == 0

    def test_missing_doc(self, tmp_path):
        path = tmp_path / "ids.jsonl"
        path.write_text('{"doc_id":"d1","docid":"alpha"}\n')
        with pytest.raises(IntegrityError, match="d2"):
            load_external_docids(str(path), self._corpus())

    def test_overlong_truncated_with_warning(self, tmp_path):
        terms = " ".join(f"t{i}" for i in range(10))
        path = tmp_path / "ids.jsonl"
        path.write_text(
            json.dumps({"doc_id": "d1", "docid": terms})
            + "\n"
            + '{"doc_id":"d2","docid":"beta"}\n'
        )
        mapping, truncated = load_external_docids(str(path), self._corpus(), length=8)
        assert mapping["d1"].terms == tuple(f"t{i}" for i in range(8))
        assert truncated == 1
