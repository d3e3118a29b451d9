import math

import numpy as np
import pytest

from conftest import corpus_of, record
from petrank.leakage import (
    DEFAULT_AUDIT_NORMALIZATION,
    EmptyCorpus,
    LeakageReport,
    cosine,
    cross_split_audit,
    tfidf_bigrams,
)
from petrank.textstats import normalize, tokenize


def dense_cosine_oracle(train_texts, test_texts):
    """Dense reference: full vocabulary matrix, plain numpy arithmetic."""
    cfg = DEFAULT_AUDIT_NORMALIZATION

    def bigrams(text):
        toks = normalize(tokenize(text), cfg)
        return list(zip(toks, toks[1:]))

    docs = [bigrams(t) for t in train_texts + test_texts]
    vocab = sorted({b for doc in docs for b in doc})
    index = {b: i for i, b in enumerate(vocab)}
    tf = np.zeros((len(docs), len(vocab)))
    for r, doc in enumerate(docs):
        for b in doc:
            tf[r, index[b]] += 1.0
    df = (tf > 0).sum(axis=0)
    idf = np.log((1 + len(docs)) / (1 + df)) + 1.0
    weights = tf * idf
    norms = np.linalg.norm(weights, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    unit = weights / norms
    n_train = len(train_texts)
    return unit[:n_train] @ unit[n_train:].T


def corpus_from_texts(texts, split="train", start=1):
    return corpus_of(
        [
            record(name=f"2001_{start + i}.txt", text=t, split=split)
            for i, t in enumerate(texts)
        ]
    )


class TestTfidfBigrams:
    def test_single_document_weights(self):
        vectors, idf = tfidf_bigrams(corpus_from_texts(["a b a b"]))
        vec = vectors["2001_1.txt"]
        # one document: both bigrams have idf ln(2/2)+1 = 1; tf 2 and 1
        assert idf[("a", "b")] == pytest.approx(1.0)
        assert idf[("b", "a")] == pytest.approx(1.0)
        assert vec[("a", "b")] == pytest.approx(2 / math.sqrt(5))
        assert vec[("b", "a")] == pytest.approx(1 / math.sqrt(5))
        assert sum(w * w for w in vec.values()) == pytest.approx(1.0, abs=1e-9)

    def test_identical_documents_have_unit_similarity(self):
        text = "leave granted heard learned counsel for the parties"
        vectors, _ = tfidf_bigrams(corpus_from_texts([text, text]))
        a, b = vectors.values()
        assert cosine(a, b) == pytest.approx(1.0, abs=1e-12)

    def test_disjoint_vocabulary_is_orthogonal(self):
        vectors, _ = tfidf_bigrams(corpus_from_texts(["a b c d", "x y z w"]))
        a, b = vectors.values()
        assert cosine(a, b) == 0.0

    def test_vectors_normalized(self):
        vectors, _ = tfidf_bigrams(
            corpus_from_texts(["one two three two three", "two three four"])
        )
        for vec in vectors.values():
            assert sum(w * w for w in vec.values()) == pytest.approx(1.0, abs=1e-9)

    def test_short_documents_yield_empty_vectors(self):
        vectors, _ = tfidf_bigrams(corpus_from_texts(["word"]))
        assert vectors["2001_1.txt"] == {}

    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpus):
            tfidf_bigrams(corpus_of([]))

    def test_cosine_symmetry_and_bounds(self, rng):
        words = list("abcdefgh")
        texts = [
            " ".join(rng.choice(words, size=12)) for _ in range(6)
        ]
        vectors, _ = tfidf_bigrams(corpus_from_texts(texts))
        vecs = list(vectors.values())
        for a in vecs:
            for b in vecs:
                s_ab, s_ba = cosine(a, b), cosine(b, a)
                assert s_ab == pytest.approx(s_ba, abs=1e-12)
                assert -1e-12 <= s_ab <= 1.0 + 1e-12


class TestCrossSplitAudit:
    def test_disjoint_vocabulary_split(self):
        train = corpus_from_texts(["a b c d e"], split="train")
        test = corpus_from_texts(["v w x y z"], split="test", start=10)
        report = cross_split_audit(train, test)
        assert report.max_similarity == 0.0
        assert report.offenders == ()
        assert report.verdict() == "PASS (max=0.0000 < 0.80)"

    def test_verbatim_copy_detected(self):
        leaked = "leave granted heard learned counsel at length on merits"
        train = corpus_from_texts([leaked, "entirely different submissions advanced today"])
        test = corpus_from_texts([leaked], split="test", start=10)
        report = cross_split_audit(train, test)
        assert report.max_similarity == pytest.approx(1.0, abs=1e-9)
        assert report.argmax_pair == ("2001_1.txt", "2001_10.txt")
        assert len(report.offenders) == 1
        assert report.verdict() == "FAIL (1 offenders)"

    def test_matches_dense_oracle(self, rng):
        words = list("abcdefghijkl")
        train_texts = [" ".join(rng.choice(words, size=20)) for _ in range(12)]
        test_texts = [" ".join(rng.choice(words, size=20)) for _ in range(8)]
        train = corpus_from_texts(train_texts, split="train")
        test = corpus_from_texts(test_texts, split="test", start=100)
        oracle = dense_cosine_oracle(train_texts, test_texts)
        report = cross_split_audit(train, test, threshold=1.0)
        assert report.max_similarity == pytest.approx(float(oracle.max()), abs=1e-9)
        # entrywise check through the vector API
        from petrank.leakage import _bigram_counts, _fit_idf, _vectorize

        cfg = DEFAULT_AUDIT_NORMALIZATION
        tr_counts = [_bigram_counts(t, cfg) for t in train_texts]
        te_counts = [_bigram_counts(t, cfg) for t in test_texts]
        idf = _fit_idf(tr_counts + te_counts)
        for i, tc in enumerate(tr_counts):
            for j, sc in enumerate(te_counts):
                sim = cosine(_vectorize(tc, idf), _vectorize(sc, idf))
                assert sim == pytest.approx(float(oracle[i, j]), abs=1e-9)

    def test_self_audit_maxes_on_diagonal(self):
        texts = [
            "first petition text about land acquisition compensation",
            "second petition text about service regularisation benefits",
        ]
        corp = corpus_from_texts(texts)
        report = cross_split_audit(corp, corp)
        assert report.max_similarity == pytest.approx(1.0, abs=1e-12)
        assert report.argmax_pair[0] == report.argmax_pair[1]

    def test_offenders_sorted_descending(self):
        shared = "leave granted heard learned counsel for the state at length"
        train = corpus_from_texts([shared, shared + " further orders reserved"])
        test = corpus_from_texts([shared], split="test", start=10)
        report = cross_split_audit(train, test, threshold=0.1)
        sims = [s for _, _, s in report.offenders]
        assert sims == sorted(sims, reverse=True)

    def test_threshold_validation(self):
        corp = corpus_from_texts(["a b"])
        with pytest.raises(ValueError):
            cross_split_audit(corp, corp, threshold=0.0)

    def test_empty_split_rejected(self):
        corp = corpus_from_texts(["a b"])
        with pytest.raises(EmptyCorpus):
            cross_split_audit(corp, corpus_of([]))

    def test_report_serializes(self):
        corp = corpus_from_texts(["a b c", "c d e"])
        report = cross_split_audit(corp, corp)
        assert '"verdict"' in report.to_json()


class TestVerdictFormatting:
    def test_pass_line_format(self):
        report = LeakageReport(
            max_similarity=0.765,
            argmax_pair=("a", "b"),
            offenders=(),
            threshold=0.80,
            vocabulary_size=100,
        )
        assert report.verdict() == "PASS (max=0.7650 < 0.80)"

    def test_fail_line_format(self):
        report = LeakageReport(
            max_similarity=0.99,
            argmax_pair=("a", "b"),
            offenders=(("a", "b", 0.99), ("c", "d", 0.91)),
            threshold=0.80,
            vocabulary_size=100,
        )
        assert report.verdict() == "FAIL (2 offenders)"
