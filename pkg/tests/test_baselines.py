import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eliteness.baselines import (BM25Config, LMConfig, bm25_idf, bm25_score, bm25_scores,
                                 lm_dirichlet_score, lm_jm_score, lm_scores)
from eliteness.corpus import Document, build_index, index_from_counts
from eliteness.ranking import QueryRepr, rank


@pytest.fixture(scope="module")
def hand():
    # 9 tokens in total; cf(a) = 3 so P(a|C) = 1/3
    return build_index([Document("d1", "a b a"), Document("d2", "b c"),
                        Document("d3", "a c c c")])


@pytest.fixture(scope="module")
def pairs():
    # every document has two tokens, so DL = avgDL = 2; "q" is in 2 of 7 docs
    texts = ["q x", "q y", "a b", "c d", "e f", "g h", "i j"]
    return build_index([Document(f"d{i}", t) for i, t in enumerate(texts)])


class TestBM25:
    def test_no_match_is_zero(self, pairs):
        assert bm25_score(["q"], "d3", pairs) == 0.0
        assert bm25_score([], "d0", pairs) == 0.0

    def test_average_length_single_occurrence_equals_idf(self, pairs):
        idf = math.log(5.5 / 2.5)
        assert bm25_idf(7, 2) == pytest.approx(idf, rel=1e-15)
        assert bm25_score(["q"], "d0", pairs) == pytest.approx(idf, rel=1e-15)

    def test_idf_floored(self):
        assert bm25_idf(10, 9) == 0.0

    def test_presence_only_limit(self):
        idx = build_index([Document("a", "t s s s"), Document("b", "t t t t"),
                           Document("c", "s s s s"), Document("d", "u u u u"), Document("e", "u")])
        cfg = BM25Config(k1=1e-12)
        assert bm25_score(["t"], "a", idx, cfg) == pytest.approx(bm25_score(["t"], "b", idx, cfg), rel=1e-9)

    def test_saturates_in_tf(self):
        cfg = BM25Config()
        counts = {f"d{k:02d}": {"t": k, "f": 10 - k} for k in range(1, 10)}
        counts.update({f"z{k:02d}": {"f": 10} for k in range(20)})
        idx = index_from_counts(counts)
        s = [bm25_score(["t"], f"d{k:02d}", idx, cfg) for k in range(1, 10)]
        assert all(a < b for a, b in zip(s, s[1:]))
        assert all(x < bm25_idf(idx.N, 9) * (cfg.k1 + 1) for x in s)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            BM25Config(k1=-1)
        with pytest.raises(ValueError):
            BM25Config(b=1.2)


class TestLanguageModels:
    def test_dirichlet_hand_values(self, hand):
        cfg = LMConfig("dirichlet", mu=2.0)
        want = {"d1": math.log(8 / 15), "d2": math.log(1 / 6), "d3": math.log(5 / 18)}
        for doc, w in want.items():
            assert lm_dirichlet_score(["a"], doc, hand, cfg) == pytest.approx(w, abs=1e-12)

    def test_jm_hand_values(self, hand):
        cfg = LMConfig("jm", lam=0.5)
        want = {"d1": math.log(1 / 2), "d2": math.log(1 / 6), "d3": math.log(7 / 24)}
        for doc, w in want.items():
            assert lm_jm_score(["a"], doc, hand, cfg) == pytest.approx(w, abs=1e-12)

    def test_jm_full_smoothing_ties(self, hand):
        cfg = LMConfig("jm", lam=1.0)
        s = {lm_jm_score(["a", "c"], d, hand, cfg) for d in hand.doc_ids}
        assert len(s) == 1

    def test_dirichlet_huge_prior_ties(self, hand):
        cfg = LMConfig("dirichlet", mu=1e12)
        s = [lm_dirichlet_score(["a", "c"], d, hand, cfg) for d in hand.doc_ids]
        assert max(s) - min(s) < 1e-9

    def test_unknown_term_skipped(self, hand):
        assert lm_dirichlet_score(["zzz", "a"], "d1", hand) == lm_dirichlet_score(["a"], "d1", hand)
        assert lm_jm_score(["zzz"], "d1", hand) == 0.0

    @given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
    def test_jm_monotone_in_lambda(self, l1, l2):
        idx = build_index([Document("a", "t t x"), Document("b", "x y z w")])
        lo, hi = sorted((l1, l2))
        for doc in ("a", "b"):
            s_lo = lm_jm_score(["t"], doc, idx, LMConfig("jm", lam=lo))
            s_hi = lm_jm_score(["t"], doc, idx, LMConfig("jm", lam=hi))
            # P(t|d) > P(t|C) in "a" and below it in "b"
            assert (s_hi <= s_lo) if doc == "a" else (s_hi >= s_lo)

    @given(st.integers(0, 49), st.floats(1, 5000))
    def test_dirichlet_monotone_in_tf(self, tf, mu):
        lo = {"t": tf, "f": 50 - tf} if tf else {"f": 50}
        idx = index_from_counts({"a": lo, "b": {"t": tf + 1, "f": 49 - tf}})
        cfg = LMConfig("dirichlet", mu=mu)
        assert lm_dirichlet_score(["t"], "b", idx, cfg) > lm_dirichlet_score(["t"], "a", idx, cfg)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            LMConfig("jm", lam=0.0)
        with pytest.raises(ValueError):
            LMConfig("dirichlet", mu=0)
        with pytest.raises(ValueError):
            LMConfig("abs")


class TestVectorised:
    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.sampled_from(["t00", "t01", "t02", "t05", "t07", "t11"]), min_size=1, max_size=4),
           st.floats(0.05, 1.0), st.floats(1, 5000), st.floats(0.1, 3.0))
    def test_dense_matches_per_doc(self, synth_index, terms, lam, mu, k1):
        idx = synth_index
        checks = [
            (bm25_scores(terms, idx, BM25Config(k1=k1)), lambda d: bm25_score(terms, d, idx, BM25Config(k1=k1))),
            (lm_scores(terms, idx, LMConfig("jm", lam=lam)), lambda d: lm_jm_score(terms, d, idx, LMConfig("jm", lam=lam))),
            (lm_scores(terms, idx, LMConfig("dirichlet", mu=mu)), lambda d: lm_dirichlet_score(terms, d, idx, LMConfig("dirichlet", mu=mu))),
        ]
        for dense, single in checks:
            for d in range(0, idx.N, 53):
                assert dense[d] == pytest.approx(single(d), rel=1e-12, abs=1e-12)

    @pytest.mark.parametrize("scorer", ["bm25", "lm-jm", "lm-dirichlet"])
    def test_rank_contract(self, hand, scorer):
        rl = rank(QueryRepr("1", ("a",)), hand, None, scorer)
        assert set(rl.doc_ids()) == {"d1", "d3"}
        s = [e.score for e in rl.entries]
        assert all(np.isfinite(s)) and s == sorted(s, reverse=True)
