"""Reference rankers: Okapi BM25 and query-likelihood language models.

Queries are treated as term sets, the same as the eliteness scorers, so a
repeated query term counts once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import CorpusIndex


@dataclass(frozen=True)
class BM25Config:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if not self.k1 >= 0:
            raise ValueError(f"k1 must be non-negative, got {self.k1}")
        if not 0 <= self.b <= 1:
            raise ValueError(f"b must lie in [0, 1], got {self.b}")


@dataclass(frozen=True)
class LMConfig:
    smoothing: str = "dirichlet"
    lam: float = 0.7
    mu: float = 2000.0

    def __post_init__(self):
        if self.smoothing not in ("jm", "dirichlet"):
            raise ValueError(f"unknown smoothing {self.smoothing!r}")
        if not 0 < self.lam <= 1:
            raise ValueError(f"lambda must lie in (0, 1], got {self.lam}")
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")


def bm25_idf(n_docs: int, df: int) -> float:
    """Robertson-Sparck Jones idf, floored at zero."""
    return max(0.0, math.log((n_docs - df + 0.5) / (df + 0.5)))


def _doc(index: CorpusIndex, doc) -> int:
    return index.doc_index(doc) if isinstance(doc, str) else int(doc)


def _collection_prob(index: CorpusIndex, term: str, total: int) -> float:
    return index.cf(term) / total if total else 0.0


def bm25_score(terms, doc, index: CorpusIndex, cfg: BM25Config | None = None) -> float:
    cfg = cfg or BM25Config()
    d = _doc(index, doc)
    dl = index.dl(d)
    score = 0.0
    for term in sorted(set(terms)):
        tf = index.tf(term, d)
        if tf == 0:
            continue
        idf = bm25_idf(index.N, index.df(term))
        norm = cfg.k1 * (1.0 - cfg.b + cfg.b * dl / index.avg_doc_len)
        score += idf * tf * (cfg.k1 + 1.0) / (tf + norm)
    return score


def lm_dirichlet_score(terms, doc, index: CorpusIndex, cfg: LMConfig | None = None) -> float:
    cfg = cfg or LMConfig("dirichlet")
    d = _doc(index, doc)
    dl = index.dl(d)
    total = int(index.doc_len.sum())
    score = 0.0
    for term in sorted(set(terms)):
        pc = _collection_prob(index, term, total)
        if pc == 0.0:
            continue
        score += math.log((index.tf(term, d) + cfg.mu * pc) / (dl + cfg.mu))
    return score


def lm_jm_score(terms, doc, index: CorpusIndex, cfg: LMConfig | None = None) -> float:
    cfg = cfg or LMConfig("jm")
    d = _doc(index, doc)
    dl = index.dl(d)
    total = int(index.doc_len.sum())
    score = 0.0
    for term in sorted(set(terms)):
        pc = _collection_prob(index, term, total)
        if pc == 0.0:
            continue
        p_doc = index.tf(term, d) / dl if dl else 0.0
        score += math.log((1.0 - cfg.lam) * p_doc + cfg.lam * pc)
    return score


# Vectorised term-at-a-time forms used by ranking.rank. Each returns a dense
# score array over all documents; the caller restricts it to candidates.

def bm25_scores(terms, index: CorpusIndex, cfg: BM25Config | None = None) -> np.ndarray:
    cfg = cfg or BM25Config()
    scores = np.zeros(index.N)
    for term in sorted(set(terms)):
        docs, tfs = index.postings(term)
        if len(docs) == 0:
            continue
        idf = bm25_idf(index.N, len(docs))
        tf = tfs.astype(np.float64)
        norm = cfg.k1 * (1.0 - cfg.b + cfg.b * index.doc_len[docs] / index.avg_doc_len)
        scores[docs] += idf * tf * (cfg.k1 + 1.0) / (tf + norm)
    return scores


def lm_scores(terms, index: CorpusIndex, cfg: LMConfig | None = None) -> np.ndarray:
    cfg = cfg or LMConfig()
    total = int(index.doc_len.sum())
    dl = index.doc_len.astype(np.float64)
    scores = np.zeros(index.N)
    for term in sorted(set(terms)):
        pc = _collection_prob(index, term, total)
        if pc == 0.0:
            continue
        docs, tfs = index.postings(term)
        if cfg.smoothing == "dirichlet":
            contrib = np.log(cfg.mu * pc / (dl + cfg.mu))
            contrib[docs] = np.log((tfs + cfg.mu * pc) / (dl[docs] + cfg.mu))
        else:
            contrib = np.full(index.N, math.log(cfg.lam * pc))
            contrib[docs] = np.log((1.0 - cfg.lam) * tfs / dl[docs] + cfg.lam * pc)
        scores += contrib
    return scores
