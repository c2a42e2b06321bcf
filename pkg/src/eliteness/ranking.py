"""Eliteness-based document scoring and ranking.

A query is the set of its (known) terms; each is taken to be elite for the
query and every other vocabulary term non-elite. Per-term contributions are
evaluated on the length-normalized tf ``t`` of the document, which may be
real-valued because the Poisson ``1/t!`` cancels in every ratio used here.

Scorers
-------
``final``
    sum over query terms of ``log Pois(t; mu1) - log mixture(t)``.
``logical-inclusion``
    sum over query terms of ``log P(elite | t) - log p``; the same number as
    ``final`` by Bayes' rule, computed through the posterior instead.
``strict-identity``
    every vocabulary term contributes: query terms by the elite log-ratio,
    the rest by ``log P(non-elite | t) - log(1 - p)``.
``idf``
    sum of ``log(N / df)`` over query terms present in the document.

For ``final`` and ``logical-inclusion`` a query term absent from the
document would add ``log Pois(0; mu1) - log mixture(0)``, a value that
depends on the term but not on the document (normalized tf of 0 is 0 at any
length). These contributions are left out and only documents sharing a
query term are candidates. The ordering is unchanged for single-term
queries and among documents matching the same query terms; between
documents matching different subsets the scores shift by the omitted
constants, as in any matched-terms-only term-at-a-time scorer.

The un-simplified logical-inclusion form also multiplies in a sum over all
eliteness configurations of the non-query terms; with independent terms it
factorises into a per-term product and is dropped, as above.

``strict-identity`` cannot drop absent terms: its background
``B(d) = sum_i log P(E_i=0 | d) / (1 - p_i)`` differs across documents, so
it is the one scorer that ranks the whole collection. ``B`` is computed
once per (model, b) from the tf=0 closed form plus one pass over postings.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

from . import baselines
from .corpus import CorpusIndex, normalized_tf, tokenize
from .mixture import ElitenessModel, TwoPoissonParams, log_posterior, log_ratio

ELITENESS_SCORERS = ("final", "logical-inclusion", "strict-identity")
SCORERS = ELITENESS_SCORERS + ("idf", "bm25", "lm-jm", "lm-dirichlet")
RANK_DECIMALS = 10


@dataclass(frozen=True)
class QueryRepr:
    query_id: str
    elite_terms: tuple[str, ...]
    unknown_terms: tuple[str, ...] = ()


def make_query(query_id: str, text: str, index: CorpusIndex) -> QueryRepr:
    """Tokenize ``text`` with the index's own tokenizer settings."""
    return query_from_terms(query_id, tokenize(text, index.tokenizer), index)


def query_from_terms(query_id: str, terms: Iterable[str], index: CorpusIndex) -> QueryRepr:
    terms = set(terms)
    known = tuple(sorted(t for t in terms if t in index.vocab))
    unknown = tuple(sorted(terms - set(known)))
    return QueryRepr(query_id, known, unknown)


@dataclass(frozen=True)
class ScoredDoc:
    doc_id: str
    score: float


@dataclass(frozen=True)
class RankedList:
    query_id: str
    entries: tuple[ScoredDoc, ...]
    skipped_terms: tuple[str, ...] = ()

    def __len__(self):
        return len(self.entries)

    def doc_ids(self) -> list[str]:
        return [e.doc_id for e in self.entries]


# per-term weights, vectorised over normalized tf

def final_weight(params: TwoPoissonParams, t):
    """log[ Pois(t; mu1) / (p Pois(t; mu1) + (1-p) Pois(t; mu0)) ]."""
    p = params.p_elite
    if p >= 1:
        return np.zeros_like(np.asarray(t, dtype=np.float64)) + 0.0
    return -np.logaddexp(math.log(p), math.log1p(-p) + log_ratio(params, t))


def inclusion_weight(params: TwoPoissonParams, t, term: str | None = None):
    """log[ P(elite | t) / p ]."""
    lp1, _ = log_posterior(params, t, term)
    return lp1 - math.log(params.p_elite)


def nonelite_weight(params: TwoPoissonParams, t, term: str | None = None):
    """log[ P(non-elite | t) / (1 - p) ]; zero when p == 1."""
    if params.p_elite >= 1:
        return np.zeros_like(np.asarray(t, dtype=np.float64))
    _, lp0 = log_posterior(params, t, term)
    return lp0 - math.log1p(-params.p_elite)


def split_terms(q: QueryRepr, model: ElitenessModel) -> tuple[list[str], list[str]]:
    """Query terms the model can score, and those it cannot."""
    usable, skipped = [], []
    for term in q.elite_terms:
        (usable if model.params(term) is not None else skipped).append(term)
    return usable, skipped


def _doc_t(index: CorpusIndex, term: str, d: int, b: float) -> float:
    return normalized_tf(index.tf(term, d), index.doc_len[d], index.avg_doc_len, b)


def _resolve(index: CorpusIndex, doc) -> int:
    return index.doc_index(doc) if isinstance(doc, str) else int(doc)


def score_final(q: QueryRepr, doc, index: CorpusIndex, model: ElitenessModel,
                b: float = 0.64) -> float:
    d = _resolve(index, doc)
    score = 0.0
    for term in split_terms(q, model)[0]:
        t = _doc_t(index, term, d, b)
        if t > 0:
            score += float(final_weight(model.params(term), t))
    return score


def score_logical_inclusion(q: QueryRepr, doc, index: CorpusIndex, model: ElitenessModel,
                            b: float = 0.64) -> float:
    d = _resolve(index, doc)
    score = 0.0
    for term in split_terms(q, model)[0]:
        t = _doc_t(index, term, d, b)
        if t > 0:
            score += float(inclusion_weight(model.params(term), t, term))
    return score


def strict_background(index: CorpusIndex, model: ElitenessModel, b: float = 0.64) -> np.ndarray:
    """Per-document sum of the non-elite log-ratio over the whole vocabulary."""
    key = ("strict-background", index.fingerprint(), float(b))
    cached = model._cache.get(key)
    if cached is not None:
        return cached
    usable = [t for t in index.terms if model.params(t) is not None]
    zero = {t: float(nonelite_weight(model.params(t), 0.0, t)) for t in usable}
    bg = np.full(index.N, math.fsum(zero[t] for t in usable))
    for term in usable:
        docs, tfs = index.postings(term)
        t = normalized_tf(tfs, index.doc_len[docs], index.avg_doc_len, b)
        bg[docs] += nonelite_weight(model.params(term), t, term) - zero[term]
    bg.setflags(write=False)
    model._cache[key] = bg
    return bg


def score_strict_identity(q: QueryRepr, doc, index: CorpusIndex, model: ElitenessModel,
                          b: float = 0.64) -> float:
    d = _resolve(index, doc)
    score = float(strict_background(index, model, b)[d])
    for term in split_terms(q, model)[0]:
        pr = model.params(term)
        t = _doc_t(index, term, d, b)
        score += float(inclusion_weight(pr, t, term)) - float(nonelite_weight(pr, t, term))
    return score


def score_idf(q: QueryRepr, doc, index: CorpusIndex) -> float:
    d = _resolve(index, doc)
    score = 0.0
    for term in q.elite_terms:
        df = index.df(term)
        if df and index.tf(term, d) > 0:
            score += math.log(index.N / df)
    return score


# ranking

def _candidates(terms, index: CorpusIndex) -> np.ndarray:
    parts = [index.postings(t)[0] for t in terms]
    if not parts:
        return np.empty(0, dtype=np.int64)
    return np.unique(np.concatenate(parts))


def _accumulate(terms, index: CorpusIndex, model: ElitenessModel, b: float, weight) -> np.ndarray:
    scores = np.zeros(index.N)
    for term in terms:
        docs, tfs = index.postings(term)
        t = normalized_tf(tfs, index.doc_len[docs], index.avg_doc_len, b)
        scores[docs] += weight(model.params(term), t)
    return scores


def score_all(q: QueryRepr, index: CorpusIndex, model: ElitenessModel | None = None,
              scorer: str = "final", b: float = 0.64,
              bm25_cfg: baselines.BM25Config | None = None,
              lm_cfg: baselines.LMConfig | None = None) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Scores for every candidate document.

    Returns ``(candidate internal ids, their scores, skipped query terms)``.
    """
    if scorer not in SCORERS:
        raise ValueError(f"unknown scorer {scorer!r}; choose from {', '.join(SCORERS)}")
    terms, skipped = list(q.elite_terms), []
    if scorer in ELITENESS_SCORERS:
        if model is None:
            raise ValueError(f"scorer {scorer!r} needs a fitted model")
        model.check_binding(index)
        terms, skipped = split_terms(q, model)

    if scorer == "strict-identity":
        scores = np.array(strict_background(index, model, b))
        for term in terms:
            pr = model.params(term)
            docs, tfs = index.postings(term)
            t = normalized_tf(tfs, index.doc_len[docs], index.avg_doc_len, b)
            zero = float(inclusion_weight(pr, 0.0, term) - nonelite_weight(pr, 0.0, term))
            scores += zero
            scores[docs] += inclusion_weight(pr, t, term) - nonelite_weight(pr, t, term) - zero
        return np.arange(index.N), scores, skipped

    cand = _candidates(terms, index)
    if scorer == "final":
        scores = _accumulate(terms, index, model, b, final_weight)
    elif scorer == "logical-inclusion":
        scores = _accumulate(terms, index, model, b, inclusion_weight)
    elif scorer == "idf":
        scores = np.zeros(index.N)
        for term in q.elite_terms:
            docs, _ = index.postings(term)
            scores[docs] += math.log(index.N / len(docs))
    elif scorer == "bm25":
        scores = baselines.bm25_scores(q.elite_terms, index, bm25_cfg)
    elif scorer == "lm-jm":
        scores = baselines.lm_scores(q.elite_terms, index, lm_cfg or baselines.LMConfig("jm"))
    else:
        scores = baselines.lm_scores(q.elite_terms, index, lm_cfg or baselines.LMConfig("dirichlet"))
    return cand, scores[cand], skipped


def rank(q: QueryRepr, index: CorpusIndex, model: ElitenessModel | None = None,
         scorer: str = "final", b: float = 0.64, top_k: int = 1000,
         bm25_cfg: baselines.BM25Config | None = None,
         lm_cfg: baselines.LMConfig | None = None) -> RankedList:
    """Top ``top_k`` documents by (score descending, doc_id ascending).

    Scores equal to ``RANK_DECIMALS`` decimal places count as tied.
    """
    if top_k < 1:
        raise ValueError("top_k must be at least 1")
    cand, scores, skipped = score_all(q, index, model, scorer, b, bm25_cfg, lm_cfg)
    if not np.all(np.isfinite(scores)):
        raise FloatingPointError(f"non-finite score for query {q.query_id!r} ({scorer})")
    # Sort on scores rounded to RANK_DECIMALS: differences below that are float
    # noise between algebraically equal forms (e.g. two saturated posteriors)
    # and are treated as ties. Internal ids follow doc_id order, so they double
    # as the tie-breaker.
    order = np.lexsort((cand, -np.round(scores, RANK_DECIMALS)))[:top_k]
    entries = tuple(ScoredDoc(index.doc_ids[cand[i]], float(scores[i])) for i in order)
    return RankedList(q.query_id, entries, tuple(skipped))


def write_run(runs: Iterable[RankedList], out: IO[str], tag: str = "eliteness") -> None:
    """TREC run lines: ``qid Q0 docid rank score tag``."""
    for rl in runs:
        for r, e in enumerate(rl.entries, 1):
            out.write(f"{rl.query_id} Q0 {e.doc_id} {r} {e.score:.6f} {tag}\n")


_TOP_RE = re.compile(r"<top>(.*?)</top>", re.S | re.I)
_NUM_RE = re.compile(r"<num>\s*(?:Number:)?\s*(\S+)", re.I)
_TITLE_RE = re.compile(r"<title>\s*(?:Topic:)?(.*?)(?=<\w+>|$)", re.S | re.I)


def parse_trec_topics(text: str) -> list[tuple[str, str]]:
    """(qid, title) pairs from a TREC topics file (``<top><num>..<title>..``)."""
    out = []
    for m in _TOP_RE.finditer(text):
        body = m.group(1)
        num, title = _NUM_RE.search(body), _TITLE_RE.search(body)
        if num is None or title is None:
            raise ValueError(f"topic without <num> or <title>: {body[:60]!r}")
        out.append((num.group(1), " ".join(title.group(1).split())))
    return out


def read_topics(path, fmt: str = "jsonl") -> list[tuple[str, str]]:
    """(qid, text) pairs from a JSON-lines (or TREC) topics file."""
    if fmt == "trec":
        with open(path, encoding="utf-8", errors="replace") as f:
            return parse_trec_topics(f.read())
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                out.append((str(obj["qid"]), str(obj["text"])))
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise ValueError(f"{path}:{lineno}: malformed topic line ({e})") from None
    return out
