"""Seeded 2-Poisson corpus generator.

Each planted term has known mixture parameters; for every document the
term's eliteness is drawn first and its tf from the matching Poisson. The
generator keeps its own tallies so tests can compare fitted statistics
against ground truth without going through the tokenizer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .corpus import CorpusIndex, Document, TokenizerConfig
from .mixture import TwoPoissonParams


@dataclass
class SyntheticCorpus:
    doc_ids: list[str]
    params: dict[str, TwoPoissonParams]
    # term -> (doc positions with tf > 0, tf values); term -> bool elite mask
    postings: dict[str, tuple[np.ndarray, np.ndarray]]
    elite: dict[str, np.ndarray]

    @property
    def n_docs(self) -> int:
        return len(self.doc_ids)

    @property
    def terms(self) -> list[str]:
        return sorted(self.params)

    def tf_tally(self, term: str) -> dict[int, int]:
        """Generator-side tf histogram, tf=0 included."""
        _, tfs = self.postings[term]
        out = {0: self.n_docs - len(tfs)}
        vals, cnts = np.unique(tfs, return_counts=True)
        out.update({int(v): int(c) for v, c in zip(vals, cnts)})
        return out

    def doc_lengths(self) -> np.ndarray:
        lens = np.zeros(self.n_docs, dtype=np.int64)
        for docs, tfs in self.postings.values():
            np.add.at(lens, docs, tfs)
        return lens

    def to_index(self) -> CorpusIndex:
        """Index built straight from the generator's counts."""
        order = np.argsort(self.doc_ids, kind="stable")
        if not np.array_equal(order, np.arange(self.n_docs)):
            raise ValueError("doc_ids must already be in sorted order")
        vocab = [t for t in self.terms if len(self.postings[t][0])]
        offsets = np.zeros(len(vocab) + 1, dtype=np.int64)
        offsets[1:] = np.cumsum([len(self.postings[t][0]) for t in vocab])
        post_docs = np.concatenate([self.postings[t][0] for t in vocab]) if vocab else []
        post_tfs = np.concatenate([self.postings[t][1] for t in vocab]) if vocab else []
        return CorpusIndex(self.doc_ids, self.doc_lengths(), vocab, offsets,
                           post_docs, post_tfs, TokenizerConfig())

    def documents(self) -> Iterator[Document]:
        per_doc: list[list[str]] = [[] for _ in range(self.n_docs)]
        for term in self.terms:
            docs, tfs = self.postings[term]
            for d, tf in zip(docs.tolist(), tfs.tolist()):
                per_doc[d].extend([term] * tf)
        for doc_id, toks in zip(self.doc_ids, per_doc):
            yield Document(doc_id, " ".join(toks))

    def relevant(self, terms: list[str]) -> list[str]:
        """Documents elite for every one of ``terms``."""
        mask = np.ones(self.n_docs, dtype=bool)
        for t in terms:
            mask &= self.elite[t]
        return [self.doc_ids[i] for i in np.flatnonzero(mask)]


def generate(n_docs: int, params: dict[str, TwoPoissonParams], seed: int = 0) -> SyntheticCorpus:
    rng = np.random.default_rng(seed)
    width = len(str(n_docs - 1))
    doc_ids = [f"d{i:0{width}d}" for i in range(n_docs)]
    postings, elite = {}, {}
    for term in sorted(params):
        pr = params[term]
        is_elite = rng.random(n_docs) < pr.p_elite
        tf = np.where(is_elite, rng.poisson(pr.mu_elite, n_docs),
                      rng.poisson(pr.mu_nonelite, n_docs))
        nz = np.flatnonzero(tf)
        postings[term] = (nz.astype(np.int64), tf[nz].astype(np.int64))
        elite[term] = is_elite
    return SyntheticCorpus(doc_ids, dict(params), postings, elite)


def random_params(n_terms: int, seed: int = 0) -> dict[str, TwoPoissonParams]:
    """Well-separated parameters (mu_elite / mu_nonelite >= 10) for n_terms terms."""
    rng = np.random.default_rng(seed)
    width = len(str(n_terms - 1))
    out = {}
    for i in range(n_terms):
        mu0 = float(rng.uniform(0.05, 0.4))
        out[f"t{i:0{width}d}"] = TwoPoissonParams(
            mu_elite=float(rng.uniform(10 * mu0 + 2.0, 12.0)),
            mu_nonelite=mu0,
            p_elite=float(rng.uniform(0.03, 0.3)),
        )
    return out


def write_fixture(out_dir: str | Path, n_docs: int = 500, n_terms: int = 30,
                  n_queries: int = 10, n_verbose: int = 0, verbose_factor: int = 5,
                  seed: int = 0) -> SyntheticCorpus:
    """Write docs.jsonl, topics.jsonl, qrels.txt and params.tsv into ``out_dir``.

    Each query is one or two planted terms; its relevant documents are those
    elite for all of them. ``n_verbose`` extra documents are verbatim
    repetitions (``verbose_factor`` times) of randomly chosen documents. They
    inflate tf without changing the topic and are never judged relevant.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = generate(n_docs, random_params(n_terms, seed), seed)
    rng = np.random.default_rng(seed + 1)
    terms = corpus.terms

    queries = []
    for qi in range(n_queries):
        k = 1 + int(rng.integers(2))
        qterms = sorted(rng.choice(terms, size=k, replace=False).tolist())
        queries.append((f"q{qi + 1}", qterms))

    docs = list(corpus.documents())
    if n_verbose:
        pick = rng.choice(len(docs), size=n_verbose, replace=False)
        for j, i in enumerate(sorted(pick.tolist())):
            docs.append(Document(f"v{j:04d}", " ".join([docs[i].text] * verbose_factor)))

    with open(out / "docs.jsonl", "w", encoding="utf-8") as f:
        for d in docs:
            f.write(json.dumps({"id": d.doc_id, "text": d.text}) + "\n")
    with open(out / "topics.jsonl", "w", encoding="utf-8") as f:
        for qid, qterms in queries:
            f.write(json.dumps({"qid": qid, "text": " ".join(qterms)}) + "\n")
    with open(out / "qrels.txt", "w", encoding="utf-8") as f:
        for qid, qterms in queries:
            rel = set(corpus.relevant(qterms))
            for doc_id in corpus.doc_ids:
                if doc_id in rel:
                    f.write(f"{qid} 0 {doc_id} 1\n")
    with open(out / "params.tsv", "w", encoding="utf-8") as f:
        f.write("term\tmu_elite\tmu_nonelite\tp_elite\n")
        for t in terms:
            pr = corpus.params[t]
            f.write(f"{t}\t{pr.mu_elite!r}\t{pr.mu_nonelite!r}\t{pr.p_elite!r}\n")
    return corpus
