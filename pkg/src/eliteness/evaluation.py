"""TREC-style evaluation: qrels and run parsing, AP / RR / Recall@k."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

log = logging.getLogger(__name__)


class FormatError(ValueError):
    pass


class Qrels:
    """Relevance grades keyed by (query_id, doc_id); relevant iff grade >= 1."""

    def __init__(self, grades: dict[tuple[str, str], int]):
        if not grades:
            raise FormatError("qrels contain no judgements")
        self.grades = dict(grades)
        self._relevant: dict[str, set[str]] = {}
        for (qid, doc), g in self.grades.items():
            rel = self._relevant.setdefault(qid, set())
            if g >= 1:
                rel.add(doc)

    def queries(self) -> list[str]:
        return sorted(self._relevant)

    def relevant(self, query_id: str) -> set[str]:
        return self._relevant.get(query_id, set())

    def __contains__(self, query_id: str) -> bool:
        return query_id in self._relevant


def parse_qrels_lines(lines: Iterable[str], source: str = "<qrels>") -> Qrels:
    grades: dict[tuple[str, str], int] = {}
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise FormatError(f"{source}:{lineno}: expected 'qid iter docid rel', got {line.strip()!r}")
        qid, _, doc, rel = parts
        try:
            grade = int(rel)
        except ValueError:
            raise FormatError(f"{source}:{lineno}: relevance {rel!r} is not an integer") from None
        if grade < 0:
            raise FormatError(f"{source}:{lineno}: negative relevance grade {grade}")
        if (qid, doc) in grades:
            raise FormatError(f"{source}:{lineno}: duplicate judgement for ({qid}, {doc})")
        grades[(qid, doc)] = grade
    if not grades:
        raise FormatError(f"{source}: empty qrels")
    return Qrels(grades)


def parse_qrels(path: str | Path) -> Qrels:
    with open(path, encoding="utf-8") as f:
        return parse_qrels_lines(f, str(path))


def parse_run_lines(lines: Iterable[str], source: str = "<run>") -> dict[str, list[str]]:
    """Ranked doc ids per query, ordered by the rank column."""
    rows: dict[str, list[tuple[int, str]]] = {}
    seen: set[tuple[str, str]] = set()
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 6:
            raise FormatError(f"{source}:{lineno}: expected 'qid Q0 docid rank score tag', "
                              f"got {line.strip()!r}")
        qid, _, doc, rank, score, _ = parts
        try:
            r = int(rank)
            float(score)
        except ValueError:
            raise FormatError(f"{source}:{lineno}: bad rank or score in {line.strip()!r}") from None
        if (qid, doc) in seen:
            raise FormatError(f"{source}:{lineno}: document {doc} listed twice for query {qid}")
        seen.add((qid, doc))
        rows.setdefault(qid, []).append((r, doc))
    out = {}
    for qid, entries in rows.items():
        entries.sort()
        ranks = [r for r, _ in entries]
        if len(set(ranks)) != len(ranks):
            raise FormatError(f"{source}: query {qid} has repeated ranks")
        out[qid] = [d for _, d in entries]
    return out


def parse_run(path: str | Path) -> dict[str, list[str]]:
    with open(path, encoding="utf-8") as f:
        return parse_run_lines(f, str(path))


def _docs(ranked) -> Sequence[str]:
    return ranked.doc_ids() if hasattr(ranked, "doc_ids") else ranked


def average_precision(ranked, qrels: Qrels, query_id: str) -> float:
    rel = qrels.relevant(query_id)
    if not rel:
        raise ValueError(f"query {query_id} has no relevant documents")
    hits = 0
    total = 0.0
    for r, doc in enumerate(_docs(ranked), 1):
        if doc in rel:
            hits += 1
            total += hits / r
    return total / len(rel)


def reciprocal_rank(ranked, qrels: Qrels, query_id: str) -> float:
    rel = qrels.relevant(query_id)
    if not rel:
        raise ValueError(f"query {query_id} has no relevant documents")
    for r, doc in enumerate(_docs(ranked), 1):
        if doc in rel:
            return 1.0 / r
    return 0.0


def recall_at_k(ranked, qrels: Qrels, query_id: str, k: int = 1000) -> float:
    rel = qrels.relevant(query_id)
    if not rel:
        raise ValueError(f"query {query_id} has no relevant documents")
    found = sum(1 for doc in _docs(ranked)[:k] if doc in rel)
    return found / len(rel)


@dataclass(frozen=True)
class QueryMetrics:
    query_id: str
    ap: float
    rr: float
    recall: float
    n_relevant: int
    n_retrieved: int


@dataclass
class MetricReport:
    k: int
    per_query: list[QueryMetrics]
    no_relevant: list[str] = field(default_factory=list)
    not_judged: list[str] = field(default_factory=list)

    @property
    def n_queries(self) -> int:
        return len(self.per_query)

    def _mean(self, attr: str) -> float:
        return sum(getattr(m, attr) for m in self.per_query) / len(self.per_query)

    @property
    def map(self) -> float:
        return self._mean("ap")

    @property
    def mrr(self) -> float:
        return self._mean("rr")

    @property
    def recall(self) -> float:
        return self._mean("recall")

    def table(self) -> str:
        rk = f"R@{self.k}"
        lines = [f"{'query':<12} {'AP':>8} {'RR':>8} {rk:>8} {'rel':>6} {'ret':>6}"]
        for m in self.per_query:
            lines.append(f"{m.query_id:<12} {m.ap:8.4f} {m.rr:8.4f} {m.recall:8.4f} "
                         f"{m.n_relevant:6d} {m.n_retrieved:6d}")
        lines.append(f"{'all':<12} {self.map:8.4f} {self.mrr:8.4f} {self.recall:8.4f} "
                     f"{sum(m.n_relevant for m in self.per_query):6d} "
                     f"{sum(m.n_retrieved for m in self.per_query):6d}")
        lines.append(f"queries={self.n_queries} MAP={self.map:.4f} MRR={self.mrr:.4f} "
                     f"Recall@{self.k}={self.recall:.4f}")
        if self.no_relevant:
            lines.append(f"excluded (no relevant docs): {' '.join(self.no_relevant)}")
        if self.not_judged:
            lines.append(f"ignored (not in qrels): {' '.join(self.not_judged)}")
        return "\n".join(lines)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["query_id", "ap", "rr", f"recall_at_{self.k}", "n_relevant", "n_retrieved"])
            for m in self.per_query:
                w.writerow([m.query_id, repr(m.ap), repr(m.rr), repr(m.recall),
                            m.n_relevant, m.n_retrieved])
            w.writerow(["all", repr(self.map), repr(self.mrr), repr(self.recall),
                        sum(m.n_relevant for m in self.per_query),
                        sum(m.n_retrieved for m in self.per_query)])


def evaluate(runs: dict[str, Sequence[str]], qrels: Qrels, k: int = 1000) -> MetricReport:
    """Evaluate ranked doc-id lists against qrels.

    Only queries present in both the run and the qrels are scored; queries
    whose judgements hold no relevant document are excluded from the means.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    per_query, no_rel, unjudged = [], [], []
    for qid in sorted(runs):
        if qid not in qrels:
            log.warning("query %s is in the run but not in the qrels; ignored", qid)
            unjudged.append(qid)
            continue
        rel = qrels.relevant(qid)
        if not rel:
            no_rel.append(qid)
            continue
        docs = _docs(runs[qid])
        per_query.append(QueryMetrics(
            qid,
            average_precision(docs, qrels, qid),
            reciprocal_rank(docs, qrels, qid),
            recall_at_k(docs, qrels, qid, k),
            len(rel),
            len(docs),
        ))
    if not per_query:
        raise ValueError("nothing to evaluate: no run query has relevant judgements")
    return MetricReport(k, per_query, no_rel, unjudged)


def evaluate_run(path: str | Path, qrels: Qrels, k: int = 1000) -> MetricReport:
    return evaluate(parse_run(path), qrels, k)
