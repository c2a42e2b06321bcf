"""Command-line entry point: index, fit, search, eval, sweep.

Defaults can be overridden through ``ELITENESS_*`` environment variables
(``ELITENESS_B``, ``ELITENESS_N_BOOST``, ``ELITENESS_TOP_K`` ...); an
explicit flag always wins.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from pathlib import Path

from . import synthetic
from .baselines import BM25Config, LMConfig
from .corpus import CorpusIndex, TokenizerConfig, build_index, read_documents
from .evaluation import evaluate, parse_qrels, parse_run
from .mixture import EMConfig, ElitenessModel, fit_model
from .ranking import ELITENESS_SCORERS, SCORERS, make_query, rank, read_topics, write_run

ENV_PREFIX = "ELITENESS_"
log = logging.getLogger("eliteness")


def _env(name: str, default, cast=str):
    raw = os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"))
    if raw is None:
        return default
    try:
        return cast(raw)
    except ValueError:
        raise SystemExit(f"error: bad value {raw!r} for {ENV_PREFIX}{name.upper()}") from None


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _require(*paths):
    for p in paths:
        if p is not None and not Path(p).is_file():
            raise FileNotFoundError(f"no such file: {p}")


def _em_config(args) -> EMConfig:
    return EMConfig(max_iters=args.max_iters, tol=args.tol, n_boost=args.n_boost)


def _load_stopwords(path) -> frozenset[str]:
    if path is None:
        return frozenset()
    _require(path)
    with open(path, encoding="utf-8") as f:
        return frozenset(w.strip().lower() for w in f if w.strip())


# subcommands

def cmd_index(args) -> int:
    _require(args.input)
    cfg = TokenizerConfig(lowercase=not args.no_lowercase,
                          stopwords=_load_stopwords(args.stopwords))
    index = build_index(read_documents(args.input, args.format), cfg)
    index.save(args.out)
    print(f"N={index.N} vocab={len(index.terms)} avgDL={index.avg_doc_len:.6f}")
    return 0


def cmd_fit(args) -> int:
    _require(args.index)
    index = CorpusIndex.load(args.index)
    start = time.perf_counter()
    model = fit_model(index, _em_config(args), workers=args.workers)
    elapsed = time.perf_counter() - start
    model.save(args.out)
    print(f"{model.report()} corpus={model.corpus_hash}")
    print(f"wall_time={elapsed:.2f}s", file=sys.stderr)
    for term, fit in model.fits.items():
        if fit.failed:
            print(f"failed: {term}: {fit.error}", file=sys.stderr)
    return 0


def _search(index, model, topics, args):
    runs = []
    for qid, text in topics:
        q = make_query(qid, text, index)
        if q.unknown_terms:
            log.warning("query %s: terms not in the index: %s", qid, " ".join(q.unknown_terms))
        rl = rank(q, index, model, args.scorer, args.b, args.top_k,
                  bm25_cfg=BM25Config(args.k1, args.bm25_b),
                  lm_cfg=LMConfig("jm" if args.scorer == "lm-jm" else "dirichlet",
                                  args.lam, args.mu))
        if rl.skipped_terms:
            log.warning("query %s: %d term(s) without a usable fit skipped",
                        qid, len(rl.skipped_terms))
        runs.append(rl)
    return runs


def cmd_search(args) -> int:
    _require(args.index, args.topics, args.model)
    index = CorpusIndex.load(args.index)
    model = None
    if args.scorer in ELITENESS_SCORERS:
        if args.model is None:
            raise ValueError(f"--model is required for scorer {args.scorer!r}")
        model = ElitenessModel.load(args.model)
        model.check_binding(index)
    runs = _search(index, model, read_topics(args.topics, args.topics_format), args)
    with open(args.run, "w", encoding="utf-8", newline="\n") as f:
        write_run(runs, f, args.tag)
    print(f"queries={len(runs)} lines={sum(len(r) for r in runs)} scorer={args.scorer}")
    return 0


def cmd_eval(args) -> int:
    _require(args.run, args.qrels)
    report = evaluate(parse_run(args.run), parse_qrels(args.qrels), args.metric_k)
    print(report.table())
    if args.out:
        report.write_csv(args.out)
    return 0


def cmd_sweep(args) -> int:
    _require(args.index, args.topics, args.qrels)
    b_grid, n_grid = _floats(args.b_grid), _floats(args.n_grid)
    if not b_grid or not n_grid:
        raise ValueError("sweep grid is empty")
    index = CorpusIndex.load(args.index)
    topics = read_topics(args.topics, args.topics_format)
    qrels = parse_qrels(args.qrels)
    rows = []
    for n in n_grid:
        n_boost = int(n) if float(n).is_integer() else n
        cfg = EMConfig(max_iters=args.max_iters, tol=args.tol, n_boost=n_boost)
        model = fit_model(index, cfg, workers=args.workers) if args.scorer in ELITENESS_SCORERS else None
        for b in b_grid:
            args.b = b
            runs = _search(index, model, topics, args)
            report = evaluate({rl.query_id: rl.doc_ids() for rl in runs}, qrels, args.metric_k)
            rows.append((b, n_boost, report.map, report.mrr, report.recall))
            print(f"b={b:g} n={n_boost} MAP={report.map:.4f} MRR={report.mrr:.4f} "
                  f"R@{args.metric_k}={report.recall:.4f}")
    with open(args.out, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["b", "n", "map", "mrr", "recall_at_k"])
        for b, n, m, r, rec in rows:
            w.writerow([repr(b), n, repr(m), repr(r), repr(rec)])
    return 0


def cmd_synth(args) -> int:
    synthetic.write_fixture(args.out, n_docs=args.docs, n_terms=args.terms,
                            n_queries=args.queries, n_verbose=args.verbose_docs,
                            seed=args.seed)
    print(f"wrote synthetic fixture to {args.out}")
    return 0


# parser

def _add_em(p):
    p.add_argument("--n-boost", type=float, default=_env("n_boost", 3, float),
                   help="multiplier on the initial elite mean (default 3)")
    p.add_argument("--max-iters", type=int, default=_env("max_iters", 100, int))
    p.add_argument("--tol", type=float, default=_env("tol", 1e-6, float),
                   help="stop when the mean per-document log-likelihood moves less than this")
    p.add_argument("--workers", type=int, default=_env("workers", 1, int),
                   help="processes for per-term fitting")


def _add_search(p):
    p.add_argument("--index", required=True)
    p.add_argument("--topics", required=True, help="JSON lines with 'qid' and 'text'")
    p.add_argument("--topics-format", choices=("jsonl", "trec"), default="jsonl")
    p.add_argument("--scorer", choices=SCORERS, default=_env("scorer", "final"))
    p.add_argument("--b", type=float, default=_env("b", 0.64, float),
                   help="length normalization strength in [0, 1] (default 0.64)")
    p.add_argument("--top-k", type=int, default=_env("top_k", 1000, int))
    p.add_argument("--k1", type=float, default=_env("k1", 1.2, float), help="BM25 k1")
    p.add_argument("--bm25-b", type=float, default=_env("bm25_b", 0.75, float), help="BM25 b")
    p.add_argument("--lambda", dest="lam", type=float, default=_env("lambda", 0.7, float),
                   help="Jelinek-Mercer weight on the collection model")
    p.add_argument("--mu", type=float, default=_env("mu", 2000.0, float), help="Dirichlet prior mass")
    p.add_argument("--tag", default="eliteness", help="run tag column")


def _fix_n_boost(args):
    if hasattr(args, "n_boost") and float(args.n_boost).is_integer():
        args.n_boost = int(args.n_boost)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eliteness",
                                     description="2-Poisson eliteness retrieval toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="{index,fit,search,eval,sweep}")

    p = sub.add_parser("index", help="build an index from a document collection")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("jsonl", "trec"), default="jsonl")
    p.add_argument("--stopwords", help="file with one stopword per line")
    p.add_argument("--no-lowercase", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("fit", help="fit the per-term 2-Poisson model")
    p.add_argument("--index", required=True)
    _add_em(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("search", help="rank documents for a topics file")
    _add_search(p)
    p.add_argument("--model")
    p.add_argument("--run", "--out", dest="run", required=True)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("eval", help="MAP / MRR / Recall@k of a run")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--metric-k", type=int, default=_env("metric_k", 1000, int))
    p.add_argument("--out", help="write per-query metrics as CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="grid over b and n_boost")
    _add_search(p)
    _add_em(p)
    p.add_argument("--qrels", required=True)
    p.add_argument("--b-grid", default="0,0.25,0.5,0.64,0.75,1")
    p.add_argument("--n-grid", default="3")
    p.add_argument("--metric-k", type=int, default=_env("metric_k", 1000, int))
    p.add_argument("--out", required=True, help="CSV output")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--docs", type=int, default=500)
    p.add_argument("--terms", type=int, default=30)
    p.add_argument("--queries", type=int, default=10)
    p.add_argument("--verbose-docs", type=int, default=0)
    p.add_argument("--seed", type=int, default=_env("seed", 0, int))
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    _fix_n_boost(args)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, ArithmeticError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
