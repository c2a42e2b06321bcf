"""Per-term 2-Poisson eliteness mixture fitted by EM.

For each term the collection-wide tf values are modelled as

    P(tf) = p * Pois(tf; mu_elite) + (1 - p) * Pois(tf; mu_nonelite)

and fitted by maximum likelihood over *all* N documents, the tf=0 bucket
included. Everything works on the term's tf histogram, so one EM iteration
costs O(distinct tf values) rather than O(N).

The ``1/tf!`` factor is common to both components. It cancels in the
posterior and is dropped from every log-likelihood reported here, so traces
are only comparable within one configuration. ``xlogy`` gives the
``0**0 == 1`` convention, which makes ``mu_nonelite == 0`` a legal (if
degenerate) parameter value.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import xlogy

from .corpus import CorpusIndex, TfHistogram, tf_histogram

log = logging.getLogger(__name__)

MODEL_FORMAT = "eliteness-model"
MODEL_VERSION = 1


class EMError(ArithmeticError):
    """EM produced a non-finite density or likelihood."""


class ModelBindingError(ValueError):
    """A model was used with an index it was not fitted on."""


@dataclass(frozen=True)
class TwoPoissonParams:
    mu_elite: float
    mu_nonelite: float
    p_elite: float

    def __post_init__(self):
        if not (self.mu_elite >= 0 and self.mu_nonelite >= 0):
            raise ValueError(f"Poisson means must be non-negative: {self}")
        if not 0 < self.p_elite <= 1:
            raise ValueError(f"p_elite must lie in (0, 1]: {self}")

    def swapped(self) -> TwoPoissonParams:
        return TwoPoissonParams(self.mu_nonelite, self.mu_elite, 1.0 - self.p_elite)


@dataclass(frozen=True)
class EMConfig:
    max_iters: int = 100
    tol: float = 1e-6
    n_boost: float = 3
    mu0_init: float = 1e-3
    mu_floor: float = 1e-9
    p_clamp: float = 1e-6

    def __post_init__(self):
        for name in ("max_iters", "tol", "n_boost", "mu0_init", "mu_floor", "p_clamp"):
            if not getattr(self, name) > 0:
                raise ValueError(f"EMConfig.{name} must be positive")
        if int(self.max_iters) != self.max_iters:
            raise ValueError("EMConfig.max_iters must be an integer")
        if self.tol >= 1:
            raise ValueError("EMConfig.tol must be < 1")
        if self.p_clamp >= 0.5:
            raise ValueError("EMConfig.p_clamp must be < 0.5")

    def clamp_p(self, p: float) -> float:
        return min(max(p, self.p_clamp), 1.0 - self.p_clamp)


@dataclass(frozen=True)
class FitResult:
    term: str
    params: TwoPoissonParams | None
    iterations: int
    loglik_trace: tuple[float, ...] = ()
    converged: bool = False
    swapped: bool = False
    init_fallback: bool = False
    collapsed: bool = False
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.params is None

    def is_clamped(self, cfg: EMConfig) -> bool:
        if self.params is None:
            return False
        p = self.params.p_elite
        return self.collapsed or p <= cfg.p_clamp or p >= 1.0 - cfg.p_clamp


# -- densities ---------------------------------------------------------------

def _log_joint(params: TwoPoissonParams, t):
    """log p*Pois(t; mu1) and log (1-p)*Pois(t; mu0), both without 1/t!."""
    p = params.p_elite
    la = math.log(p) - params.mu_elite + xlogy(t, params.mu_elite)
    lb = (math.log1p(-p) if p < 1 else -math.inf) - params.mu_nonelite + xlogy(t, params.mu_nonelite)
    return la, lb


def log_ratio(params: TwoPoissonParams, t):
    """log Pois(t; mu0) - log Pois(t; mu1), taken directly so large tf keeps precision."""
    with np.errstate(invalid="ignore"):  # both means zero gives nan, reported by callers
        return (params.mu_elite - params.mu_nonelite
                + xlogy(t, params.mu_nonelite) - xlogy(t, params.mu_elite))


def log_posterior(params: TwoPoissonParams, tf, term: str | None = None):
    """Log of P(elite | tf) and P(non-elite | tf), computed in log space.

    Both come from the prior odds times the likelihood ratio, so a posterior
    that saturates at 1 yields exactly 0 rather than rounding noise.
    """
    p = params.p_elite
    r = log_ratio(params, tf)
    if np.any(np.isnan(r)):
        bad = np.asarray(tf)[np.isnan(r)] if np.ndim(r) else tf
        raise EMError(f"mixture density underflows for term {term!r} at tf={bad} "
                      f"with {params}")
    if p >= 1:
        zero = np.zeros_like(r, dtype=np.float64) + 0.0  # "+ 0.0" turns 0-d arrays into scalars
        return zero, zero - np.inf
    x = math.log1p(-p) - math.log(p) + r
    return -np.logaddexp(0.0, x), -np.logaddexp(0.0, -x)


def e_step(params: TwoPoissonParams, tf, term: str | None = None):
    """Posterior probability of eliteness given tf (scalar or array).

    tf may be real-valued: the tf! factor cancels in the ratio.
    """
    lp, _ = log_posterior(params, tf, term)
    return np.exp(lp)


def log_mixture_density(params: TwoPoissonParams, tf):
    la, lb = _log_joint(params, tf)
    return np.logaddexp(la, lb)


def _as_buckets(hist) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(hist, TfHistogram):
        return hist.buckets()
    values, counts = hist
    return np.asarray(values, dtype=np.float64), np.asarray(counts, dtype=np.float64)


def log_likelihood(params: TwoPoissonParams, hist) -> float:
    """Total log-likelihood over all documents, factorial term omitted.

    ``hist`` is a TfHistogram or a ``(values, counts)`` pair.
    """
    v, c = _as_buckets(hist)
    return float(np.dot(c, log_mixture_density(params, v)))


# -- EM ----------------------------------------------------------------------

def init_params(hist: TfHistogram, cfg: EMConfig | None = None) -> TwoPoissonParams:
    """Data-driven starting point.

    p is the fraction of documents containing the term; mu_elite is
    ``n_boost`` times the mean tf over documents where tf > 1 (or over all
    documents containing the term if there are none); mu_nonelite starts
    at the small value ``mu0_init``.
    """
    cfg = cfg or EMConfig()
    n = hist.n_docs
    df = hist.df
    if df < 1:
        raise ValueError(f"term {hist.term!r} has df=0; nothing to fit")
    p = cfg.clamp_p(df / n)
    many = hist.values > 1
    if many.any():
        mean = float(np.dot(hist.values[many], hist.counts[many])) / float(hist.counts[many].sum())
    else:
        mean = float(np.dot(hist.values, hist.counts)) / df
    return TwoPoissonParams(cfg.n_boost * mean, cfg.mu0_init, p)


def _m_step(g1, g0, v, c, cfg: EMConfig) -> tuple[TwoPoissonParams, bool]:
    w1 = float(np.dot(c, g1))
    w0 = float(np.dot(c, g0))
    n = float(c.sum())
    collapsed = w1 <= 0.0 or w0 <= 0.0
    mu1 = float(np.dot(c * g1, v)) / w1 if w1 > 0 else cfg.mu_floor
    mu0 = float(np.dot(c * g0, v)) / w0 if w0 > 0 else cfg.mu_floor
    params = TwoPoissonParams(max(mu1, cfg.mu_floor), max(mu0, cfg.mu_floor),
                              cfg.clamp_p(w1 / n))
    return params, collapsed


def m_step(gamma, hist, cfg: EMConfig | None = None) -> TwoPoissonParams:
    """Re-estimate the parameters from per-bucket responsibilities.

    ``gamma`` holds P(elite | tf) for each bucket of ``hist`` in the order
    returned by ``TfHistogram.buckets()`` (tf=0 bucket first).
    """
    cfg = cfg or EMConfig()
    v, c = _as_buckets(hist)
    g1 = np.asarray(gamma, dtype=np.float64)
    if g1.shape != v.shape:
        raise ValueError(f"need one responsibility per bucket ({len(v)}), got {g1.shape}")
    if np.any((g1 < 0) | (g1 > 1)):
        raise ValueError("responsibilities must lie in [0, 1]")
    return _m_step(g1, 1.0 - g1, v, c, cfg)[0]


def em_fit(hist: TfHistogram, cfg: EMConfig | None = None,
           init: TwoPoissonParams | None = None) -> FitResult:
    """Fit one term's mixture.

    Stops when the per-document mean log-likelihood moves by less than
    ``cfg.tol`` or after ``cfg.max_iters`` iterations. ``loglik_trace[0]``
    is the likelihood at the starting point, followed by one entry per
    iteration. Components are reordered at the end so that
    ``mu_elite >= mu_nonelite``.
    """
    cfg = cfg or EMConfig()
    term = hist.term
    v, c = hist.buckets()
    n = float(c.sum())
    fallback = not bool(np.any(hist.values > 1))
    params = init if init is not None else init_params(hist, cfg)

    ll = float(np.dot(c, log_mixture_density(params, v)))
    if not math.isfinite(ll):
        raise EMError(f"term {term!r}: non-finite log-likelihood at initialisation ({params})")
    trace = [ll]
    converged = collapsed = False
    it = 0
    while it < cfg.max_iters:
        it += 1
        lg1, lg0 = log_posterior(params, v, term)
        params, collapsed = _m_step(np.exp(lg1), np.exp(lg0), v, c, cfg)
        new_ll = float(np.dot(c, log_mixture_density(params, v)))
        if not math.isfinite(new_ll):
            raise EMError(f"term {term!r}: non-finite log-likelihood at iteration {it} ({params})")
        trace.append(new_ll)
        if collapsed:
            break
        if abs(new_ll - ll) / n < cfg.tol:
            converged = True
            break
        ll = new_ll

    swapped = params.mu_elite < params.mu_nonelite
    if swapped:
        params = params.swapped()
    return FitResult(term, params, it, tuple(trace), converged, swapped, fallback, collapsed)


def _fit_term(hist: TfHistogram, cfg: EMConfig) -> FitResult:
    try:
        return em_fit(hist, cfg)
    except (EMError, ValueError, FloatingPointError) as e:
        log.warning("fit failed for term %r: %s", hist.term, e)
        return FitResult(hist.term, None, 0, error=str(e))


def _fit_chunk(args) -> list[FitResult]:
    hists, cfg = args
    return [_fit_term(h, cfg) for h in hists]


# -- model -------------------------------------------------------------------

@dataclass(frozen=True)
class FitReport:
    n_terms: int
    converged: int
    clamped: int
    failed: int

    def __str__(self):
        return (f"terms={self.n_terms} converged={self.converged} "
                f"clamped={self.clamped} failed={self.failed}")


@dataclass
class ElitenessModel:
    """Fitted parameters for every vocabulary term of one index."""

    fits: dict[str, FitResult]
    n_docs: int
    corpus_hash: str
    config: EMConfig = field(default_factory=EMConfig)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __len__(self):
        return len(self.fits)

    def params(self, term: str) -> TwoPoissonParams | None:
        fit = self.fits.get(term)
        return None if fit is None else fit.params

    def report(self) -> FitReport:
        fits = self.fits.values()
        return FitReport(
            n_terms=len(self.fits),
            converged=sum(f.converged for f in fits),
            clamped=sum(f.is_clamped(self.config) for f in fits),
            failed=sum(f.failed for f in fits),
        )

    def check_binding(self, index: CorpusIndex) -> None:
        if self.n_docs != index.N or self.corpus_hash != index.fingerprint():
            raise ModelBindingError(
                f"model was fitted on corpus {self.corpus_hash} (N={self.n_docs}), "
                f"not on this index {index.fingerprint()} (N={index.N})")

    def save(self, path: str | Path) -> None:
        cfg = self.config
        header = [f"#{MODEL_FORMAT}", f"version={MODEL_VERSION}", f"N={self.n_docs}",
                  f"corpus={self.corpus_hash}", f"max_iters={cfg.max_iters}",
                  f"tol={cfg.tol!r}", f"n_boost={cfg.n_boost!r}",
                  f"mu0_init={cfg.mu0_init!r}", f"mu_floor={cfg.mu_floor!r}",
                  f"p_clamp={cfg.p_clamp!r}"]
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("\t".join(header) + "\n")
            for term in sorted(self.fits):
                fit = self.fits[term]
                if fit.params is None:
                    nums = ["nan", "nan", "nan"]
                else:
                    pr = fit.params
                    nums = [format(x, ".17g") for x in (pr.mu_elite, pr.mu_nonelite, pr.p_elite)]
                f.write("\t".join([term, *nums, str(int(fit.converged)),
                                   str(fit.iterations)]) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> ElitenessModel:
        with open(path, encoding="utf-8") as f:
            lines = f.read().splitlines()
        if not lines or not lines[0].startswith(f"#{MODEL_FORMAT}"):
            raise ValueError(f"{path}: not a model file")
        meta = dict(kv.split("=", 1) for kv in lines[0].split("\t")[1:])
        if int(meta["version"]) != MODEL_VERSION:
            raise ValueError(f"{path}: unsupported model version {meta['version']}")
        n_boost = float(meta["n_boost"])
        cfg = EMConfig(max_iters=int(meta["max_iters"]), tol=float(meta["tol"]),
                       n_boost=int(n_boost) if n_boost.is_integer() else n_boost,
                       mu0_init=float(meta["mu0_init"]), mu_floor=float(meta["mu_floor"]),
                       p_clamp=float(meta["p_clamp"]))
        fits = {}
        for lineno, line in enumerate(lines[1:], 2):
            parts = line.split("\t")
            if len(parts) != 6:
                raise ValueError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
            term, mu1, mu0, p, conv, iters = parts
            vals = [float(mu1), float(mu0), float(p)]
            params = None if any(math.isnan(x) for x in vals) else TwoPoissonParams(*vals)
            fits[term] = FitResult(term, params, int(iters), converged=conv == "1",
                                   error=None if params else "failed")
        return cls(fits, int(meta["N"]), meta["corpus"], cfg)


def fit_model(index: CorpusIndex, cfg: EMConfig | None = None, workers: int = 1) -> ElitenessModel:
    """Fit every vocabulary term independently.

    With ``workers > 1`` terms are fitted in a process pool; results are
    assembled in vocabulary order and are bit-identical to a sequential fit.
    A term whose fit fails is kept with ``params=None`` and skipped by the
    scorers.
    """
    cfg = cfg or EMConfig()
    hists = [tf_histogram(index, t) for t in index.terms]
    if workers > 1 and len(hists) > 1:
        size = max(1, math.ceil(len(hists) / (workers * 4)))
        chunks = [(hists[i:i + size], cfg) for i in range(0, len(hists), size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = [r for chunk in pool.map(_fit_chunk, chunks) for r in chunk]
    else:
        results = [_fit_term(h, cfg) for h in hists]
    return ElitenessModel({r.term: r for r in results}, index.N, index.fingerprint(), cfg)


def occurrence_model(index: CorpusIndex) -> ElitenessModel:
    """Degenerate model in which a term is elite exactly when it occurs.

    mu_nonelite = 0 makes P(elite | tf > 0) = 1, and p = df/N. Under this
    model the logical-inclusion scorer reduces to summed log(N/df).
    """
    fits = {}
    for term in index.terms:
        df = index.df(term)
        params = TwoPoissonParams(index.cf(term) / df, 0.0, df / index.N)
        fits[term] = FitResult(term, params, 0, converged=True)
    return ElitenessModel(fits, index.N, index.fingerprint(), EMConfig())


def with_params(model: ElitenessModel, params: dict[str, TwoPoissonParams]) -> ElitenessModel:
    """Copy of ``model`` with some terms' parameters replaced."""
    fits = dict(model.fits)
    for term, pr in params.items():
        fits[term] = replace(fits.get(term) or FitResult(term, pr, 0), params=pr)
    return ElitenessModel(fits, model.n_docs, model.corpus_hash, model.config)
