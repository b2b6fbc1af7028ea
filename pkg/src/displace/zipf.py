"""Zipf-Mandelbrot fits of a paper's reference citation curve.

The model is ``C_r = c / (b + r) ** a`` for references ranked ``r = 1..N``
by descending citation count. Its concentration ratio ``C_max / C_total``
tends to ``(a - 1) / (1 + b)`` when the sum is replaced by an integral.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import zeta

from .corpus import CitationGraph
from .errors import DivergentTailError, FitError

B_MAX = 100.0
B_STEP = 0.01
_B_GRID = np.linspace(0.0, B_MAX, int(round(B_MAX / B_STEP)) + 1)
_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ZipfFit:
    a: float
    b: float
    c: float
    n_refs: int
    r2_log: float
    ratio_empirical: float
    ratio_theoretical: float | None
    k_coefficient: float | None


def ratio_theoretical(a: float, b: float) -> float:
    """Large-N concentration ratio ``(a - 1) / (1 + b)``."""
    if b < 0:
        raise ValueError("b must be >= 0")
    if a <= 1:
        raise DivergentTailError(f"a = {a} <= 1: the tail integral diverges, no finite ratio")
    return (a - 1.0) / (1.0 + b)


def ratio_convergence_check(a: float, b: float, n_values) -> list[tuple[int, float]]:
    """Exact ``C_max / sum_{r<=N} C_r`` for each ``N`` by direct summation."""
    if a <= 1:
        raise DivergentTailError(f"a = {a} <= 1: the partial-sum ratio tends to zero")
    if b < 0:
        raise ValueError("b must be >= 0")
    ns = [int(n) for n in n_values]
    if any(n < 1 for n in ns):
        raise ValueError("N must be >= 1")
    if not ns:
        return []
    # scale by (b+1)^a so the first term is exactly 1
    r = np.arange(1, max(ns) + 1, dtype=np.float64)
    partial = np.cumsum(((b + 1.0) / (b + r)) ** a)
    return [(n, float(1.0 / partial[n - 1])) for n in ns]


def ratio_limit(a: float, b: float) -> float:
    """``N -> inf`` limit of :func:`ratio_convergence_check` via the Hurwitz zeta function."""
    if a <= 1:
        raise DivergentTailError(f"a = {a} <= 1")
    return float((b + 1.0) ** (-a) / zeta(a, b + 1.0))


@lru_cache(maxsize=64)
def _grid_design(n_ranks: int):
    """Centered ``log(b + r)`` for every grid ``b`` and its sum of squares."""
    x = np.log(_B_GRID[:, None] + np.arange(1, n_ranks + 1, dtype=np.float64)[None, :])
    dx = x - x.mean(axis=1, keepdims=True)
    dx.setflags(write=False)
    return dx, (dx * dx).sum(axis=1)


def _regress(x: np.ndarray, y: np.ndarray):
    """Row-wise least squares of ``y`` on each row of ``x``: (slope, intercept, sse)."""
    xm = x.mean(axis=-1, keepdims=True)
    ym = y.mean()
    dx = x - xm
    sxx = (dx * dx).sum(axis=-1)
    slope = (dx * (y - ym)).sum(axis=-1) / sxx
    intercept = ym - slope * xm[..., 0]
    resid = y - (intercept[..., None] + slope[..., None] * x)
    return slope, intercept, (resid * resid).sum(axis=-1)


def fit_zipf(citation_counts, drop_zeros: bool = False) -> ZipfFit:
    """Fit ``(a, b, c)`` to per-reference citation counts.

    Counts are ranked in descending order. For every ``b`` on a 0.01 grid
    over ``[0, 100]``, ``log C_r`` is regressed on ``log(b + r)`` in closed
    form; the best grid point is then refined by golden-section search
    within one grid step. Zero-count references keep their rank but carry no
    residual (their log is undefined); ``drop_zeros`` removes them from
    ``n_refs`` as well.
    """
    counts = np.sort(np.asarray(citation_counts, dtype=np.float64))[::-1]
    if np.any(counts < 0):
        raise ValueError("citation counts must be >= 0")
    if drop_zeros:
        counts = counts[counts > 0]
    if len(counts) < 3:
        raise FitError(f"too few references ({len(counts)}); need at least 3")
    positive = counts > 0
    if len(np.unique(counts[positive])) < 2:
        raise FitError("degenerate rank curve: fewer than two distinct positive counts")

    # counts are descending, so the positive ones occupy ranks 1..n_pos
    n_pos = int(positive.sum())
    ranks = np.arange(1, n_pos + 1, dtype=np.float64)
    y = np.log(counts[:n_pos])
    dx, sxx = _grid_design(n_pos)
    yc = y - y.mean()
    sxy = dx @ yc
    sse = float(yc @ yc) - sxy * sxy / sxx
    best = int(np.argmin(sse))

    def objective(b):
        return float(_regress(np.log(b + ranks)[None, :], y)[2][0])

    lo, hi = max(0.0, _B_GRID[best] - B_STEP), min(B_MAX, _B_GRID[best] + B_STEP)
    b_hat, f_hat = _golden(objective, lo, hi)
    if f_hat > sse[best]:
        b_hat = float(_B_GRID[best])
    slope, intercept, sse_hat = (float(v[0]) for v in _regress(np.log(b_hat + ranks)[None, :], y))
    a = -slope
    sst = float(((y - y.mean()) ** 2).sum())
    with np.errstate(over="ignore"):
        c = float(np.exp(intercept))
    total = counts.sum()
    ratio_emp = float(counts[0] / total)
    if a > 1:
        rt = ratio_theoretical(a, b_hat)
        k = 1.0 / rt
    else:
        rt = k = None
    return ZipfFit(
        a=a,
        b=b_hat,
        c=c,
        n_refs=len(counts),
        r2_log=1.0 - sse_hat / sst if sst > 0 else 1.0,
        ratio_empirical=ratio_emp,
        ratio_theoretical=rt,
        k_coefficient=k,
    )


def _golden(f, lo, hi, tol=1e-9, max_iter=200):
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    x = (a + b) / 2.0
    return x, f(x)


def reference_citation_counts(graph: CitationGraph, paper: int) -> np.ndarray:
    """In-corpus citation counts of a paper's references, descending."""
    return np.sort(graph.citation_counts[graph.references(paper)])[::-1]


def sample_fits(graph: CitationGraph, n_sample: int, seed: int, min_refs: int = 3):
    """Fit a random sample of papers with at least ``min_refs`` references.

    Returns ``(paper_ids, fits)``; papers whose curve cannot be fitted are
    skipped. Sampling is without replacement and reproducible from ``seed``.
    """
    pool = np.flatnonzero(graph.reference_counts >= min_refs)
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(pool, size=min(n_sample, len(pool)), replace=False)) if len(pool) else pool
    ids, fits = [], []
    for p in chosen:
        try:
            fits.append(fit_zipf(reference_citation_counts(graph, int(p))))
        except FitError:
            continue
        ids.append(int(p))
    return ids, fits
