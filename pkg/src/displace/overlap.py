"""Field-label overlap between displacing papers and their anchors.

Under the null model two papers each carry ``l`` labels drawn uniformly
without replacement from ``f``; they overlap with probability
``1 - C(f - l, l) / C(f, l)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from .corpus import CitationGraph
from .displacement import DisplacementReport
from .errors import UndefinedMetricError


@dataclass(frozen=True)
class FieldTaxonomy:
    f: int = 292
    l: int = 2

    def __post_init__(self):
        _check(self.f, self.l)


@dataclass(frozen=True)
class OverlapResult:
    p_empirical: float
    p_null: float
    ratio: float
    n_pairs: int
    n_overlapping: int
    n_unlabeled: int

    def to_dict(self) -> dict:
        return dict(vars(self))


def _check(f, l):
    if isinstance(f, bool) or isinstance(l, bool) or int(f) != f or int(l) != l:
        raise ValueError("f and l must be integers")
    if not 1 <= l <= f:
        raise ValueError(f"need 1 <= l <= f, got f={f}, l={l}")


def null_overlap_fraction(f: int, l: int) -> Fraction:
    """Exact null overlap probability as a fraction."""
    _check(f, l)
    f, l = int(f), int(l)
    # C(f - l, l) is zero when f < 2l: the two label sets must then intersect
    return 1 - Fraction(math.comb(f - l, l), math.comb(f, l))


def null_overlap_probability(f: int = 292, l: int = 2) -> float:
    """Probability that two uniformly random ``l``-subsets of ``f`` labels intersect.

    >>> round(null_overlap_probability(292, 2), 9)
    0.013675093
    >>> null_overlap_probability(2, 1)
    0.5
    """
    return float(null_overlap_fraction(f, l))


def _random_subsets(rng: np.random.Generator, n: int, f: int, l: int) -> np.ndarray:
    """``n`` rows of ``l`` distinct labels in ``[0, f)``, redrawing rows with repeats."""
    out = rng.integers(0, f, size=(n, l))
    bad = np.arange(n)
    while True:
        rows = np.sort(out[bad], axis=1)
        bad = bad[(np.diff(rows, axis=1) == 0).any(axis=1)]
        if not len(bad):
            return out
        out[bad] = rng.integers(0, f, size=(len(bad), l))


def monte_carlo_overlap(f: int, l: int, n_draws: int, rng: np.random.Generator, batch: int = 250_000) -> float:
    """Frequency of intersecting label sets over ``n_draws`` simulated pairs."""
    _check(f, l)
    hits = 0
    for start in range(0, n_draws, batch):
        n = min(batch, n_draws - start)
        a = _random_subsets(rng, n, f, l)
        b = _random_subsets(rng, n, f, l)
        hits += int((a[:, :, None] == b[:, None, :]).any(axis=(1, 2)).sum())
    return hits / n_draws


def empirical_overlap(
    graph: CitationGraph,
    reports: Iterable[DisplacementReport],
    d_cutoff: float = 0.21,
    taxonomy: FieldTaxonomy | None = None,
    variant: str = "D0",
) -> OverlapResult:
    """Share of (focal, top reference) pairs with ``D > d_cutoff`` whose field sets intersect.

    Pairs where either paper has no labels are left out and counted in
    ``n_unlabeled``.

    Raises
    ------
    UndefinedMetricError
        If no labelled pair passes the cutoff.
    """
    taxonomy = taxonomy or FieldTaxonomy()
    n_pairs = n_hits = n_unlabeled = 0
    for r in reports:
        value = r.value(variant)
        if value is None or not value > d_cutoff:
            continue
        a, b = graph.fields(r.focal), graph.fields(r.top_reference)
        if len(a) == 0 or len(b) == 0:
            n_unlabeled += 1
            continue
        n_pairs += 1
        n_hits += bool(np.intersect1d(a, b, assume_unique=True).size)
    if n_pairs == 0:
        raise UndefinedMetricError(f"no labelled pairs with {variant} > {d_cutoff}")
    p_emp = n_hits / n_pairs
    p_null = null_overlap_probability(taxonomy.f, taxonomy.l)
    return OverlapResult(
        p_empirical=p_emp,
        p_null=p_null,
        ratio=p_emp / p_null,
        n_pairs=n_pairs,
        n_overlapping=n_hits,
        n_unlabeled=n_unlabeled,
    )
