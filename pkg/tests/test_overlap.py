import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_graph
from displace.displacement import batch_reports
from displace.errors import UndefinedMetricError
from displace.overlap import (
    FieldTaxonomy,
    empirical_overlap,
    monte_carlo_overlap,
    null_overlap_fraction,
    null_overlap_probability,
)


def _overlap_by_enumeration(f, l):
    """Fraction of ordered pairs of l-subsets of range(f) that intersect."""
    subsets = [frozenset(s) for s in itertools.combinations(range(f), l)]
    hits = sum(1 for a in subsets for b in subsets if a & b)
    return Fraction(hits, len(subsets) ** 2)


def test_null_292_2_exact():
    assert null_overlap_fraction(292, 2) == Fraction(581, 42486)
    assert abs(null_overlap_probability(292, 2) - (1 - math.comb(290, 2) / math.comb(292, 2))) < 1e-15
    assert null_overlap_probability(292, 2) == pytest.approx(0.013675092971802477, abs=1e-15)


@pytest.mark.parametrize("f, l", [(2, 1), (5, 2), (6, 3), (7, 2), (4, 4), (8, 3), (5, 3)])
def test_null_matches_enumeration(f, l):
    assert null_overlap_fraction(f, l) == _overlap_by_enumeration(f, l)


def test_null_trivial_cases():
    assert null_overlap_probability(2, 1) == 0.5
    assert null_overlap_probability(7, 7) == 1.0


@pytest.mark.parametrize("f, l", [(0, 0), (3, 4), (5, 0), (2.5, 1), (True, 1)])
def test_null_invalid(f, l):
    with pytest.raises(ValueError):
        null_overlap_probability(f, l)


@given(st.integers(2, 400), st.integers(1, 6))
@settings(max_examples=80, deadline=None)
def test_null_monotone(f, l):
    if 2 * (l + 1) > f:
        return
    assert null_overlap_fraction(f + 1, l) < null_overlap_fraction(f, l)
    assert null_overlap_fraction(f, l + 1) > null_overlap_fraction(f, l)


def test_monte_carlo_within_three_standard_errors():
    p = null_overlap_probability(292, 2)
    n = 10**6
    freq = monte_carlo_overlap(292, 2, n, np.random.default_rng(2024))
    assert abs(freq - p) < 3 * math.sqrt(p * (1 - p) / n)


def test_monte_carlo_small_taxonomy():
    p = null_overlap_probability(6, 3)
    freq = monte_carlo_overlap(6, 3, 200_000, np.random.default_rng(1))
    assert abs(freq - p) < 4 * math.sqrt(p * (1 - p) / 200_000)


def _labelled_graph(fields_focal, fields_ref, extra_unlabeled=False):
    """One focal/reference pair per entry, each focal cited once so D0 = 1."""
    papers, edges = {}, []
    for n, (ff, fr) in enumerate(zip(fields_focal, fields_ref)):
        papers[f"R{n}"] = (1990, {"fields": fr})
        papers[f"F{n}"] = (2000, {"fields": ff})
        papers[f"C{n}"] = 2010
        edges += [(f"F{n}", f"R{n}"), (f"C{n}", f"F{n}")]
    return make_graph(papers, edges)


def test_empirical_half():
    g = _labelled_graph([(1, 2), (1,)], [(2, 3), (3,)])
    res = empirical_overlap(g, batch_reports(g), d_cutoff=0.21)
    assert (res.p_empirical, res.n_pairs, res.n_overlapping) == (0.5, 2, 1)
    assert res.p_null == null_overlap_probability(292, 2)
    assert res.ratio == 0.5 / res.p_null


def test_empirical_all_shared():
    g = _labelled_graph([(4, 5), (7,)], [(5, 4), (7,)])
    assert empirical_overlap(g, batch_reports(g)).p_empirical == 1.0


def test_unlabelled_pairs_counted_separately():
    g = _labelled_graph([(1,), (), (2,)], [(1,), (3,), ()])
    res = empirical_overlap(g, batch_reports(g))
    assert (res.n_pairs, res.n_unlabeled, res.p_empirical) == (1, 2, 1.0)


def test_cutoff_is_strict_and_errors_when_empty():
    g = _labelled_graph([(1,)], [(1,)])
    with pytest.raises(UndefinedMetricError):
        empirical_overlap(g, batch_reports(g), d_cutoff=1.0)


def test_custom_taxonomy():
    g = _labelled_graph([(1,)], [(2,)])
    res = empirical_overlap(g, batch_reports(g), taxonomy=FieldTaxonomy(f=2, l=1))
    assert res.p_null == 0.5 and res.p_empirical == 0.0


def test_label_permutation_invariance():
    rng = np.random.default_rng(5)
    ff = [tuple(rng.choice(10, size=rng.integers(1, 4), replace=False).tolist()) for _ in range(30)]
    fr = [tuple(rng.choice(10, size=rng.integers(1, 4), replace=False).tolist()) for _ in range(30)]
    perm = rng.permutation(10)
    g = _labelled_graph(ff, fr)
    h = _labelled_graph([tuple(int(perm[x]) for x in s) for s in ff], [tuple(int(perm[x]) for x in s) for s in fr])
    assert empirical_overlap(g, batch_reports(g)) == empirical_overlap(h, batch_reports(h))
