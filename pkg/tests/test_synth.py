import numpy as np
import pytest

from displace.displacement import approx_d, decompose
from displace.synth import approximation_family, zipf_counts


@pytest.mark.parametrize("n_refs", [1, 5, 60])
@pytest.mark.parametrize("b_f", [1, 10, 100])
def test_family_hits_targets_exactly(n_refs, b_f):
    r = decompose(approximation_family(np.random.default_rng(n_refs), n_refs, b_f), 0)
    assert r.d_f == pytest.approx(0.01, abs=1e-12)
    assert r.b_f == pytest.approx(b_f, abs=1e-12)
    assert r.c_f == 200 and r.n_references == n_refs and r.top_reference == 1


def test_full_nesting_makes_error_independent_of_length():
    # every lesser-reference citer also cites the top reference, so
    # N_k = c_max - 1 - N_j whatever the reference count
    errs = set()
    for n in (5, 50, 200):
        r = decompose(approximation_family(np.random.default_rng(n), n, 10, nesting=1.0), 0)
        errs.add(round(abs(r.d0 - approx_d(r.d_f, r.b_f)), 15))
    assert len(errs) == 1
    # D0 = 0.01 / (1 + (2000 - 1 - 99) / 200)
    r = decompose(approximation_family(np.random.default_rng(0), 20, 10, nesting=1.0), 0)
    assert r.d0 == pytest.approx(0.01 / (1 + 1900 / 200), abs=1e-15)


def test_partial_nesting_grows_type_k_with_length():
    short = decompose(approximation_family(np.random.default_rng(1), 5, 10, nesting=0.5), 0)
    long = decompose(approximation_family(np.random.default_rng(1), 200, 10, nesting=0.5), 0)
    assert long.r_k > short.r_k


def test_family_rejects_unreachable_targets():
    with pytest.raises(ValueError):
        approximation_family(np.random.default_rng(0), 10, 1, d_f=0.003)
    with pytest.raises(ValueError):
        approximation_family(np.random.default_rng(0), 10, 0.2)


def test_zipf_counts_descending():
    c = zipf_counts(2.0, 1.4, 100.0, 30, np.random.default_rng(0), 0.3)
    assert np.all(np.diff(c) <= 0)
