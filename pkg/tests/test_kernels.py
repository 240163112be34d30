"""Tests for binomial primitives, adoption curves, and step kernels.

scipy.stats.binom serves as the independent oracle for every binomial
quantity; adoption curves are cross-checked against explicit polynomials
for small j and against direct tail sums for larger j.
"""

import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from majority_lab.core import (
    CapacityError,
    DomainError,
    ModelKind,
    ProcessSpec,
    ValidationError,
)
from majority_lab.kernels import (
    adoption_gap,
    adoption_probability,
    binom_cdf,
    binom_pmf,
    binom_pmf_row,
    check_adoption_gap_identity,
    check_adoption_pair_identity,
    check_drift_closed_form,
    check_ruin_ratio,
    gossip_kernel,
    make_kernel,
    minority_drift_rate,
    ruin_ratio,
    sequential_kernel,
)


# ---------------------------------------------------------------------------
# binomial primitives


@given(st.integers(min_value=0, max_value=200),
       st.floats(min_value=0.0, max_value=1.0, allow_subnormal=False))
@settings(max_examples=120, deadline=None)
def test_binom_pmf_matches_scipy(m, p):
    k = m // 2
    ours = binom_pmf(m, p, k)
    ref = scipy.stats.binom.pmf(k, m, p)
    assert ours == pytest.approx(ref, abs=1e-12)


def test_binom_pmf_row_sums_to_one():
    for m in (0, 1, 7, 64, 65, 257, 1000):
        for p in (0.0, 0.1, 0.5, 0.9, 1.0):
            row = binom_pmf_row(m, p)
            assert row.shape == (m + 1,)
            assert np.all(row >= 0.0)
            assert abs(row.sum() - 1.0) < 1e-12


def test_binom_pmf_row_matches_scipy_large_m():
    for m in (100, 500, 2000):
        p = 0.37
        row = binom_pmf_row(m, p)
        ref = scipy.stats.binom.pmf(np.arange(m + 1), m, p)
        assert np.max(np.abs(row - ref)) < 1e-13


def test_binom_cdf_matches_scipy():
    for m in (5, 64, 300):
        for p in (0.2, 0.5, 0.8):
            for k in (0, m // 3, m):
                assert binom_cdf(m, p, k) == pytest.approx(
                    scipy.stats.binom.cdf(k, m, p), abs=1e-12)


def test_binom_validation():
    with pytest.raises(ValidationError):
        binom_pmf(-1, 0.5, 0)
    with pytest.raises(ValidationError):
        binom_pmf(5, 1.5, 2)
    with pytest.raises(ValidationError):
        binom_pmf(5, 0.5, 2.5)
    with pytest.raises(ValidationError):
        binom_pmf(5, 0.5, -1)
    with pytest.raises(ValidationError):
        binom_cdf(5, 0.5, 6)
    assert binom_cdf(5, 0.5, 5) == 1.0
    assert binom_cdf(7, 0.0, 0) == 1.0


# ---------------------------------------------------------------------------
# adoption curves


def test_adoption_small_j_polynomials():
    for alpha in np.linspace(0.0, 1.0, 21):
        a = float(alpha)
        assert adoption_probability(1, a) == pytest.approx(a, abs=1e-15)
        # one draw plus a fair tie-coin is the same as one draw
        assert adoption_probability(2, a) == pytest.approx(a, abs=1e-15)
        q3 = 3 * a**2 - 2 * a**3
        assert adoption_probability(3, a) == pytest.approx(q3, abs=1e-14)


def test_adoption_endpoints_and_symmetry():
    for j in range(1, 13):
        assert adoption_probability(j, 0.0) == 0.0
        assert adoption_probability(j, 1.0) == 1.0
        assert adoption_probability(j, 0.5) == pytest.approx(0.5, abs=1e-14)
        for a in (0.1, 0.33, 0.42):
            assert adoption_probability(j, a) + adoption_probability(j, 1 - a) \
                == pytest.approx(1.0, abs=1e-13)


def test_adoption_accepts_spec_or_int():
    assert adoption_probability(ProcessSpec(5), 0.7) == adoption_probability(5, 0.7)


@given(st.integers(min_value=1, max_value=20),
       st.floats(min_value=0.5, max_value=1.0))
@settings(max_examples=150, deadline=None)
def test_adoption_gap_matches_direct_difference(j, alpha):
    direct = adoption_probability(2 * j + 1, alpha) - adoption_probability(2 * j, alpha)
    closed = adoption_gap(j, alpha)
    assert closed == pytest.approx(direct, abs=1e-12)
    assert closed >= -1e-15


def test_adoption_gap_signed_below_half():
    with pytest.raises(DomainError):
        adoption_gap(2, 0.3)
    signed = adoption_gap(2, 0.3, signed=True)
    direct = adoption_probability(5, 0.3) - adoption_probability(4, 0.3)
    assert signed == pytest.approx(direct, abs=1e-12)
    assert signed < 0


def test_odd_even_pair_identity_pointwise():
    for j in range(1, 13):
        for a in np.linspace(0, 1, 41):
            lo = adoption_probability(2 * j - 1, float(a))
            hi = adoption_probability(2 * j, float(a))
            assert abs(lo - hi) < 1e-12


# ---------------------------------------------------------------------------
# kernels


def test_sequential_kernel_structure():
    n = 20
    k = sequential_kernel(3, n)
    assert k.is_tridiagonal
    assert k.up.shape == (n + 1,)
    assert k.up[0] == k.up[n] == 0.0
    assert k.down[0] == k.down[n] == 0.0
    rows = k.rows()
    assert rows.shape == (n + 1, n + 1)
    assert np.allclose(rows.sum(axis=1), 1.0, atol=1e-12)
    # transition rates come straight from the adoption curve
    for s in range(1, n):
        a = s / n
        q = adoption_probability(3, a)
        assert k.up[s] == pytest.approx((1 - a) * q, abs=1e-14)
        assert k.down[s] == pytest.approx(a * (1 - q), abs=1e-14)


def test_gossip_kernel_rows_are_binomial():
    n = 30
    k = gossip_kernel(4, n)
    assert not k.is_tridiagonal
    for s in (0, 7, 15, 30):
        q = adoption_probability(4, s / n)
        ref = scipy.stats.binom.pmf(np.arange(n + 1), n, q)
        assert np.max(np.abs(k.row(s) - ref)) < 1e-12
    assert k.row(0)[0] == 1.0
    assert k.row(n)[n] == 1.0


def test_gossip_capacity_guard():
    gossip_kernel(3, 4096)
    with pytest.raises(CapacityError):
        gossip_kernel(3, 4097)


def test_make_kernel_dispatch():
    assert make_kernel(ModelKind.SEQUENTIAL, 3, 10).is_tridiagonal
    assert not make_kernel(ModelKind.GOSSIP, 3, 10).is_tridiagonal
    with pytest.raises(ValidationError):
        make_kernel(ModelKind.SEQUENTIAL, 3, 0)


def test_kernel_row_bounds():
    k = sequential_kernel(5, 12)
    with pytest.raises(ValidationError):
        k.row(13)
    with pytest.raises(ValidationError):
        k.row(-1)


# ---------------------------------------------------------------------------
# drift and ruin ratio


def test_minority_drift_closed_form():
    for n in (10, 100, 1000):
        for s in range(1, n, max(1, n // 17)):
            formula = (2 * s * s - 3 * s * n + n * n) / n**3
            assert minority_drift_rate(n, s) == pytest.approx(formula, abs=1e-14)


def test_minority_drift_is_positive_below_half():
    # positive rate means the minority shrinks in expectation
    for n in (50, 500):
        for s in range(1, n // 2):
            assert minority_drift_rate(n, s) > 0.0


def test_minority_drift_validation():
    with pytest.raises(ValidationError):
        minority_drift_rate(100, 0)
    with pytest.raises(ValidationError):
        minority_drift_rate(100, 100)
    with pytest.raises(ValidationError):
        minority_drift_rate(100, float("nan"))


def test_ruin_ratio_properties():
    n = 1000
    assert ruin_ratio(n, 0.0) == pytest.approx(1.0, abs=1e-15)
    deltas = np.linspace(0.0, n / 2 - 1, 200)
    values = [ruin_ratio(n, float(d)) for d in deltas]
    assert all(b < a for a, b in zip(values, values[1:]))
    assert all(v < 1.0 for v in values[1:])


def test_ruin_ratio_closed_form():
    # alpha(1 - q3) / ((1-alpha) q3) simplifies to (1-alpha)(1+2 alpha-2alpha^2/alpha...)
    # spot-check against the raw definition instead of the simplification
    n = 200
    for delta in (1.0, 10.0, 60.0):
        alpha = 0.5 + delta / n
        q3 = adoption_probability(3, alpha)
        ref = alpha * (1 - q3) / ((1 - alpha) * q3)
        assert ruin_ratio(n, delta) == pytest.approx(ref, abs=1e-14)
    with pytest.raises(ValidationError):
        ruin_ratio(n, n / 2)
    with pytest.raises(ValidationError):
        ruin_ratio(n, -0.5)


# ---------------------------------------------------------------------------
# bundled sweeps


def test_check_functions_pass():
    assert check_adoption_gap_identity(j_max=6, grid_points=101).passed
    assert check_adoption_pair_identity(j_max=6, grid_points=101).passed
    assert check_drift_closed_form(n_max=64).passed
    assert check_ruin_ratio(populations=(10, 100), grid_points=50).passed
