"""Tests for exact absorption solving, survival curves, and dominance sweeps.

Oracles are built independently inside the tests: dense numpy solves of the
absorption system assembled straight from adoption polynomials, and explicit
matrix-power survival evaluation.
"""

import math

import numpy as np
import pytest
import scipy.stats

from majority_lab.chain import (
    check_kernel_pair_identity_sweep,
    check_row_dominance_sweep,
    check_state_monotonicity_sweep,
    default_horizon,
    expected_absorption,
    survival,
    survival_all,
    verify_process_dominance,
    verify_state_monotonicity,
)
from majority_lab.core import ModelKind, ValidationError
from majority_lab.kernels import adoption_probability, make_kernel


def dense_transition_matrix(model, j, n):
    """Oracle transition matrix assembled without touching kernels.py rows."""
    mat = np.zeros((n + 1, n + 1))
    for s in range(n + 1):
        q = adoption_probability(j, s / n)
        if s in (0, n):
            mat[s, s] = 1.0
        elif model is ModelKind.GOSSIP:
            mat[s] = scipy.stats.binom.pmf(np.arange(n + 1), n, q)
        else:
            a = s / n
            up = (1 - a) * q
            down = a * (1 - q)
            mat[s, s + 1] = up
            mat[s, s - 1] = down
            mat[s, s] = 1 - up - down
    return mat


def oracle_absorption(model, j, n):
    """Expected steps and win probability via a dense numpy solve."""
    mat = dense_transition_matrix(model, j, n)
    interior = np.arange(1, n)
    q = mat[np.ix_(interior, interior)]
    eye = np.eye(n - 1)
    steps = np.linalg.solve(eye - q, np.ones(n - 1))
    win = np.linalg.solve(eye - q, mat[interior, n])
    full_steps = np.zeros(n + 1)
    full_steps[interior] = steps
    full_win = np.zeros(n + 1)
    full_win[interior] = win
    full_win[n] = 1.0
    return full_steps, full_win


@pytest.mark.parametrize("model", [ModelKind.GOSSIP, ModelKind.SEQUENTIAL])
@pytest.mark.parametrize("j,n", [(1, 8), (3, 16), (4, 21), (6, 12)])
def test_expected_absorption_matches_dense_oracle(model, j, n):
    kernel = make_kernel(model, j, n)
    profile = expected_absorption(kernel)
    ref_steps, ref_win = oracle_absorption(model, j, n)
    assert np.max(np.abs(profile.expected_steps - ref_steps)) < 1e-8 * (1 + ref_steps.max())
    assert np.max(np.abs(profile.win_prob - ref_win)) < 1e-9
    assert profile.residual_steps < 1e-9
    assert profile.residual_win < 1e-9


def test_absorption_profile_shape_and_ends():
    profile = expected_absorption(make_kernel(ModelKind.SEQUENTIAL, 3, 24))
    assert profile.expected_steps[0] == 0.0
    assert profile.expected_steps[24] == 0.0
    assert np.all(profile.expected_steps[1:24] > 0.0)
    assert profile.win_prob[0] == 0.0
    assert profile.win_prob[24] == 1.0
    # more initial supporters never hurt the win chance
    assert np.all(np.diff(profile.win_prob) >= -1e-12)


def test_win_prob_symmetry_at_complementary_starts():
    for model in (ModelKind.GOSSIP, ModelKind.SEQUENTIAL):
        profile = expected_absorption(make_kernel(model, 5, 18))
        flipped = profile.win_prob + profile.win_prob[::-1]
        assert np.max(np.abs(flipped - 1.0)) < 1e-9


def test_parallel_time_scaling():
    seq = expected_absorption(make_kernel(ModelKind.SEQUENTIAL, 3, 16))
    gos = expected_absorption(make_kernel(ModelKind.GOSSIP, 3, 16))
    assert np.allclose(seq.expected_parallel_time, seq.expected_steps / 16)
    assert np.allclose(gos.expected_parallel_time, gos.expected_steps)


def test_survival_matches_matrix_powers():
    model, j, n, t_max = ModelKind.GOSSIP, 3, 10, 12
    kernel = make_kernel(model, j, n)
    surv = survival_all(kernel, t_max)
    mat = dense_transition_matrix(model, j, n)
    power = np.eye(n + 1)
    for t in range(t_max + 1):
        for s0 in range(n + 1):
            expected = power[s0, 1:n].sum() if 0 < s0 < n else 0.0
            assert surv[t, s0] == pytest.approx(expected, abs=1e-10)
        power = power @ mat


def test_survival_is_monotone_in_t():
    kernel = make_kernel(ModelKind.SEQUENTIAL, 4, 14)
    surv = survival_all(kernel, 200)
    assert np.all(np.diff(surv, axis=0) <= 1e-12)
    assert np.all(surv[0, 1:14] == 1.0)
    assert np.all(surv[0, [0, 14]] == 0.0)


def test_survival_single_state_view():
    kernel = make_kernel(ModelKind.GOSSIP, 3, 12)
    curve = survival(kernel, 6, 30)
    assert curve.t_max == 30
    assert curve.s0 == 6
    assert np.array_equal(curve.values, survival_all(kernel, 30)[:, 6])
    with pytest.raises(ValidationError):
        survival(kernel, 13)


def test_default_horizon_scales():
    assert default_horizon(ModelKind.GOSSIP, 100) == math.ceil(10 * math.log(100))
    assert default_horizon(ModelKind.SEQUENTIAL, 100) == math.ceil(10 * 100 * math.log(100))


def test_state_monotonicity_single_kernel():
    for model in (ModelKind.GOSSIP, ModelKind.SEQUENTIAL):
        res = verify_state_monotonicity(make_kernel(model, 4, 20))
        assert res.passed
        assert res.checked > 0


def test_process_dominance_small_pair():
    for model in (ModelKind.GOSSIP, ModelKind.SEQUENTIAL):
        lo = make_kernel(model, 4, 16)
        hi = make_kernel(model, 5, 16)
        report = verify_process_dominance(lo, hi)
        assert report.passed
        assert report.min_interior_row_gap >= 0.0
        assert "PASS" in report.summary()


def test_process_dominance_detects_reversal():
    # swapping the roles must fail: the even rule cannot dominate the odd one
    lo = make_kernel(ModelKind.GOSSIP, 5, 16)
    hi = make_kernel(ModelKind.GOSSIP, 4, 16)
    report = verify_process_dominance(lo, hi)
    assert not report.passed


def test_process_dominance_requires_matching_chains():
    with pytest.raises(ValidationError):
        verify_process_dominance(make_kernel(ModelKind.GOSSIP, 3, 10),
                                 make_kernel(ModelKind.GOSSIP, 4, 12))
    with pytest.raises(ValidationError):
        verify_process_dominance(make_kernel(ModelKind.GOSSIP, 3, 10),
                                 make_kernel(ModelKind.SEQUENTIAL, 4, 10))


def test_sweeps_pass_at_reduced_sizes():
    for model in (ModelKind.GOSSIP, ModelKind.SEQUENTIAL):
        assert check_state_monotonicity_sweep(model, j_max=5, n_max=20).passed
        assert check_row_dominance_sweep(model, j_max=5, n_max=20).passed
        assert check_kernel_pair_identity_sweep(model, j_max=5, n_max=20).passed
