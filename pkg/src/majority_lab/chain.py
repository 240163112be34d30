"""Exact absorbing-chain analysis of the count dynamics.

Consensus is absorption of the count chain at 0 or n.  With the transient
block Q of a one-step kernel, expected absorption times solve
(I - Q) E = 1 and the probability of finishing at all-``a`` solves
(I - Q) W = K[:, n].  Sequential kernels give tridiagonal systems (direct
banded elimination); gossip kernels give dense ones (pivoted LU).  Both
solves report their residuals and refuse to pass silently degraded answers.

Survival curves P[T > t] come from iterating the substochastic transient
block, which also powers the stochastic-dominance verdicts used to compare
sample sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .core import (
    CheckResult,
    ModelKind,
    NumericError,
    ProcessSpec,
    ValidationError,
    horizon,
)
from .kernels import StepKernel, make_kernel

ANALYSIS_HORIZON_FACTOR = 10.0
RESIDUAL_LIMIT = 1e-9


def default_horizon(model: ModelKind, n: int) -> int:
    """Analysis horizon: ceil(10 n ln n) steps or ceil(10 ln n) rounds."""
    return horizon(model, n, ANALYSIS_HORIZON_FACTOR)


@dataclass
class AbsorptionProfile:
    """Expected absorption time and all-``a`` win probability per start state."""

    model: ModelKind
    j: int
    n: int
    expected_steps: np.ndarray  # length n+1, zero at the absorbing ends
    win_prob: np.ndarray  # length n+1, 0 at s=0 and 1 at s=n
    residual_steps: float
    residual_win: float

    @property
    def expected_parallel_time(self) -> np.ndarray:
        if self.model is ModelKind.SEQUENTIAL:
            return self.expected_steps / self.n
        return self.expected_steps.copy()


@dataclass
class SurvivalCurve:
    """P[T > t | X_0 = s0] for t = 0 .. t_max."""

    model: ModelKind
    j: int
    n: int
    s0: int
    values: np.ndarray

    @property
    def t_max(self) -> int:
        return len(self.values) - 1


def _relative_residual(lhs_apply, x: np.ndarray, b: np.ndarray) -> float:
    r = lhs_apply(x) - b
    scale = max(float(np.max(np.abs(b))), 1e-300)
    return float(np.max(np.abs(r))) / scale


def _solve_tridiagonal(
    up: np.ndarray, down: np.ndarray, rhs: np.ndarray
) -> tuple[np.ndarray, float]:
    """Solve (I - Q) x = rhs on transient states 1..n-1 by banded elimination."""
    n = len(up) - 1
    diag = up[1:n] + down[1:n]  # 1 - stay
    ab = np.zeros((3, n - 1))
    ab[0, 1:] = -up[1 : n - 1]  # superdiagonal: transition s -> s+1
    ab[1, :] = diag
    ab[2, :-1] = -down[2:n]  # subdiagonal: transition s -> s-1
    x = scipy.linalg.solve_banded((1, 1), ab, rhs)

    def apply(v: np.ndarray) -> np.ndarray:
        out = diag * v
        out[:-1] -= up[1 : n - 1] * v[1:]
        out[1:] -= down[2:n] * v[:-1]
        return out

    return x, _relative_residual(apply, x, rhs)


def _solve_dense(a: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, float]:
    """Pivoted LU solve with one step of iterative refinement."""
    lu, piv = scipy.linalg.lu_factor(a)
    x = scipy.linalg.lu_solve((lu, piv), rhs)
    x += scipy.linalg.lu_solve((lu, piv), rhs - a @ x)
    return x, _relative_residual(lambda v: a @ v, x, rhs)


def expected_absorption(kernel: StepKernel) -> AbsorptionProfile:
    """Solve the absorbing-chain systems for every start state at once."""
    n = kernel.n
    if n == 1:
        return AbsorptionProfile(
            model=kernel.model,
            j=kernel.spec.j,
            n=n,
            expected_steps=np.zeros(2),
            win_prob=np.array([0.0, 1.0]),
            residual_steps=0.0,
            residual_win=0.0,
        )
    ones = np.ones(n - 1)
    if kernel.is_tridiagonal:
        expected, res_e = _solve_tridiagonal(kernel.up, kernel.down, ones)
        hit_a = np.zeros(n - 1)
        hit_a[-1] = kernel.up[n - 1]
        win, res_w = _solve_tridiagonal(kernel.up, kernel.down, hit_a)
    else:
        q = kernel.matrix[1:n, 1:n]
        a = np.eye(n - 1) - q
        expected, res_e = _solve_dense(a, ones)
        win, res_w = _solve_dense(a, kernel.matrix[1:n, n])
    for name, res in (("expected time", res_e), ("win probability", res_w)):
        if res > RESIDUAL_LIMIT:
            raise NumericError(
                f"{name} solve residual {res:.3e} exceeds {RESIDUAL_LIMIT:.1e} "
                f"({kernel.model}, j={kernel.spec.j}, n={n})"
            )
    expected_full = np.zeros(n + 1)
    expected_full[1:n] = expected
    win_full = np.zeros(n + 1)
    win_full[1:n] = win
    win_full[n] = 1.0
    return AbsorptionProfile(
        model=kernel.model,
        j=kernel.spec.j,
        n=n,
        expected_steps=expected_full,
        win_prob=win_full,
        residual_steps=res_e,
        residual_win=res_w,
    )


def survival_all(kernel: StepKernel, t_max: int | None = None) -> np.ndarray:
    """Matrix S with S[t, s0] = P[T > t | X_0 = s0], for every start state.

    Iterates w <- Q w starting from the all-ones vector on transient states,
    so one pass serves all n-1 interior starts.
    """
    n = kernel.n
    if t_max is None:
        t_max = default_horizon(kernel.model, n)
    if t_max < 0:
        raise ValidationError(f"t_max must be >= 0, got {t_max}")
    out = np.zeros((t_max + 1, n + 1))
    if n == 1:
        return out
    w = np.ones(n - 1)
    out[0, 1:n] = w
    if kernel.is_tridiagonal:
        up = kernel.up[1:n]
        down = kernel.down[1:n]
        stay = 1.0 - up - down
        for t in range(1, t_max + 1):
            nxt = stay * w
            nxt[:-1] += up[:-1] * w[1:]
            nxt[1:] += down[1:] * w[:-1]
            w = nxt
            out[t, 1:n] = w
    else:
        q = kernel.matrix[1:n, 1:n]
        for t in range(1, t_max + 1):
            w = q @ w
            out[t, 1:n] = w
    return out


def survival(kernel: StepKernel, s0: int, t_max: int | None = None) -> SurvivalCurve:
    if not 0 <= s0 <= kernel.n:
        raise ValidationError(f"s0 must satisfy 0 <= s0 <= n={kernel.n}, got {s0}")
    values = survival_all(kernel, t_max)[:, s0]
    return SurvivalCurve(
        model=kernel.model, j=kernel.spec.j, n=kernel.n, s0=s0, values=values
    )


def _tail_matrix(kernel: StepKernel) -> np.ndarray:
    """T[s, d] = P[X' >= d | X = s]; row-wise reversed cumulative sums."""
    dense = kernel.rows() if kernel.matrix is None else kernel.matrix
    return np.cumsum(dense[:, ::-1], axis=1)[:, ::-1]


def verify_state_monotonicity(kernel: StepKernel, tol: float = 1e-12) -> CheckResult:
    """Row-CDF dominance in the start state: more ``a`` now, stochastically more next.

    Checks P[X' >= d | s] >= P[X' >= d | s'] - tol for every pair s > s' and
    every threshold d, not just adjacent pairs, so tolerance cannot pile up.
    """
    result = CheckResult(
        name=f"state monotonicity ({kernel.model}, j={kernel.spec.j}, n={kernel.n})",
        passed=True,
        checked=0,
    )
    tails = _tail_matrix(kernel)
    n = kernel.n
    for s in range(1, n + 1):
        gaps = tails[s][None, :] - tails[:s]  # rows s' = 0..s-1
        result.checked += gaps.size
        bad = np.argwhere(gaps < -tol)
        for s_prime, d in bad[: CheckResult.max_recorded]:
            result.record(
                (s, int(s_prime), int(d), float(gaps[s_prime, d])),
                float(-gaps[s_prime, d]),
            )
    return result


@dataclass
class DominanceReport:
    """Verdict of a one-step + survival comparison between two kernels."""

    row_check: CheckResult
    survival_check: CheckResult
    min_interior_row_gap: float
    t_max: int

    @property
    def passed(self) -> bool:
        return self.row_check.passed and self.survival_check.passed

    def summary(self) -> str:
        return self.row_check.summary() + "\n" + self.survival_check.summary()


def verify_process_dominance(
    kernel_low: StepKernel,
    kernel_high: StepKernel,
    row_tol: float = 1e-12,
    survival_tol: float = 1e-9,
    t_max: int | None = None,
) -> DominanceReport:
    """Does ``kernel_high`` beat ``kernel_low`` toward ``a``-consensus?

    Two parts: (i) at every majority state s > n/2, row-CDF dominance
    P_high[X' >= d | s] >= P_low[X' >= d | s] - tol; (ii) survival-curve
    dominance P_high[T > t | s0] <= P_low[T > t | s0] + tol for every start
    state out to the analysis horizon.
    """
    if kernel_low.n != kernel_high.n or kernel_low.model is not kernel_high.model:
        raise ValidationError(
            "kernels must share model and population: "
            f"({kernel_low.model}, n={kernel_low.n}) vs "
            f"({kernel_high.model}, n={kernel_high.n})"
        )
    n = kernel_low.n
    pair = f"j={kernel_low.spec.j} vs j={kernel_high.spec.j}, {kernel_low.model}, n={n}"
    row_check = CheckResult(name=f"one-step dominance ({pair})", passed=True, checked=0)
    tails_low = _tail_matrix(kernel_low)
    tails_high = _tail_matrix(kernel_high)
    min_interior = math.inf
    for s in range(n // 2 + 1, n + 1):
        gaps = tails_high[s] - tails_low[s]
        row_check.checked += gaps.size
        if s < n:
            # d = s+1 is the first threshold the step can actually cross
            if s + 1 <= n:
                min_interior = min(min_interior, float(gaps[s + 1]))
        bad = np.argwhere(gaps < -row_tol).ravel()
        for d in bad[: CheckResult.max_recorded]:
            row_check.record((s, int(d), float(gaps[d])), float(-gaps[d]))
    if t_max is None:
        t_max = default_horizon(kernel_low.model, n)
    surv_check = CheckResult(name=f"survival dominance ({pair})", passed=True, checked=0)
    surv_low = survival_all(kernel_low, t_max)
    surv_high = survival_all(kernel_high, t_max)
    excess = surv_high - surv_low
    surv_check.checked = excess.size
    bad = np.argwhere(excess > survival_tol)
    for t, s0 in bad[: CheckResult.max_recorded]:
        surv_check.record((int(t), int(s0), float(excess[t, s0])), float(excess[t, s0]))
    if not math.isfinite(min_interior):
        min_interior = 0.0
    return DominanceReport(
        row_check=row_check,
        survival_check=surv_check,
        min_interior_row_gap=min_interior,
        t_max=t_max,
    )


# ---------------------------------------------------------------------------
# sweep checks shared by the CLI and the acceptance suite


def check_state_monotonicity_sweep(
    model: ModelKind, j_max: int = 12, n_max: int = 64, tol: float = 1e-12
) -> CheckResult:
    """Row-CDF monotonicity in s for every kernel with j <= j_max, n <= n_max."""
    result = CheckResult(
        name=f"state monotonicity sweep ({model}, j<={j_max}, n<={n_max})",
        passed=True,
        checked=0,
    )
    for n in range(2, n_max + 1):
        for j in range(1, j_max + 1):
            sub = verify_state_monotonicity(make_kernel(model, j, n), tol)
            result.checked += sub.checked
            if not sub.passed:
                result.passed = False
                result.worst = max(result.worst, sub.worst)
                for f in sub.failures:
                    if len(result.failures) < CheckResult.max_recorded:
                        result.failures.append((n, j) + tuple(f))
    return result


def check_row_dominance_sweep(
    model: ModelKind, j_max: int = 12, n_max: int = 64, tol: float = 1e-12
) -> CheckResult:
    """One-step majority-side dominance of each odd rule over the even rule below it.

    For every pair (2j, 2j+1) with 2j+1 <= j_max and every majority state
    s > n/2, the odd kernel's row must CDF-dominate the even kernel's row.
    """
    result = CheckResult(
        name=f"odd-over-even one-step dominance sweep ({model}, j<={j_max}, n<={n_max})",
        passed=True,
        checked=0,
    )
    for n in range(2, n_max + 1):
        for j_low in range(2, j_max, 2):
            k_low = make_kernel(model, j_low, n)
            k_high = make_kernel(model, j_low + 1, n)
            tails_low = _tail_matrix(k_low)
            tails_high = _tail_matrix(k_high)
            gaps = (tails_high - tails_low)[n // 2 + 1 :]
            result.checked += gaps.size
            bad = np.argwhere(gaps < -tol)
            for row, d in bad[: CheckResult.max_recorded]:
                s = n // 2 + 1 + int(row)
                result.record((n, j_low, s, int(d), float(gaps[row, d])), float(-gaps[row, d]))
    return result


def check_kernel_pair_identity_sweep(
    model: ModelKind, j_max: int = 12, n_max: int = 64, tol: float = 1e-12
) -> CheckResult:
    """Kernels of sizes 2j-1 and 2j must be identical row by row."""
    result = CheckResult(
        name=f"odd/even kernel identity sweep ({model}, j<={j_max}, n<={n_max})",
        passed=True,
        checked=0,
    )
    for n in range(2, n_max + 1):
        for j in range(1, j_max // 2 + 1):
            k_odd = make_kernel(model, 2 * j - 1, n)
            k_even = make_kernel(model, 2 * j, n)
            diff = np.abs(k_odd.rows() - k_even.rows())
            result.checked += diff.size
            bad = np.argwhere(diff > tol)
            for s, d in bad[: CheckResult.max_recorded]:
                result.record((n, 2 * j, int(s), int(d), float(diff[s, d])), float(diff[s, d]))
    return result
