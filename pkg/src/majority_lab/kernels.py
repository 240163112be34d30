"""Exact one-step analytics for j-sample majority dynamics.

The central object is the adoption curve q(alpha): the probability that one
activated agent, sampling j opinions uniformly with replacement from a
population holding opinion ``a`` with fraction alpha, ends up adopting ``a``.
For odd j = 2m+1 that is P[Bin(j, alpha) >= m+1]; for even j = 2m a tie of
m : m is broken by a fair coin, adding pmf(j, alpha, m) / 2 to the tail.

From q we assemble the exact one-step transition kernels of the count chain
on {0, ..., n}:

* sequential model: one uniform agent updates per step, so the kernel is
  tridiagonal with up(s) = (1 - alpha) q(alpha), down(s) = alpha (1 - q(alpha));
* gossip model: all n agents update simultaneously from the round-start
  counts, so row s is the Binomial(n, q(s/n)) pmf.

Binomial pmf/cdf values are computed from exact integer coefficients for
small trial counts and by a multiplicative recurrence outward from the mode
for kernel rows, never through factorial ratios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    MAX_SAMPLE_SIZE,
    CapacityError,
    CheckResult,
    DomainError,
    ModelKind,
    ProcessSpec,
    ValidationError,
)

GOSSIP_DENSE_LIMIT = 4096  # dense (n+1)^2 kernels above this refuse to build

_EXACT_TRIALS = MAX_SAMPLE_SIZE  # direct integer-coefficient evaluation below this


def _check_prob(p: float, name: str = "alpha") -> float:
    p = float(p)
    if math.isnan(p) or not 0.0 <= p <= 1.0:
        raise ValidationError(f"{name} must lie in [0, 1], got {p!r}")
    return p


def _check_trials(m: int) -> int:
    if not isinstance(m, (int, np.integer)) or isinstance(m, bool):
        raise ValidationError(f"trial count m must be an integer, got {m!r}")
    if m < 0:
        raise ValidationError(f"trial count m must be >= 0, got {m}")
    return int(m)


def binom_pmf(m: int, p: float, k: int) -> float:
    """P[Bin(m, p) = k].

    Exact integer binomial coefficients keep the absolute error a few ULP
    (well under 1e-14) for m <= 64; larger m fall back to the same
    mode-anchored recurrence used for kernel rows.
    """
    m = _check_trials(m)
    p = _check_prob(p, "p")
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool):
        raise ValidationError(f"k must be an integer, got {k!r}")
    if not 0 <= k <= m:
        raise ValidationError(f"k must satisfy 0 <= k <= m={m}, got {k}")
    k = int(k)
    if p == 0.0:
        return 1.0 if k == 0 else 0.0
    if p == 1.0:
        return 1.0 if k == m else 0.0
    if m <= _EXACT_TRIALS:
        return math.comb(m, k) * p**k * (1.0 - p) ** (m - k)
    return float(binom_pmf_row(m, p)[k])


def binom_cdf(m: int, p: float, k: int) -> float:
    """P[Bin(m, p) <= k], summed over the lighter tail for stability."""
    m = _check_trials(m)
    p = _check_prob(p, "p")
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool):
        raise ValidationError(f"k must be an integer, got {k!r}")
    if not 0 <= k <= m:
        raise ValidationError(f"k must satisfy 0 <= k <= m={m}, got {k}")
    k = int(k)
    if p == 0.0:
        return 1.0
    if p == 1.0:
        return 1.0 if k == m else 0.0
    if m <= _EXACT_TRIALS:
        mode = int((m + 1) * p)
        if k <= mode:
            return math.fsum(binom_pmf(m, p, i) for i in range(k + 1))
        return 1.0 - math.fsum(binom_pmf(m, p, i) for i in range(k + 1, m + 1))
    row = binom_pmf_row(m, p)
    mode = int((m + 1) * p)
    if k <= mode:
        return float(math.fsum(row[: k + 1]))
    return 1.0 - float(math.fsum(row[k + 1 :]))


def binom_pmf_row(m: int, p: float) -> np.ndarray:
    """Full pmf vector of Bin(m, p) via the multiplicative mode-outward recurrence.

    Anchored at the mode (exact coefficients for m <= 64, log-gamma above),
    then extended by pmf(k+1)/pmf(k) = ((m-k)/(k+1)) (p/(1-p)).  Working
    outward from the mode keeps every ratio step shrinking, so nothing
    overflows and relative error grows only linearly in the distance from
    the mode.
    """
    m = _check_trials(m)
    p = _check_prob(p, "p")
    row = np.zeros(m + 1)
    if p == 0.0:
        row[0] = 1.0
        return row
    if p == 1.0:
        row[m] = 1.0
        return row
    mode = min(m, int((m + 1) * p))
    if m <= _EXACT_TRIALS:
        anchor = math.comb(m, mode) * p**mode * (1.0 - p) ** (m - mode)
    else:
        log_anchor = (
            math.lgamma(m + 1)
            - math.lgamma(mode + 1)
            - math.lgamma(m - mode + 1)
            + mode * math.log(p)
            + (m - mode) * math.log1p(-p)
        )
        anchor = math.exp(log_anchor)
    row[mode] = anchor
    if mode < m:
        ks = np.arange(mode, m)
        up = (m - ks) / (ks + 1.0) * (p / (1.0 - p))
        row[mode + 1 :] = anchor * np.cumprod(up)
    if mode > 0:
        ks = np.arange(mode, 0, -1)
        down = ks / (m - ks + 1.0) * ((1.0 - p) / p)
        row[mode - 1 :: -1] = anchor * np.cumprod(down)
    return row


def _as_spec(spec: ProcessSpec | int) -> ProcessSpec:
    return spec if isinstance(spec, ProcessSpec) else ProcessSpec(int(spec))


def _adoption_pair(j: int, alpha: float) -> tuple[float, float]:
    """(q, 1-q), each evaluated by its own direct tail sum.

    Computing the complement independently keeps it relatively accurate when
    q is close to 1, which the sequential down-rates depend on.
    """
    if alpha == 0.0:
        return 0.0, 1.0
    if alpha == 1.0:
        return 1.0, 0.0
    half = j // 2
    if j % 2 == 1:
        win = math.fsum(binom_pmf(j, alpha, i) for i in range(half + 1, j + 1))
        lose = math.fsum(binom_pmf(j, alpha, i) for i in range(half + 1))
    else:
        tie = 0.5 * binom_pmf(j, alpha, half)
        win = math.fsum(binom_pmf(j, alpha, i) for i in range(half + 1, j + 1)) + tie
        lose = math.fsum(binom_pmf(j, alpha, i) for i in range(half)) + tie
    return win, lose


def adoption_probability(spec: ProcessSpec | int, alpha: float) -> float:
    """Probability an activated agent adopts opinion ``a`` at fraction alpha."""
    spec = _as_spec(spec)
    alpha = _check_prob(alpha)
    return _adoption_pair(spec.j, alpha)[0]


def adoption_gap(j: int, alpha: float, *, signed: bool = False) -> float:
    """Closed-form gap between the (2j+1)- and (2j)-sample adoption curves.

        gap(j, alpha) = ((2 alpha - 1) / 2) * C(2j, j) * (alpha (1 - alpha))^j

    It equals q_{2j+1}(alpha) - q_{2j}(alpha): giving the rule one extra draw
    helps exactly when that draw breaks a j : j tie toward the majority.
    The quantity is stated for the majority side alpha >= 1/2; pass
    ``signed=True`` to evaluate the same polynomial below 1/2, where it is
    the (negative) algebraic difference.
    """
    if not isinstance(j, (int, np.integer)) or isinstance(j, bool):
        raise ValidationError(f"pair index j must be an integer, got {j!r}")
    if j < 1:
        raise ValidationError(f"pair index j must be >= 1, got {j}")
    if 2 * j + 1 > MAX_SAMPLE_SIZE:
        raise ValidationError(
            f"pair index j must satisfy 2j+1 <= {MAX_SAMPLE_SIZE}, got {j}"
        )
    alpha = _check_prob(alpha)
    if not signed and alpha < 0.5:
        raise DomainError(
            f"adoption_gap is stated for alpha >= 1/2, got {alpha}; "
            "use signed=True for the algebraic value"
        )
    j = int(j)
    return 0.5 * (2.0 * alpha - 1.0) * math.comb(2 * j, j) * (alpha * (1.0 - alpha)) ** j


@dataclass
class StepKernel:
    """One-step transition kernel of the count chain on {0, ..., n}.

    Sequential kernels store the tridiagonal rates ``up``/``down`` per state;
    gossip kernels store the dense row-stochastic matrix.  Both expose a
    uniform dense ``row(s)`` view, and both keep the adoption curve values
    ``q`` used to build them.
    """

    model: ModelKind
    spec: ProcessSpec
    n: int
    q: np.ndarray
    up: np.ndarray | None = None
    down: np.ndarray | None = None
    matrix: np.ndarray | None = None

    @property
    def is_tridiagonal(self) -> bool:
        return self.model is ModelKind.SEQUENTIAL

    def row(self, s: int) -> np.ndarray:
        if not 0 <= s <= self.n:
            raise ValidationError(f"state s must satisfy 0 <= s <= n={self.n}, got {s}")
        if self.matrix is not None:
            return self.matrix[s].copy()
        row = np.zeros(self.n + 1)
        u, d = self.up[s], self.down[s]
        row[s] = 1.0 - u - d
        if s > 0:
            row[s - 1] = d
        if s < self.n:
            row[s + 1] = u
        return row

    def rows(self) -> np.ndarray:
        """Dense (n+1) x (n+1) matrix; guarded like the gossip constructor."""
        if self.matrix is not None:
            return self.matrix.copy()
        if self.n > GOSSIP_DENSE_LIMIT:
            raise CapacityError(
                f"dense materialization is limited to n <= {GOSSIP_DENSE_LIMIT}; "
                f"got n = {self.n}"
            )
        out = np.zeros((self.n + 1, self.n + 1))
        idx = np.arange(self.n + 1)
        out[idx, idx] = 1.0 - self.up - self.down
        out[idx[1:], idx[1:] - 1] = self.down[1:]
        out[idx[:-1], idx[:-1] + 1] = self.up[:-1]
        return out


def _check_population(n: int) -> int:
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
        raise ValidationError(f"population n must be an integer, got {n!r}")
    if n < 1:
        raise ValidationError(f"population n must be >= 1, got {n}")
    return int(n)


def _adoption_arrays(spec: ProcessSpec, n: int) -> tuple[np.ndarray, np.ndarray]:
    qs = np.empty(n + 1)
    rs = np.empty(n + 1)
    for s in range(n + 1):
        qs[s], rs[s] = _adoption_pair(spec.j, s / n)
    return qs, rs


def sequential_kernel(spec: ProcessSpec | int, n: int) -> StepKernel:
    """Tridiagonal kernel: one uniform agent resamples per step.

    up(s) = (1 - s/n) q(s/n) needs the activated agent to hold ``b`` and the
    sample majority to be ``a``; down(s) is the mirror.  States 0 and n are
    absorbing because q(0) = 0 and q(1) = 1.
    """
    spec = _as_spec(spec)
    n = _check_population(n)
    alphas = np.arange(n + 1) / n
    qs, rs = _adoption_arrays(spec, n)
    up = (1.0 - alphas) * qs
    down = alphas * rs
    return StepKernel(model=ModelKind.SEQUENTIAL, spec=spec, n=n, q=qs, up=up, down=down)


def gossip_kernel(spec: ProcessSpec | int, n: int) -> StepKernel:
    """Dense kernel: all n agents resample simultaneously from round-start counts.

    Row s is the Binomial(n, q(s/n)) pmf.  Dense storage is refused above
    n = 4096; beyond that use Monte Carlo (`simulate`) instead.
    """
    spec = _as_spec(spec)
    n = _check_population(n)
    if n > GOSSIP_DENSE_LIMIT:
        raise CapacityError(
            f"gossip kernels are dense and limited to n <= {GOSSIP_DENSE_LIMIT}; "
            f"got n = {n} (use simulate for larger populations)"
        )
    qs, _ = _adoption_arrays(spec, n)
    matrix = np.empty((n + 1, n + 1))
    for s in range(n + 1):
        matrix[s] = binom_pmf_row(n, qs[s])
    return StepKernel(model=ModelKind.GOSSIP, spec=spec, n=n, q=qs, matrix=matrix)


def make_kernel(model: ModelKind, spec: ProcessSpec | int, n: int) -> StepKernel:
    if model is ModelKind.SEQUENTIAL:
        return sequential_kernel(spec, n)
    return gossip_kernel(spec, n)


def minority_drift_rate(n: int, s: float) -> float:
    """Per-unit expected shrink rate of a 3-sample minority of size s.

    With alpha = s/n the minority count drops by one with probability
    alpha P[Bin(3, alpha) <= 1] and grows with probability
    (1 - alpha) P[Bin(3, alpha) >= 2]; the rate is their gap divided by s.
    Evaluated from the binomial terms directly; algebraically this equals
    (2 s^2 - 3 s n + n^2) / n^3.  Real-valued s is accepted so the rate can
    be probed along continuous parametrizations of the starting minority.
    """
    n = _check_population(n)
    if n < 2:
        raise ValidationError(f"population n must be >= 2, got {n}")
    s = float(s)
    if math.isnan(s) or not 1.0 <= s <= n - 1.0:
        raise ValidationError(f"minority count s must satisfy 1 <= s <= n-1, got {s!r}")
    alpha = s / n
    shrink = alpha * (binom_pmf(3, alpha, 0) + binom_pmf(3, alpha, 1))
    grow = (1.0 - alpha) * (binom_pmf(3, alpha, 2) + binom_pmf(3, alpha, 3))
    return (shrink - grow) / s


def ruin_ratio(n: int, delta: float) -> float:
    """Down/up mass ratio of the 3-sample sequential chain at lead delta.

    At s = n/2 + delta the ratio of the two productive step probabilities is
    alpha (1 - q3(alpha)) / ((1 - alpha) q3(alpha)) with alpha = 1/2 + delta/n.
    Equals 1 at delta = 0, decreases strictly in delta, and vanishes as the
    lead approaches n/2: conditioned on moving, the walk is a gambler's-ruin
    game tilted ever harder toward consensus.
    """
    n = _check_population(n)
    if n < 2:
        raise ValidationError(f"population n must be >= 2, got {n}")
    delta = float(delta)
    if math.isnan(delta) or not 0.0 <= delta < n / 2:
        raise ValidationError(f"lead delta must satisfy 0 <= delta < n/2, got {delta!r}")
    alpha = 0.5 + delta / n
    q, r = _adoption_pair(3, alpha)
    return (alpha * r) / ((1.0 - alpha) * q)


# ---------------------------------------------------------------------------
# grid checks shared by the CLI and the acceptance suite


def check_adoption_gap_identity(
    j_max: int = 12, grid_points: int = 1000, tol: float = 1e-12
) -> CheckResult:
    """q_{2j+1} - q_{2j} must equal the closed-form gap on a full alpha grid."""
    result = CheckResult(name="adoption odd-even gap identity", passed=True, checked=0)
    grid = np.linspace(0.0, 1.0, grid_points)
    for j in range(1, j_max + 1):
        for alpha in grid:
            direct = adoption_probability(2 * j + 1, alpha) - adoption_probability(
                2 * j, alpha
            )
            closed = adoption_gap(j, float(alpha), signed=True)
            err = abs(direct - closed)
            result.checked += 1
            if err > tol:
                result.record((j, float(alpha), direct, closed), err)
    return result


def check_adoption_pair_identity(
    j_max: int = 12, grid_points: int = 1000, tol: float = 1e-12
) -> CheckResult:
    """The (2j-1)- and (2j)-sample adoption curves must coincide everywhere.

    An even rule's fair tie-break contributes exactly the probability mass
    that one more decisive draw would have, so consecutive even sizes buy
    nothing over the odd size below them.
    """
    result = CheckResult(name="adoption odd/even pair identity", passed=True, checked=0)
    grid = np.linspace(0.0, 1.0, grid_points)
    for j in range(1, j_max + 1):
        for alpha in grid:
            lo = adoption_probability(2 * j - 1, alpha)
            hi = adoption_probability(2 * j, alpha)
            err = abs(hi - lo)
            result.checked += 1
            if err > tol:
                result.record((j, float(alpha), lo, hi), err)
    return result


def check_drift_closed_form(n_max: int = 1000, tol: float = 1e-14) -> CheckResult:
    """minority_drift_rate must match (2s^2 - 3sn + n^2)/n^3 at every integer state."""
    result = CheckResult(name="3-sample drift closed form", passed=True, checked=0)
    for n in range(2, n_max + 1):
        ns3 = float(n) ** 3
        for s in range(1, n):
            direct = minority_drift_rate(n, s)
            closed = (2.0 * s * s - 3.0 * s * n + n * n) / ns3
            err = abs(direct - closed)
            result.checked += 1
            if err > tol:
                result.record((n, s, direct, closed), err)
    return result


def check_ruin_ratio(
    populations: Sequence[int] = (10, 100, 1000, 10000), grid_points: int = 200
) -> CheckResult:
    """ruin_ratio must start at exactly 1, decrease strictly, and stay below 1."""
    result = CheckResult(name="ruin ratio monotonicity", passed=True, checked=0)
    for n in populations:
        deltas = np.linspace(0.0, n / 2, grid_points, endpoint=False)
        values = np.array([ruin_ratio(n, float(d)) for d in deltas])
        result.checked += len(values)
        if values[0] != 1.0:
            result.record((n, 0.0, float(values[0]), "ratio(0) != 1"), abs(values[0] - 1.0))
        bad = np.nonzero(np.diff(values) >= 0.0)[0]
        for i in bad[: CheckResult.max_recorded]:
            result.record(
                (n, float(deltas[i + 1]), float(values[i + 1]), "not decreasing"),
                float(values[i + 1] - values[i]),
            )
        above = np.nonzero(values[1:] >= 1.0)[0]
        for i in above[: CheckResult.max_recorded]:
            result.record(
                (n, float(deltas[i + 1]), float(values[i + 1]), "not below 1"),
                float(values[i + 1] - 1.0),
            )
    return result
