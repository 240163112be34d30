"""Monotone couplings of neighbouring sample-size processes.

Two constructions are provided for the pair (P_j, P_{j+1}) started from the
same configuration:

* sequential model: both chains are driven by one shared uniform per step
  through their inverse row CDFs.  Because the inverse CDF is monotone in u,
  whenever the two rows are stochastically ordered the realized next states
  are ordered the same way, deterministically.

* gossip model with even j: each agent's j sampled opinions are shared
  between the two processes, the even rule's fair tie coin and the odd rule's
  extra sample are realized from one more shared uniform.  Per agent the
  adoption indicators are then nested whenever the pair sits on a common
  majority side.  Odd j needs no machinery: P_j and P_{j+1} have identical
  rows, so one draw serves both and the trajectories coincide.

Every runner evaluates, before each transition, the exact pointwise CDF
order of the two current rows, and asserts afterwards that the realized pair
respects it.  A mismatch is reported as a hard failure carrying the full
trace.  Note the scope of the guarantee: the shared-uniform construction can
never trip the flag, while the agent-level gossip construction can, with
small probability, when the pair straddles one half with the leading process
on the minority side (the fair coin and the extra sample then pull through
opposite intervals of the shared uniform).  Distribution-level dominance is
unaffected; see chain.verify_process_dominance for the exact statement.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import IO, Iterable

import numpy as np

from . import _loops
from .core import (
    MajorityLabError,
    ModelKind,
    ProcessSpec,
    SeedPolicy,
    ValidationError,
    validate_state,
)
from .kernels import StepKernel, adoption_probability, sequential_kernel
from .simulate import SCHEMA_VERSION, default_step_cap

__all__ = [
    "CouplingViolationError",
    "CoupledTrace",
    "CoupledBatchStats",
    "EmpiricalDominance",
    "expected_order",
    "quantile_couple_step",
    "run_coupled_sequential",
    "run_coupled_gossip",
    "run_coupled_batch",
    "write_coupled_csv",
    "estimate_dominance_empirical",
    "check_quantile_order",
]


class CouplingViolationError(MajorityLabError):
    """A coupled pair violated the expected one-step order.

    Carries the offending run's trace (when available) so the failure can be
    dumped and inspected instead of silently discarded.
    """

    def __init__(self, message: str, trace: "CoupledTrace | None" = None,
                 run_index: int | None = None):
        super().__init__(message)
        self.trace = trace
        self.run_index = run_index


def expected_order(kernel_low: StepKernel, kernel_high: StepKernel,
                   s_low: int, s_high: int, equal_tol: float = 1e-12) -> int:
    """Pointwise CDF comparison of the two one-step rows.

    Returns +1 when the high row dominates (CDF_high <= CDF_low everywhere),
    -1 for the mirrored order, 0 when the rows coincide or genuinely cross.
    Any coupling that feeds one shared uniform through both inverse CDFs
    realizes a nonzero expected order with probability one.

    ``equal_tol`` absorbs accumulation noise: a row whose mass sums to one
    ulp under 1.0 must not read as "crossed" by a row that sums exactly to
    1.0, so CDF gaps within the tolerance count as ties for both directions.
    Only a crossing larger than the tolerance voids an otherwise-clean order.
    """
    if kernel_low.n != kernel_high.n:
        raise ValidationError(
            f"kernels disagree on population size: {kernel_low.n} != {kernel_high.n}")
    validate_state(kernel_low.n, s_low)
    validate_state(kernel_high.n, s_high)
    cl = np.cumsum(kernel_low.row(s_low))
    ch = np.cumsum(kernel_high.row(s_high))
    hi_ok = bool(np.all(ch <= cl + equal_tol))
    lo_ok = bool(np.all(ch >= cl - equal_tol))
    if hi_ok and not lo_ok:
        return 1
    if lo_ok and not hi_ok:
        return -1
    return 0


def quantile_couple_step(kernel_low: StepKernel, kernel_high: StepKernel,
                         s_low: int, s_high: int, u: float) -> tuple[int, int]:
    """Advance both processes one step through their inverse row CDFs at u.

    The same uniform is pushed through both quantile functions, so the
    realized pair inherits whatever stochastic order the two rows have.  The
    states need not be ordered on entry: legitimate coupled trajectories pass
    through contact and reversal near one half, and the step map stays well
    defined there.
    """
    if kernel_low.n != kernel_high.n:
        raise ValidationError(
            f"kernels disagree on population size: {kernel_low.n} != {kernel_high.n}")
    if not 0.0 <= u < 1.0:
        raise ValidationError(f"u must lie in [0, 1), got {u!r}")
    validate_state(kernel_low.n, s_low)
    validate_state(kernel_high.n, s_high)
    n = kernel_low.n
    cl = np.cumsum(kernel_low.row(s_low))
    ch = np.cumsum(kernel_high.row(s_high))
    nxt_low = min(int(np.searchsorted(cl, u, side="right")), n)
    nxt_high = min(int(np.searchsorted(ch, u, side="right")), n)
    return nxt_low, nxt_high


@dataclass
class CoupledTrace:
    """Full record of one coupled run of (P_j_low, P_j_low+1).

    times/x_low/x_high/flags hold one entry per recorded epoch including the
    start.  flags[t] reports whether the transition into epoch t respected
    the expected row order (flags[0] is vacuously true).  If every flag is
    true and the trajectory keeps a common majority side, the stronger
    process finishes no later: t_high <= t_low.
    """

    model: ModelKind
    j_low: int
    n: int
    s0: int
    cap: int
    times: np.ndarray
    x_low: np.ndarray
    x_high: np.ndarray
    flags: np.ndarray
    t_low: int | None
    t_high: int | None
    winner_low: str | None
    winner_high: str | None
    violation_step: int | None
    steps: int

    @property
    def j_high(self) -> int:
        return self.j_low + 1

    @property
    def ok(self) -> bool:
        return self.violation_step is None

    @property
    def pathwise_dominant(self) -> bool:
        """True when the stronger process never fell behind in the a-count.

        Under pathwise dominance, if both processes converge to the majority
        opinion then t_high <= t_low necessarily; trajectories that cross one
        half can lose pathwise order without any flag violation, and the time
        ordering is then not guaranteed run by run.
        """
        return bool(np.all(self.x_high >= self.x_low))

    def to_csv(self, fh: IO[str]) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "x_low", "x_high", "dominance_flag"])
        for t, xl, xh, fl in zip(self.times, self.x_low, self.x_high, self.flags):
            writer.writerow([int(t), int(xl), int(xh), "true" if fl else "false"])

    def summary(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "model": str(self.model),
            "j_low": self.j_low,
            "j_high": self.j_high,
            "n": self.n,
            "s0": self.s0,
            "cap": self.cap,
            "steps": self.steps,
            "t_low": self.t_low,
            "t_high": self.t_high,
            "winner_low": self.winner_low,
            "winner_high": self.winner_high,
            "violation_step": self.violation_step,
            "high_no_later": (self.t_low is not None and self.t_high is not None
                              and self.t_high <= self.t_low),
        }


def _winner(n: int, s: int) -> str | None:
    if s == n:
        return "a"
    if s == 0:
        return "b"
    return None


def _seq_thresholds(j: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-state row-CDF thresholds (P[down], P[down] + P[stay]) of a chain."""
    kern = sequential_kernel(j, n)
    down = kern.down
    mid = down + (1.0 - kern.up - down)
    return down, mid


def run_coupled_sequential(j_low: int, n: int, s0: int, stream: np.random.Generator,
                           step_cap: int | None = None,
                           _independent_uniforms: bool = False) -> CoupledTrace:
    """Trace one shared-uniform coupled run of the sequential pair.

    Pure-python reference runner: consumes exactly one uniform per step (the
    same draw sequence as the compiled batch path, which it must match state
    for state).  `_independent_uniforms` deliberately breaks the coupling by
    drawing a second uniform for the stronger process; it exists as a
    negative control for the violation machinery and must not be used
    otherwise.
    """
    spec_low = ProcessSpec(j_low)
    if spec_low.j + 1 > 64:
        raise ValidationError(f"coupled pair needs j_low + 1 <= 64, got {j_low}")
    validate_state(n, s0)
    cap = default_step_cap(ModelKind.SEQUENTIAL, n) if step_cap is None else int(step_cap)
    if cap < 1:
        raise ValidationError(f"step_cap must be positive, got {cap}")

    down_lo, mid_lo = _seq_thresholds(j_low, n)
    down_hi, mid_hi = _seq_thresholds(j_low + 1, n)

    s_lo = s_hi = s0
    times = [0]
    xs_lo = [s_lo]
    xs_hi = [s_hi]
    flags = [True]
    t = 0
    t_low = 0 if s_lo in (0, n) else -1
    t_high = 0 if s_hi in (0, n) else -1
    violation = None
    while (t_low < 0 or t_high < 0) and t < cap:
        order = int(_loops.pair_order(down_lo, mid_lo, down_hi, mid_hi, s_lo, s_hi))
        u = stream.random()
        if 0 < s_lo < n:
            if u < down_lo[s_lo]:
                s_lo -= 1
            elif u >= mid_lo[s_lo]:
                s_lo += 1
        if _independent_uniforms:
            u = stream.random()
        if 0 < s_hi < n:
            if u < down_hi[s_hi]:
                s_hi -= 1
            elif u >= mid_hi[s_hi]:
                s_hi += 1
        t += 1
        if t_low < 0 and s_lo in (0, n):
            t_low = t
        if t_high < 0 and s_hi in (0, n):
            t_high = t
        bad = (order > 0 and s_hi < s_lo) or (order < 0 and s_hi > s_lo)
        times.append(t)
        xs_lo.append(s_lo)
        xs_hi.append(s_hi)
        flags.append(not bad)
        if bad:
            violation = t
            break
    return CoupledTrace(
        model=ModelKind.SEQUENTIAL, j_low=j_low, n=n, s0=s0, cap=cap,
        times=np.asarray(times, dtype=np.int64),
        x_low=np.asarray(xs_lo, dtype=np.int64),
        x_high=np.asarray(xs_hi, dtype=np.int64),
        flags=np.asarray(flags, dtype=bool),
        t_low=None if t_low < 0 else t_low,
        t_high=None if t_high < 0 else t_high,
        winner_low=_winner(n, s_lo), winner_high=_winner(n, s_hi),
        violation_step=violation, steps=t)


def _class_of(k: int, m: int) -> int:
    """Classify an a-count among 2m shared samples: 0 below, 1 tie, 2 above."""
    if k > m:
        return 2
    if k == m:
        return 1
    return 0


def _gossip_joint_cells(m: int, t_lo: float, t_hi: float) -> np.ndarray:
    """Joint class distribution of one agent's shared 2m samples.

    Entry [i, j] is the probability that the count below the lower threshold
    falls in class i and the count below the higher threshold in class j
    (classes 0/1/2 = minority, tie, majority).  Counts are nested, so the
    matrix is upper triangular.
    """
    two_m = 2 * m
    cells = np.zeros((3, 3))
    for x in range(two_m + 1):
        cx = math.comb(two_m, x) * t_lo ** x
        for d in range(two_m - x + 1):
            p = (cx * math.comb(two_m - x, d)
                 * (t_hi - t_lo) ** d * (1.0 - t_hi) ** (two_m - x - d))
            cells[_class_of(x, m), _class_of(x + d, m)] += p
    return cells


def _coupled_gossip_round(m: int, n: int, s_lo: int, s_hi: int,
                          gen: np.random.Generator,
                          swap_tie_thresholds: bool) -> tuple[int, int]:
    """One structurally coupled round of the even pair (P_2m, P_2m+1).

    Each agent's 2m sampled opinions are common to both processes; the even
    rule's tie coin and the odd rule's extra sample share one more uniform.
    Agents are exchangeable, so the round is realized by aggregated counts:
    a 9-cell multinomial over the joint classes, a trinomial for the shared
    tie uniform of doubly tied agents, and one binomial for each singly tied
    group.  The joint law of the two next states equals the agent-by-agent
    construction exactly.
    """
    a_lo = s_lo / n
    a_hi = s_hi / n
    t_low_thr = min(a_lo, a_hi)
    t_high_thr = max(a_lo, a_hi)
    cells = _gossip_joint_cells(m, t_low_thr, t_high_thr)
    if a_lo > a_hi:
        cells = cells.T
    counts = gen.multinomial(n, cells.ravel()).reshape(3, 3)
    nxt_lo = int(counts[2, :].sum())
    nxt_hi = int(counts[:, 2].sum())

    coin_thr, extra_thr = (0.5, a_hi)
    if swap_tie_thresholds:
        coin_thr, extra_thr = extra_thr, coin_thr
    m_both = int(counts[1, 1])
    if m_both:
        lo_t = min(coin_thr, extra_thr)
        hi_t = max(coin_thr, extra_thr)
        shared, middle, _ = gen.multinomial(m_both, (lo_t, hi_t - lo_t, 1.0 - hi_t))
        nxt_lo += int(shared)
        nxt_hi += int(shared)
        if coin_thr > extra_thr:
            nxt_lo += int(middle)
        elif extra_thr > coin_thr:
            nxt_hi += int(middle)
    m_low_tie = int(counts[1, 0] + counts[1, 2])
    if m_low_tie:
        nxt_lo += int(gen.binomial(m_low_tie, coin_thr))
    m_high_tie = int(counts[0, 1] + counts[2, 1])
    if m_high_tie:
        nxt_hi += int(gen.binomial(m_high_tie, extra_thr))
    return nxt_lo, nxt_hi


def _gossip_expected_order(j_low: int, n: int, s_lo: int, s_hi: int) -> int:
    """Row order of the gossip pair: the sign of the adoption gap.

    Both rows are Binomial(n, .), and Binomial CDFs are strictly ordered by
    their success probabilities, so the exact row comparison reduces to
    comparing adoption probabilities.
    """
    dq = adoption_probability(j_low + 1, s_hi / n) - adoption_probability(j_low, s_lo / n)
    if dq > 0.0:
        return 1
    if dq < 0.0:
        return -1
    return 0


def run_coupled_gossip(j_low: int, n: int, s0: int, stream: np.random.Generator,
                       round_cap: int | None = None,
                       _swap_tie_thresholds: bool = False) -> CoupledTrace:
    """Trace one structurally coupled run of the gossip pair.

    Even j_low couples P_j_low and P_j_low+1 through shared samples per
    agent; odd j_low has identical rows on both sides, so a single binomial
    draw per round drives both and the trajectories coincide exactly.
    `_swap_tie_thresholds` corrupts the tie resolution of doubly tied agents
    (negative control for the violation machinery).
    """
    spec_low = ProcessSpec(j_low)
    if spec_low.j + 1 > 64:
        raise ValidationError(f"coupled pair needs j_low + 1 <= 64, got {j_low}")
    validate_state(n, s0)
    cap = default_step_cap(ModelKind.GOSSIP, n) if round_cap is None else int(round_cap)
    if cap < 1:
        raise ValidationError(f"round_cap must be positive, got {cap}")
    identical = not spec_low.ties_possible
    m = j_low // 2

    s_lo = s_hi = s0
    times = [0]
    xs_lo = [s_lo]
    xs_hi = [s_hi]
    flags = [True]
    t = 0
    t_low = 0 if s_lo in (0, n) else -1
    t_high = 0 if s_hi in (0, n) else -1
    violation = None
    while (t_low < 0 or t_high < 0) and t < cap:
        order = _gossip_expected_order(j_low, n, s_lo, s_hi)
        if identical:
            q = adoption_probability(j_low, s_lo / n)
            nxt = int(stream.binomial(n, q))
            s_lo = s_hi = nxt
        else:
            s_lo, s_hi = _coupled_gossip_round(
                m, n, s_lo, s_hi, stream, _swap_tie_thresholds)
        t += 1
        if t_low < 0 and s_lo in (0, n):
            t_low = t
        if t_high < 0 and s_hi in (0, n):
            t_high = t
        bad = (order > 0 and s_hi < s_lo) or (order < 0 and s_hi > s_lo)
        times.append(t)
        xs_lo.append(s_lo)
        xs_hi.append(s_hi)
        flags.append(not bad)
        if bad:
            violation = t
            break
    return CoupledTrace(
        model=ModelKind.GOSSIP, j_low=j_low, n=n, s0=s0, cap=cap,
        times=np.asarray(times, dtype=np.int64),
        x_low=np.asarray(xs_lo, dtype=np.int64),
        x_high=np.asarray(xs_hi, dtype=np.int64),
        flags=np.asarray(flags, dtype=bool),
        t_low=None if t_low < 0 else t_low,
        t_high=None if t_high < 0 else t_high,
        winner_low=_winner(n, s_lo), winner_high=_winner(n, s_hi),
        violation_step=violation, steps=t)


@dataclass
class CoupledBatchStats:
    """Aggregate of many coupled runs from one configuration."""

    model: ModelKind
    j_low: int
    n: int
    s0: int
    runs: int
    cap: int
    t_low: np.ndarray
    t_high: np.ndarray
    winner_low: np.ndarray
    winner_high: np.ndarray
    steps: np.ndarray
    violations: int = 0

    @property
    def j_high(self) -> int:
        return self.j_low + 1

    def summary(self) -> dict:
        both = (self.t_low >= 0) & (self.t_high >= 0)
        conv_low = self.t_low[self.t_low >= 0]
        conv_high = self.t_high[self.t_high >= 0]
        return {
            "schema_version": SCHEMA_VERSION,
            "model": str(self.model),
            "j_low": self.j_low,
            "j_high": self.j_high,
            "n": self.n,
            "s0": self.s0,
            "runs": self.runs,
            "cap": self.cap,
            "violations": self.violations,
            "censored_low": int(np.sum(self.t_low < 0)),
            "censored_high": int(np.sum(self.t_high < 0)),
            "mean_t_low": float(np.mean(conv_low)) if conv_low.size else None,
            "mean_t_high": float(np.mean(conv_high)) if conv_high.size else None,
            "frac_high_no_later": (float(np.mean(self.t_high[both] <= self.t_low[both]))
                                   if np.any(both) else None),
            "winner_agree": float(np.mean(self.winner_low == self.winner_high)),
        }


def run_coupled_batch(model: ModelKind | str, j_low: int, n: int, s0: int,
                      policy: SeedPolicy, runs: int,
                      cap: int | None = None,
                      raise_on_violation: bool = True) -> CoupledBatchStats:
    """Run many coupled pairs on independent streams; hard-fail on violation.

    Run i consumes policy.stream(i), so the batch is reproducible and
    order-independent.  The sequential path uses the compiled loop and, when
    a violation is reported, replays that run with the traced reference
    runner (draw-for-draw identical) to attach the full trace to the raised
    error.
    """
    model = ModelKind(model)
    if runs < 1:
        raise ValidationError(f"runs must be positive, got {runs}")
    if cap is None:
        cap = default_step_cap(model, n)
    ProcessSpec(j_low)
    validate_state(n, s0)

    t_low = np.empty(runs, dtype=np.int64)
    t_high = np.empty(runs, dtype=np.int64)
    steps = np.empty(runs, dtype=np.int64)
    w_low = np.empty(runs, dtype="<U1")
    w_high = np.empty(runs, dtype="<U1")
    violations = 0

    if model is ModelKind.SEQUENTIAL:
        _loops.warm_up()
        down_lo, mid_lo = _seq_thresholds(j_low, n)
        down_hi, mid_hi = _seq_thresholds(j_low + 1, n)
        for i in range(runs):
            gen = policy.stream(i)
            tl, th, sl, sh, viol, nsteps = _loops.coupled_seq_run(
                gen, down_lo, mid_lo, down_hi, mid_hi, n, s0, cap)
            if viol >= 0:
                violations += 1
                if raise_on_violation:
                    trace = run_coupled_sequential(j_low, n, s0, policy.stream(i),
                                                   step_cap=cap)
                    raise CouplingViolationError(
                        f"coupled order violated at step {viol} (run {i}, "
                        f"j_low={j_low}, n={n}, s0={s0})",
                        trace=trace, run_index=i)
            t_low[i] = tl
            t_high[i] = th
            steps[i] = nsteps
            w_low[i] = _winner(n, sl) or ""
            w_high[i] = _winner(n, sh) or ""
    else:
        for i in range(runs):
            trace = run_coupled_gossip(j_low, n, s0, policy.stream(i), round_cap=cap)
            if trace.violation_step is not None:
                violations += 1
                if raise_on_violation:
                    raise CouplingViolationError(
                        f"coupled order violated at round {trace.violation_step} "
                        f"(run {i}, j_low={j_low}, n={n}, s0={s0})",
                        trace=trace, run_index=i)
            t_low[i] = -1 if trace.t_low is None else trace.t_low
            t_high[i] = -1 if trace.t_high is None else trace.t_high
            steps[i] = trace.steps
            w_low[i] = trace.winner_low or ""
            w_high[i] = trace.winner_high or ""
    return CoupledBatchStats(model=model, j_low=j_low, n=n, s0=s0, runs=runs,
                             cap=cap, t_low=t_low, t_high=t_high,
                             winner_low=w_low, winner_high=w_high,
                             steps=steps, violations=violations)


def write_coupled_csv(stats: CoupledBatchStats, fh: IO[str]) -> None:
    """One row per coupled run; -1 in a time column means censored at cap."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["run_index", "t_low", "t_high", "winner_low", "winner_high",
                     "steps"])
    for i in range(stats.runs):
        writer.writerow([i, int(stats.t_low[i]), int(stats.t_high[i]),
                         stats.winner_low[i], stats.winner_high[i],
                         int(stats.steps[i])])


@dataclass
class EmpiricalDominance:
    """Empirical survival comparison of two independent run ensembles."""

    model: ModelKind
    j_low: int
    n: int
    s0: int
    runs: int
    ts: np.ndarray
    survival_low: np.ndarray
    survival_high: np.ndarray
    margin: np.ndarray
    exceed: np.ndarray
    censored_low: int
    censored_high: int

    @property
    def consistent(self) -> bool:
        """True when the stronger process's survival never sits above the
        weaker one's by more than the three-sigma sampling band."""
        return not bool(np.any(self.exceed))

    def summary(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "model": str(self.model),
            "j_low": self.j_low,
            "j_high": self.j_low + 1,
            "n": self.n,
            "s0": self.s0,
            "runs": self.runs,
            "grid_points": int(self.ts.size),
            "exceedances": int(np.sum(self.exceed)),
            "consistent": self.consistent,
            "censored_low": self.censored_low,
            "censored_high": self.censored_high,
        }


def estimate_dominance_empirical(model: ModelKind | str, j_low: int, n: int,
                                 s0: int, runs: int, policy: SeedPolicy,
                                 step_cap: int | None = None,
                                 grid_points: int = 200) -> EmpiricalDominance:
    """Compare absorption-time survival curves of P_j_low and P_j_low+1.

    The two ensembles are independent (streams 2i for the weaker process,
    2i + 1 for the stronger).  Censored runs count as still live at every
    grid time.  The exceed mask marks grid times where the stronger
    process's empirical survival exceeds the weaker's by more than three
    combined standard errors; rate-one-in-ten-thousand noise, so any
    systematic dominance failure shows up as a cluster.
    """
    from .simulate import run_to_consensus

    model = ModelKind(model)
    if runs < 1:
        raise ValidationError(f"runs must be positive, got {runs}")
    if cap := step_cap:
        cap = int(cap)
    else:
        cap = default_step_cap(model, n)

    def ensemble(j: int, offset: int) -> tuple[np.ndarray, int]:
        times = np.empty(runs, dtype=np.int64)
        censored = 0
        spec = ProcessSpec(j)
        for i in range(runs):
            rec = run_to_consensus(spec, model, n, s0, policy.stream(2 * i + offset),
                                   step_cap=cap, run_index=2 * i + offset,
                                   master_seed=policy.master_seed)
            if rec.censored:
                censored += 1
                times[i] = cap + 1
            else:
                times[i] = rec.steps
        return times, censored

    t_lo, cens_lo = ensemble(j_low, 0)
    t_hi, cens_hi = ensemble(j_low + 1, 1)
    horizon = max(int(t_lo[t_lo <= cap].max(initial=1)),
                  int(t_hi[t_hi <= cap].max(initial=1)))
    ts = np.unique(np.linspace(0, horizon, num=min(grid_points, horizon + 1),
                               dtype=np.int64))
    surv_lo = (t_lo[None, :] > ts[:, None]).mean(axis=1)
    surv_hi = (t_hi[None, :] > ts[:, None]).mean(axis=1)
    se = np.sqrt(surv_lo * (1.0 - surv_lo) / runs) + np.sqrt(
        surv_hi * (1.0 - surv_hi) / runs)
    margin = 3.0 * se
    exceed = surv_hi > surv_lo + margin
    return EmpiricalDominance(model=model, j_low=j_low, n=n, s0=s0, runs=runs,
                              ts=ts, survival_low=surv_lo, survival_high=surv_hi,
                              margin=margin, exceed=exceed,
                              censored_low=cens_lo, censored_high=cens_hi)


def check_structural_dominance(j_lows: Iterable[int] = (2, 4, 6, 8, 10),
                               populations: Iterable[int] = (10, 25, 64, 1000)):
    """Per-agent order-violation mass of the gossip coupling is exactly zero.

    For the even pair (P_2m, P_2m+1) at a state pair on a common majority
    side, the shared-sample construction makes each agent's adoption
    indicators nested: the probability that the weaker process adopts the
    reference opinion while the stronger does not (or the mirror below one
    half) is identically zero.  This check recomputes that mass exactly from
    the joint class distribution and the tie-resolution intervals, over a
    grid of states, and requires literal 0.0.  The same cell arithmetic also
    certifies nesting of the doubly tied group: the high-threshold tie class
    never outnumbers what the low threshold allows (upper-triangular joint).
    """
    from .core import CheckResult

    result = CheckResult(name="structural gossip dominance", passed=True, checked=0)
    for j_low in j_lows:
        if j_low % 2:
            continue
        m = j_low // 2
        for n in populations:
            half_up = [s for s in range(n // 2 + n % 2, n + 1)]
            sample = half_up if len(half_up) <= 40 else half_up[:: max(1, len(half_up) // 40)]
            for s_hi in sample:
                for gap in (0, 1, 2, n // 10):
                    s_lo = s_hi - gap
                    if s_lo < 0 or 2 * s_hi < n:
                        continue
                    a_lo, a_hi = s_lo / n, s_hi / n
                    cells = _gossip_joint_cells(m, min(a_lo, a_hi), max(a_lo, a_hi))
                    if a_lo > a_hi:
                        cells = cells.T
                    # P[low adopts, high does not], split by joint class:
                    leak = (cells[2, 0] + cells[2, 1] * (1.0 - a_hi)
                            + cells[1, 0] * 0.5
                            + cells[1, 1] * max(0.0, 0.5 - a_hi))
                    a_lo_m, a_hi_m = (n - s_lo) / n, (n - s_hi) / n
                    mcells = _gossip_joint_cells(m, min(a_lo_m, a_hi_m),
                                                 max(a_lo_m, a_hi_m))
                    if a_lo_m > a_hi_m:
                        mcells = mcells.T
                    # mirrored side (both at or below one half, high behind):
                    # P[high adopts a, low does not]
                    mleak = (mcells[0, 2] + mcells[1, 2] * 0.5
                             + mcells[0, 1] * a_hi_m
                             + mcells[1, 1] * max(0.0, a_hi_m - 0.5))
                    worst = max(leak, mleak)
                    result.checked += 1
                    if worst != 0.0:
                        result.record(
                            f"j_low={j_low} n={n} s_lo={s_lo} s_hi={s_hi}", worst)
    result.detail = "exact per-agent violation mass on common majority sides"
    return result


def check_quantile_order(j_lows: Iterable[int] = (2, 4, 6, 8, 10),
                         populations: Iterable[int] = (10, 25, 64),
                         grid_points: int = 1000):
    """Shared-uniform steps preserve the expected order at every u.

    For each pair (P_j, P_{j+1}), every common state, and a dense uniform
    grid, pushes the same u through both inverse row CDFs and verifies the
    realized pair matches the exact row order.  This is the constructive
    counterpart of the row-CDF dominance sweep.
    """
    from .core import CheckResult

    result = CheckResult(name="quantile coupling order", passed=True, checked=0)
    us = (np.arange(grid_points) + 0.5) / grid_points
    for j_low in j_lows:
        for n in populations:
            k_lo = sequential_kernel(j_low, n)
            k_hi = sequential_kernel(j_low + 1, n)
            cums_lo = [np.cumsum(k_lo.row(s)) for s in range(n + 1)]
            cums_hi = [np.cumsum(k_hi.row(s)) for s in range(n + 1)]
            for s in range(n + 1):
                order = expected_order(k_lo, k_hi, s, s)
                nxt_lo = np.searchsorted(cums_lo[s], us, side="right")
                nxt_hi = np.searchsorted(cums_hi[s], us, side="right")
                if order > 0:
                    worst = int(np.min(nxt_hi - nxt_lo))
                elif order < 0:
                    worst = int(np.min(nxt_lo - nxt_hi))
                else:
                    worst = 0
                result.checked += 1
                if worst < 0:
                    result.record(f"j_low={j_low} n={n} s={s} order={order}",
                                  float(-worst))
    result.detail = (f"pairs j_low in {tuple(j_lows)}, n in {tuple(populations)}, "
                     f"{grid_points}-point u grid")
    return result
