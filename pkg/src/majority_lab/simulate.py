"""Monte Carlo drivers for both activation models.

Sequential runs are simulated by drawing the activated agent's sample
directly (see `_loops` for the documented draw order); they deliberately do
not consult the precomputed adoption curve, so simulation and kernel
analytics stay independent routes to the same distributions.  Gossip rounds
do use the adoption curve: the round-end count of a synchronous round is
exactly Binomial(n, q(alpha)), so one binomial variate per round replaces n
per-agent samples.  A literal per-agent implementation is kept alongside for
small-n cross-checks.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from . import _loops
from .core import (
    MajorityState,
    ModelKind,
    ProcessSpec,
    ValidationError,
    horizon,
)
from .kernels import _adoption_pair

SIMULATION_CAP_FACTOR = 100.0
SCHEMA_VERSION = 1

RUN_CSV_COLUMNS = (
    "run_index",
    "master_seed",
    "n",
    "j",
    "model",
    "s0",
    "winner",
    "steps",
    "parallel_time",
    "censored",
)


def default_step_cap(model: ModelKind, n: int) -> int:
    """Simulation budget: ceil(100 n ln n) steps or ceil(100 ln n) rounds."""
    return horizon(model, n, SIMULATION_CAP_FACTOR)


@dataclass
class TrajectoryProbe:
    """Sampled (t, count) pairs at a fixed cadence plus whole-run extremes."""

    every: int
    times: np.ndarray
    states: np.ndarray
    min_count: int
    max_count: int

    @property
    def min_bias(self) -> int:
        # n is recoverable from the owning record; stored leads are raw counts
        return int(self.min_count)


@dataclass
class RunRecord:
    """One completed (or censored) run of a single process."""

    run_index: int
    master_seed: int
    n: int
    j: int
    model: ModelKind
    s0: int
    winner: str  # "a", "b", or "" when censored
    steps: int
    parallel_time: float
    censored: bool
    probe: TrajectoryProbe | None = field(default=None, repr=False, compare=False)

    def csv_row(self) -> list:
        return [
            self.run_index,
            self.master_seed,
            self.n,
            self.j,
            str(self.model),
            self.s0,
            self.winner,
            self.steps,
            repr(self.parallel_time),
            "true" if self.censored else "false",
        ]


def sequential_step(
    spec: ProcessSpec, state: MajorityState, gen: np.random.Generator
) -> MajorityState:
    """One direct-sampled sequential step.

    Mirrors `_loops.seq_step` draw for draw: activated agent's opinion, then
    lazily sampled opinions with early exit at quorum, then a tie coin for
    even j.  Majority never consults the adoption curve here.
    """
    n, s, j = state.n, state.s, spec.j
    alpha = s / n
    holds_a = gen.random() < alpha
    quorum = spec.quorum
    ca = 0
    cb = 0
    for _ in range(j):
        if gen.random() < alpha:
            ca += 1
        else:
            cb += 1
        if ca >= quorum or cb >= quorum:
            break
    if ca >= quorum:
        adopt_a = True
    elif cb >= quorum:
        adopt_a = False
    else:
        adopt_a = gen.random() < 0.5
    return MajorityState(n, s + int(adopt_a) - int(holds_a))


def gossip_round(
    spec: ProcessSpec, state: MajorityState, gen: np.random.Generator
) -> MajorityState:
    """One synchronous round via the exact Binomial(n, q(alpha)) shortcut."""
    if state.is_absorbing:
        return state
    q, _ = _adoption_pair(spec.j, state.alpha)
    return MajorityState(state.n, int(gen.binomial(state.n, q)))


def gossip_round_agentwise(
    spec: ProcessSpec, state: MajorityState, gen: np.random.Generator
) -> MajorityState:
    """Literal per-agent round; the reference the binomial shortcut is tested against.

    Draw order: an n x j uniform block (row per agent, draws in sample order),
    then one tie-break uniform per tied agent in agent order.  Intended for
    small n; cost is Theta(n j) per round.
    """
    n, s, j = state.n, state.s, spec.j
    alpha = s / n
    counts = (gen.random((n, j)) < alpha).sum(axis=1)
    adopt = counts >= spec.quorum
    if spec.ties_possible:
        ties = counts == j // 2
        k = int(ties.sum())
        if k:
            adopt[ties] = gen.random(k) < 0.5
    return MajorityState(n, int(adopt.sum()))


def _winner(n: int, s: int) -> str:
    if s == n:
        return "a"
    if s == 0:
        return "b"
    return ""


def run_to_consensus(
    spec: ProcessSpec,
    model: ModelKind,
    n: int,
    s0: int,
    stream: np.random.Generator,
    step_cap: int | None = None,
    probe_every: int | None = None,
    run_index: int = 0,
    master_seed: int = 0,
) -> RunRecord:
    """Drive one run to absorption or to the cap.

    A run that exhausts the cap is returned with ``censored=True`` and an
    empty winner; aggregation layers must never fold such a run into
    convergence statistics.
    """
    spec = spec if isinstance(spec, ProcessSpec) else ProcessSpec(spec)
    start = MajorityState(n, s0)
    if step_cap is None:
        step_cap = default_step_cap(model, n)
    if step_cap < 1:
        raise ValidationError(f"step_cap must be >= 1, got {step_cap}")
    if probe_every is not None and probe_every < 1:
        raise ValidationError(f"probe_every must be >= 1, got {probe_every}")

    probe = None
    if model is ModelKind.SEQUENTIAL:
        _loops.warm_up()
        if probe_every is None:
            s_final, steps = _loops.seq_run(stream, n, s0, spec.j, step_cap)
        else:
            capacity = step_cap // probe_every + 3
            ts = np.zeros(capacity, dtype=np.int64)
            ss = np.zeros(capacity, dtype=np.int64)
            s_final, steps, k, min_s, max_s = _loops.seq_run_probe(
                stream, n, s0, spec.j, step_cap, probe_every, ts, ss
            )
            probe = TrajectoryProbe(
                every=probe_every,
                times=ts[:k].copy(),
                states=ss[:k].copy(),
                min_count=int(min_s),
                max_count=int(max_s),
            )
        parallel_time = steps / n
    else:
        state = start
        steps = 0
        min_s = max_s = state.s
        ts_list = [0]
        ss_list = [state.s]
        while not state.is_absorbing and steps < step_cap:
            state = gossip_round(spec, state, stream)
            steps += 1
            min_s = min(min_s, state.s)
            max_s = max(max_s, state.s)
            if probe_every is not None and steps % probe_every == 0:
                ts_list.append(steps)
                ss_list.append(state.s)
        if probe_every is not None:
            if ts_list[-1] != steps:
                ts_list.append(steps)
                ss_list.append(state.s)
            probe = TrajectoryProbe(
                every=probe_every,
                times=np.array(ts_list, dtype=np.int64),
                states=np.array(ss_list, dtype=np.int64),
                min_count=min_s,
                max_count=max_s,
            )
        s_final = state.s
        parallel_time = float(steps)

    s_final = int(s_final)
    steps = int(steps)
    censored = not (s_final == 0 or s_final == n)
    return RunRecord(
        run_index=run_index,
        master_seed=master_seed,
        n=n,
        j=spec.j,
        model=model,
        s0=s0,
        winner=_winner(n, s_final),
        steps=steps,
        parallel_time=parallel_time,
        censored=censored,
        probe=probe,
    )


def sample_step_outcomes(
    spec: ProcessSpec | int,
    n: int,
    s: int,
    reps: int,
    stream: np.random.Generator,
) -> tuple[int, int, int]:
    """(down, stay, up) counts over ``reps`` direct-sampled sequential steps at s."""
    spec = spec if isinstance(spec, ProcessSpec) else ProcessSpec(spec)
    MajorityState(n, s)
    if reps < 1:
        raise ValidationError(f"reps must be >= 1, got {reps}")
    _loops.warm_up()
    down, stay, up = _loops.seq_step_counts(stream, n, s, spec.j, reps)
    return int(down), int(stay), int(up)


def write_records_csv(records: Iterable[RunRecord], fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(RUN_CSV_COLUMNS)
    for record in records:
        writer.writerow(record.csv_row())


def records_summary(records: Sequence[RunRecord]) -> dict:
    """JSON-ready aggregate of a homogeneous batch of runs."""
    converged = [r for r in records if not r.censored]
    steps = np.array([r.steps for r in converged], dtype=float)
    out = {
        "schema_version": SCHEMA_VERSION,
        "runs": len(records),
        "converged": len(converged),
        "censored": len(records) - len(converged),
        "winner_a_fraction": (
            sum(1 for r in converged if r.winner == "a") / len(converged)
            if converged
            else math.nan
        ),
        "mean_steps": float(steps.mean()) if len(steps) else math.nan,
        "mean_parallel_time": (
            float(np.mean([r.parallel_time for r in converged])) if converged else math.nan
        ),
    }
    return out


def dump_summary(summary: dict, fh: IO[str]) -> None:
    json.dump(summary, fh, indent=2, sort_keys=True)
    fh.write("\n")
