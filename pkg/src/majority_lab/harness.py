"""Experiment orchestration: run grids, cell statistics, and claim checks.

A grid is a cross product of sample sizes j and population sizes n for one
model, with a fixed number of runs per cell.  Each run owns a derived stream
keyed by (cell index, run index), so results are bit-identical across
repeated invocations and worker counts; workers only change wall time.

The check_* functions package the quantitative claims about the 3-sample
process that simulation can probe: majority preservation from a sqrt(n ln n)
advantage, bias doubling with a floor on the lead, and the extinction-time
tail bound driven by the closed-form drift.
"""

from __future__ import annotations

import concurrent.futures
import math
import os
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import IO, Sequence

import csv
import json

import numpy as np

from . import _loops
from .chain import AbsorptionProfile
from .core import (
    ModelKind,
    ProcessSpec,
    SeedPolicy,
    ValidationError,
    horizon,
    validate_state,
)
from .simulate import (
    SCHEMA_VERSION,
    RunRecord,
    default_step_cap,
    run_to_consensus,
    write_records_csv,
)

__all__ = [
    "threads",
    "InitRule",
    "parse_init",
    "ExperimentConfig",
    "CellStats",
    "CELL_CSV_COLUMNS",
    "run_grid",
    "write_cells_csv",
    "read_cells_csv",
    "run_cell",
    "PreservationResult",
    "check_majority_preservation",
    "BiasDoublingResult",
    "check_bias_doubling",
    "DriftTailResult",
    "check_drift_tail",
    "emit_plot_data",
    "write_hitting_times_csv",
]


def threads() -> int:
    """Worker cap: MAJORITY_LAB_THREADS if set, else available parallelism."""
    raw = os.environ.get("MAJORITY_LAB_THREADS", "").strip()
    if raw:
        try:
            value = int(raw)
        except ValueError as exc:
            raise ValidationError(
                f"MAJORITY_LAB_THREADS must be an integer, got {raw!r}") from exc
        if value < 1:
            raise ValidationError(
                f"MAJORITY_LAB_THREADS must be positive, got {value}")
        return value
    return os.cpu_count() or 1


@dataclass(frozen=True)
class InitRule:
    """Initial a-count rule: balanced, bias:ZETA, or count:S0.

    balanced puts floor(n/2) agents on opinion a.  bias:ZETA starts from
    ceil(n/2 + ZETA * sqrt(n ln n)), the advantage scale at which the
    majority is preserved with high probability.  count:S0 is literal.
    """

    kind: str
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("balanced", "bias", "count"):
            raise ValidationError(f"unknown init rule {self.kind!r}")
        if self.kind == "bias" and self.value <= 0:
            raise ValidationError(f"bias multiplier must be positive, got {self.value}")
        if self.kind == "count" and (self.value != int(self.value) or self.value < 0):
            raise ValidationError(f"count must be a nonnegative integer, got {self.value}")

    def resolve(self, n: int) -> int:
        if self.kind == "balanced":
            return n // 2
        if self.kind == "bias":
            s0 = math.ceil(n / 2 + self.value * math.sqrt(n * math.log(n)))
            if s0 > n:
                raise ValidationError(
                    f"bias rule overflows the population: n={n}, "
                    f"zeta={self.value} gives s0={s0} > n")
            return s0
        s0 = int(self.value)
        validate_state(n, s0)
        return s0

    def __str__(self) -> str:
        if self.kind == "balanced":
            return "balanced"
        if self.kind == "bias":
            return f"bias:{self.value:g}"
        return f"count:{int(self.value)}"


def parse_init(text: str) -> InitRule:
    text = text.strip()
    if text == "balanced":
        return InitRule("balanced")
    if text.startswith("bias:"):
        return InitRule("bias", float(text[5:]))
    if text.startswith("count:"):
        return InitRule("count", float(text[6:]))
    raise ValidationError(
        f"init must be 'balanced', 'bias:ZETA', or 'count:S0', got {text!r}")


_CONFIG_KEYS = ("model", "j", "n", "runs", "init", "seed", "step-cap", "base")


@dataclass(frozen=True)
class ExperimentConfig:
    """One grid: a model, j and n lists, runs per cell, init rule, seed."""

    model: ModelKind
    j_values: tuple[int, ...]
    n_values: tuple[int, ...]
    runs: int
    init: InitRule
    master_seed: int
    step_cap_mult: float | None = None
    base: str = "e"

    def __post_init__(self):
        object.__setattr__(self, "model", ModelKind(self.model))
        object.__setattr__(self, "j_values", tuple(int(j) for j in self.j_values))
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        if self.runs < 1:
            raise ValidationError(f"runs must be >= 1, got {self.runs}")
        if not self.j_values:
            raise ValidationError("j list must not be empty")
        if not self.n_values:
            raise ValidationError("n list must not be empty")
        for j in self.j_values:
            ProcessSpec(j)
        for n in self.n_values:
            if n < 1:
                raise ValidationError(f"population sizes must be positive, got {n}")
        if self.step_cap_mult is not None and self.step_cap_mult <= 0:
            raise ValidationError(
                f"step-cap multiplier must be positive, got {self.step_cap_mult}")
        if self.base not in ("e", "2"):
            raise ValidationError(f"normalization base must be 'e' or '2', got {self.base!r}")

    def cells(self) -> list[tuple[int, int, int]]:
        """(cell_index, j, n) in deterministic order."""
        return [(i, j, n) for i, (j, n) in
                enumerate(product(self.j_values, self.n_values))]

    def step_cap(self, n: int) -> int:
        if self.step_cap_mult is None:
            return default_step_cap(self.model, n)
        return horizon(self.model, n, self.step_cap_mult)

    def to_dict(self) -> dict:
        return {
            "model": str(self.model),
            "j": list(self.j_values),
            "n": list(self.n_values),
            "runs": self.runs,
            "init": str(self.init),
            "seed": self.master_seed,
            "step-cap": self.step_cap_mult,
            "base": self.base,
        }

    @classmethod
    def from_items(cls, items: dict[str, str]) -> "ExperimentConfig":
        """Build from flat key=value strings (config file or CLI mirror)."""
        unknown = set(items) - set(_CONFIG_KEYS)
        if unknown:
            raise ValidationError(
                f"unknown config keys: {sorted(unknown)}; known: {_CONFIG_KEYS}")
        missing = [k for k in ("model", "j", "n") if k not in items]
        if missing:
            raise ValidationError(f"config is missing required keys: {missing}")
        return cls(
            model=ModelKind(items["model"]),
            j_values=tuple(int(x) for x in str(items["j"]).split(",") if x.strip()),
            n_values=tuple(int(x) for x in str(items["n"]).split(",") if x.strip()),
            runs=int(items.get("runs", 100)),
            init=parse_init(items.get("init", "balanced")),
            master_seed=int(items.get("seed", 0)),
            step_cap_mult=(float(items["step-cap"])
                           if items.get("step-cap") not in (None, "", "default")
                           else None),
            base=items.get("base", "e"),
        )

    @classmethod
    def from_file(cls, path: str | Path,
                  overrides: dict[str, str] | None = None) -> "ExperimentConfig":
        """Parse a flat `key = value` file; later keys win; overrides last."""
        items: dict[str, str] = {}
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(
                    f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, _, value = line.partition("=")
            items[key.strip()] = value.strip()
        if overrides:
            items.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_items(items)


def _norm_divisor(model: ModelKind, n: int, base: str) -> float:
    """Parallel-time divisor: rounds per ln n (gossip) or interactions per
    n ln n (sequential); base '2' swaps ln for log2."""
    log_n = math.log(n) if base == "e" else math.log2(n)
    if model is ModelKind.GOSSIP:
        return log_n
    return n * log_n


def _quartiles(values: np.ndarray) -> tuple[float, float, float, float, float]:
    qs = np.percentile(values, [0, 25, 50, 75, 100])
    return tuple(float(q) for q in qs)


@dataclass
class CellStats:
    """Converged-run statistics for one (model, j, n) cell.

    Normalized columns divide steps by n ln n (sequential) or rounds by ln n
    (gossip); the log2 variants divide by n log2 n and log2 n.  Censored
    runs are counted and excluded from every average.
    """

    model: ModelKind
    j: int
    n: int
    s0: int
    runs: int
    censored: int
    winner_a_fraction: float
    mean_steps: float
    std_steps: float
    steps_quartiles: tuple[float, float, float, float, float]
    mean_norm_ln: float
    std_norm_ln: float
    norm_ln_quartiles: tuple[float, float, float, float, float]
    mean_norm_log2: float
    std_norm_log2: float
    norm_log2_quartiles: tuple[float, float, float, float, float]

    @classmethod
    def from_records(cls, model: ModelKind, j: int, n: int, s0: int,
                     records: Sequence[RunRecord]) -> "CellStats":
        if not records:
            raise ValidationError("cannot summarize an empty cell")
        done = [r for r in records if not r.censored]
        censored = len(records) - len(done)
        if not done:
            nan5 = (math.nan,) * 5
            return cls(model=model, j=j, n=n, s0=s0, runs=len(records),
                       censored=censored, winner_a_fraction=math.nan,
                       mean_steps=math.nan, std_steps=math.nan,
                       steps_quartiles=nan5,
                       mean_norm_ln=math.nan, std_norm_ln=math.nan,
                       norm_ln_quartiles=nan5,
                       mean_norm_log2=math.nan, std_norm_log2=math.nan,
                       norm_log2_quartiles=nan5)
        steps = np.array([r.steps for r in done], dtype=np.float64)
        div_ln = _norm_divisor(model, n, "e")
        div_log2 = _norm_divisor(model, n, "2")
        wins_a = sum(1 for r in done if r.winner == "a")

        def spread(x: np.ndarray) -> float:
            return float(np.std(x, ddof=1)) if x.size > 1 else 0.0

        return cls(
            model=model, j=j, n=n, s0=s0, runs=len(records), censored=censored,
            winner_a_fraction=wins_a / len(done),
            mean_steps=float(steps.mean()), std_steps=spread(steps),
            steps_quartiles=_quartiles(steps),
            mean_norm_ln=float((steps / div_ln).mean()),
            std_norm_ln=spread(steps / div_ln),
            norm_ln_quartiles=_quartiles(steps / div_ln),
            mean_norm_log2=float((steps / div_log2).mean()),
            std_norm_log2=spread(steps / div_log2),
            norm_log2_quartiles=_quartiles(steps / div_log2),
        )

    def csv_row(self) -> list:
        row = [str(self.model), self.j, self.n, self.s0, self.runs, self.censored,
               _fmt(self.winner_a_fraction),
               _fmt(self.mean_steps), _fmt(self.std_steps),
               *(_fmt(q) for q in self.steps_quartiles),
               _fmt(self.mean_norm_ln), _fmt(self.std_norm_ln),
               *(_fmt(q) for q in self.norm_ln_quartiles),
               _fmt(self.mean_norm_log2), _fmt(self.std_norm_log2),
               *(_fmt(q) for q in self.norm_log2_quartiles)]
        return row

    def summary(self) -> dict:
        return {
            "model": str(self.model),
            "j": self.j,
            "n": self.n,
            "s0": self.s0,
            "runs": self.runs,
            "censored": self.censored,
            "winner_a_fraction": self.winner_a_fraction,
            "mean_steps": self.mean_steps,
            "mean_norm_ln": self.mean_norm_ln,
            "mean_norm_log2": self.mean_norm_log2,
        }


def _fmt(x: float) -> str:
    """Shortest round-trip decimal; keeps CSV output byte-stable."""
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return repr(float(x))


CELL_CSV_COLUMNS = (
    "model", "j", "n", "s0", "runs", "censored", "winner_a_fraction",
    "mean_steps", "std_steps",
    "min_steps", "q1_steps", "median_steps", "q3_steps", "max_steps",
    "mean_norm_ln", "std_norm_ln",
    "min_norm_ln", "q1_norm_ln", "median_norm_ln", "q3_norm_ln", "max_norm_ln",
    "mean_norm_log2", "std_norm_log2",
    "min_norm_log2", "q1_norm_log2", "median_norm_log2", "q3_norm_log2",
    "max_norm_log2",
)


def write_cells_csv(cells: Sequence[CellStats], fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CELL_CSV_COLUMNS)
    for cell in cells:
        writer.writerow(cell.csv_row())


def read_cells_csv(fh: IO[str]) -> list[dict]:
    """Plot-side reader: rows as dicts with numeric fields parsed."""
    rows = []
    for rec in csv.DictReader(fh):
        parsed: dict = {"model": rec["model"]}
        for key, value in rec.items():
            if key == "model":
                continue
            parsed[key] = (int(value) if key in ("j", "n", "s0", "runs", "censored")
                           else float(value))
        rows.append(parsed)
    if not rows:
        raise ValidationError("cells CSV is empty")
    return rows


def _cell_records(config: ExperimentConfig, policy: SeedPolicy, cell_index: int,
                  j: int, n: int, workers: int) -> list[RunRecord]:
    spec = ProcessSpec(j)
    s0 = config.init.resolve(n)
    cap = config.step_cap(n)

    def one(run_index: int) -> RunRecord:
        stream = policy.stream((cell_index << 32) | run_index)
        return run_to_consensus(spec, config.model, n, s0, stream,
                                step_cap=cap, run_index=run_index,
                                master_seed=policy.master_seed)

    if workers <= 1 or config.runs == 1:
        return [one(i) for i in range(config.runs)]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        # map preserves submission order, so output does not depend on timing
        return list(pool.map(one, range(config.runs)))


def run_cell(config: ExperimentConfig,
             cell_index: int = 0) -> tuple[CellStats, list[RunRecord]]:
    """Execute one cell of the grid and keep the raw records.

    Stream keys match run_grid's, so a one-cell config produces the same
    trajectories whether it is run directly or as part of a grid.
    """
    cells = config.cells()
    if not 0 <= cell_index < len(cells):
        raise ValidationError(
            f"cell index {cell_index} out of range for {len(cells)} cells")
    policy = SeedPolicy(config.master_seed)
    if config.model is ModelKind.SEQUENTIAL:
        _loops.warm_up()
    ci, j, n = cells[cell_index]
    records = _cell_records(config, policy, ci, j, n, threads())
    cell = CellStats.from_records(config.model, j, n,
                                  config.init.resolve(n), records)
    return cell, records


def run_grid(config: ExperimentConfig,
             out_dir: str | Path | None = None) -> list[CellStats]:
    """Execute every cell; optionally write raw runs and cell stats to disk.

    Out layout: cells.csv, summary.json, and runs/<model>_j<j>_n<n>.csv per
    cell.  Results are deterministic functions of (config, master seed).
    """
    policy = SeedPolicy(config.master_seed)
    workers = threads()
    if config.model is ModelKind.SEQUENTIAL:
        _loops.warm_up()
    stats: list[CellStats] = []
    raw: list[tuple[CellStats, list[RunRecord]]] = []
    for cell_index, j, n in config.cells():
        records = _cell_records(config, policy, cell_index, j, n, workers)
        cell = CellStats.from_records(config.model, j, n,
                                      config.init.resolve(n), records)
        stats.append(cell)
        raw.append((cell, records))
    if out_dir is not None:
        out = Path(out_dir)
        runs_dir = out / "runs"
        runs_dir.mkdir(parents=True, exist_ok=True)
        with open(out / "cells.csv", "w", newline="") as fh:
            write_cells_csv(stats, fh)
        for cell, records in raw:
            name = f"{cell.model}_j{cell.j}_n{cell.n}.csv"
            with open(runs_dir / name, "w", newline="") as fh:
                write_records_csv(records, fh)
        payload = {
            "schema_version": SCHEMA_VERSION,
            "config": config.to_dict(),
            "cells": [cell.summary() for cell in stats],
        }
        with open(out / "summary.json", "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=False)
            fh.write("\n")
    return stats


@dataclass
class PreservationResult:
    """Outcome of majority-preservation runs from a bias:zeta start."""

    model: ModelKind
    j: int
    n: int
    zeta: float
    s0: int
    runs: int
    wins: int
    losses: int
    censored: int

    @property
    def fraction(self) -> float:
        return self.wins / self.runs

    def summary(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "model": str(self.model),
            "j": self.j,
            "n": self.n,
            "zeta": self.zeta,
            "s0": self.s0,
            "runs": self.runs,
            "wins": self.wins,
            "losses": self.losses,
            "censored": self.censored,
            "fraction": self.fraction,
        }


def check_majority_preservation(model: ModelKind | str, j: int, n: int,
                                zeta: float, runs: int, policy: SeedPolicy,
                                step_cap: int | None = None) -> PreservationResult:
    """Fraction of runs from s0 = ceil(n/2 + zeta*sqrt(n ln n)) won by a.

    Runs that hit the cap or end at 0 count against preservation; the
    returned record keeps the three outcomes separate.
    """
    model = ModelKind(model)
    if zeta <= 0:
        raise ValidationError(f"zeta must be positive, got {zeta}")
    if runs < 1:
        raise ValidationError(f"runs must be >= 1, got {runs}")
    s0 = InitRule("bias", zeta).resolve(n)
    spec = ProcessSpec(j)
    cap = default_step_cap(model, n) if step_cap is None else int(step_cap)
    wins = losses = censored = 0
    for i in range(runs):
        rec = run_to_consensus(spec, model, n, s0, policy.stream(i),
                               step_cap=cap, run_index=i,
                               master_seed=policy.master_seed)
        if rec.censored:
            censored += 1
        elif rec.winner == "a":
            wins += 1
        else:
            losses += 1
    return PreservationResult(model=model, j=j, n=n, zeta=zeta, s0=s0,
                              runs=runs, wins=wins, losses=losses,
                              censored=censored)


@dataclass
class BiasDoublingResult:
    """Per-window lead-doubling outcomes for the sequential 3-sample process.

    Lead means the signed difference 2s - n.  Window w starts where window
    w-1 reached its target and runs until the lead first reaches
    min(2*lead_start, n), tracking whether it ever fell below
    floor(lead_start/2).  Doubling times are reported both in raw steps and
    in productive steps (those that changed the count).
    """

    n: int
    j: int
    delta0: float
    s0: int
    windows: int
    runs: int
    window_cap: int
    reached: np.ndarray
    violated: np.ndarray
    steps_to_target: np.ndarray
    productive_to_target: np.ndarray

    @property
    def floor_violation_rate(self) -> float:
        return float(np.mean(np.any(self.violated, axis=1)))

    @property
    def reach_rate(self) -> float:
        return float(np.mean(np.all(self.reached, axis=1)))

    def summary(self) -> dict:
        reached_all = self.productive_to_target[np.all(self.reached, axis=1)]
        out = {
            "schema_version": SCHEMA_VERSION,
            "n": self.n,
            "j": self.j,
            "delta0": self.delta0,
            "s0": self.s0,
            "windows": self.windows,
            "runs": self.runs,
            "window_cap": self.window_cap,
            "floor_violation_rate": self.floor_violation_rate,
            "reach_rate": self.reach_rate,
        }
        if reached_all.size:
            per_window = reached_all.sum(axis=1)
            out["productive_total_quartiles"] = [float(q) for q in
                                                 np.percentile(per_window,
                                                               [0, 25, 50, 75, 100])]
        return out


def check_bias_doubling(n: int, delta0: float, runs: int, policy: SeedPolicy,
                        j: int = 3, windows: int = 1,
                        window_cap: int | None = None) -> BiasDoublingResult:
    """Track successive lead doublings from an initial advantage delta0.

    delta0 is the starting advantage over one half in agents (s0 is its
    ceiling on top of n/2).  Each window must double the current lead (capped
    at consensus) without ever halving it.
    """
    if delta0 < 1:
        raise ValidationError(f"delta0 must be >= 1, got {delta0}")
    if windows < 1:
        raise ValidationError(f"windows must be >= 1, got {windows}")
    if runs < 1:
        raise ValidationError(f"runs must be >= 1, got {runs}")
    spec = ProcessSpec(j)
    s0 = math.ceil(n / 2 + delta0)
    validate_state(n, s0)
    cap = horizon(ModelKind.SEQUENTIAL, n, 10.0) if window_cap is None else int(window_cap)
    _loops.warm_up()

    reached = np.zeros((runs, windows), dtype=bool)
    violated = np.zeros((runs, windows), dtype=bool)
    steps_to = np.full((runs, windows), -1, dtype=np.int64)
    prod_to = np.full((runs, windows), -1, dtype=np.int64)
    for i in range(runs):
        gen = policy.stream(i)
        s = s0
        for w in range(windows):
            lead = 2 * s - n
            if lead >= n or s in (0, n):
                reached[i, w:] = True
                steps_to[i, w:] = 0
                prod_to[i, w:] = 0
                break
            target = min(2 * lead, n)
            floor = lead // 2
            s, steps, productive, hit, broke, prod_at = _loops.seq_run_window(
                gen, n, s, spec.j, target, floor, cap)
            reached[i, w] = bool(hit)
            violated[i, w] = bool(broke)
            if hit:
                steps_to[i, w] = steps
                prod_to[i, w] = prod_at
            else:
                break
    return BiasDoublingResult(n=n, j=j, delta0=delta0, s0=s0, windows=windows,
                              runs=runs, window_cap=cap, reached=reached,
                              violated=violated, steps_to_target=steps_to,
                              productive_to_target=prod_to)


@dataclass
class DriftTailResult:
    """Empirical tail of minority extinction time against the drift bound.

    The bound uses the closed-form minimum drift rate delta = (1+eps/2)*eps/(4n)
    over minority counts at most (1/2-eps)n and allows ceil((r + ln s0)/delta)
    steps; the comparison value is e^-r plus three binomial standard errors.
    """

    n: int
    eps: float
    r: float
    s0: int
    runs: int
    bound_steps: int
    delta: float
    exceedances: int

    @property
    def exceedance_fraction(self) -> float:
        return self.exceedances / self.runs

    @property
    def target(self) -> float:
        return math.exp(-self.r)

    @property
    def threshold(self) -> float:
        p = self.target
        return p + 3.0 * math.sqrt(p * (1.0 - p) / self.runs)

    @property
    def passed(self) -> bool:
        return self.exceedance_fraction <= self.threshold

    def summary(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "n": self.n,
            "eps": self.eps,
            "r": self.r,
            "s0": self.s0,
            "runs": self.runs,
            "bound_steps": self.bound_steps,
            "delta": self.delta,
            "exceedances": self.exceedances,
            "exceedance_fraction": self.exceedance_fraction,
            "target": self.target,
            "threshold": self.threshold,
            "passed": self.passed,
        }


def check_drift_tail(n: int, eps: float, r: float, runs: int,
                     policy: SeedPolicy) -> DriftTailResult:
    """Start the 3-sample sequential process from minority count
    floor((1/2 - eps)n) and compare P[extinction later than the bound] with
    e^-r.

    A run exceeds when the minority has not died out within the bound.  The
    per-state drift rate is smallest at the start of the range, so the
    closed-form delta is a valid (conservative) minimum over the band the
    bound covers.
    """
    if not 0 < eps < 0.5:
        raise ValidationError(f"eps must lie in (0, 1/2), got {eps}")
    if r < 0:
        raise ValidationError(f"r must be nonnegative, got {r}")
    if runs < 1:
        raise ValidationError(f"runs must be >= 1, got {runs}")
    s0 = math.floor((0.5 - eps) * n)
    if s0 < 1:
        raise ValidationError(f"minority start is empty: n={n}, eps={eps}")
    delta = (1.0 + eps / 2.0) * eps / (4.0 * n)
    bound = math.ceil((r + math.log(s0)) / delta)
    spec = ProcessSpec(3)
    _loops.warm_up()
    exceed = 0
    for i in range(runs):
        gen = policy.stream(i)
        s, steps = _loops.seq_run(gen, n, s0, spec.j, bound)
        if s != 0:
            exceed += 1
    return DriftTailResult(n=n, eps=eps, r=r, s0=s0, runs=runs,
                           bound_steps=bound, delta=delta, exceedances=exceed)


def emit_plot_data(cells: Sequence[CellStats] | Sequence[dict],
                   out_dir: str | Path, base: str = "e") -> list[Path]:
    """Write whitespace-delimited plot files from cell statistics.

    Per model: <model>_norm_vs_n.dat with the mean normalized time in both
    log bases, and <model>_box_n<N>_<base>.dat with normalized-time quartiles
    by j at each population size.  `base` selects which base the boxplot
    files use first; both norm columns are always present in the n-profile
    file.  Returns the written paths.
    """
    if not cells:
        raise ValidationError("no cell statistics to emit")
    rows = [c.summary() | {
        "norm_q_ln": c.norm_ln_quartiles,
        "norm_q_log2": c.norm_log2_quartiles,
    } if isinstance(c, CellStats) else c for c in cells]
    for row in rows:
        if "norm_q_ln" not in row:
            row["norm_q_ln"] = tuple(
                row[k] for k in ("min_norm_ln", "q1_norm_ln", "median_norm_ln",
                                 "q3_norm_ln", "max_norm_ln"))
            row["norm_q_log2"] = tuple(
                row[k] for k in ("min_norm_log2", "q1_norm_log2",
                                 "median_norm_log2", "q3_norm_log2",
                                 "max_norm_log2"))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    bases = (base, "2" if base == "e" else "e")
    for model in sorted({row["model"] for row in rows}):
        mrows = [row for row in rows if row["model"] == model]
        mrows.sort(key=lambda row: (row["j"], row["n"]))
        unit = "rounds" if model == str(ModelKind.GOSSIP) else "interactions"
        path = out / f"{model}_norm_vs_n.dat"
        with open(path, "w") as fh:
            fh.write(f"# mean convergence time of the {model} model, "
                     "normalized per population size\n")
            fh.write(f"# columns: n  j  mean_{unit}_per_ln_n  "
                     f"mean_{unit}_per_log2_n\n")
            for row in mrows:
                fh.write(f"{row['n']} {row['j']} "
                         f"{_fmt(row['mean_norm_ln'])} "
                         f"{_fmt(row['mean_norm_log2'])}\n")
        written.append(path)
        for n in sorted({row["n"] for row in mrows}):
            for b in bases:
                key = "norm_q_ln" if b == "e" else "norm_q_log2"
                tag = "ln" if b == "e" else "log2"
                path = out / f"{model}_box_n{n}_{tag}.dat"
                with open(path, "w") as fh:
                    fh.write(f"# normalized-time quartiles by j, {model} model, "
                             f"n={n}, base {tag}\n")
                    fh.write("# columns: j  min  q1  median  q3  max\n")
                    for row in (r for r in mrows if r["n"] == n):
                        qs = " ".join(_fmt(q) for q in row[key])
                        fh.write(f"{row['j']} {qs}\n")
                written.append(path)
    index = out / "plots_summary.json"
    payload = {
        "schema_version": SCHEMA_VERSION,
        "base": base,
        "models": sorted({row["model"] for row in rows}),
        "cells": len(rows),
        "files": [p.name for p in written],
    }
    with open(index, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    written.append(index)
    return written


def write_hitting_times_csv(profile: AbsorptionProfile, fh: IO[str]) -> None:
    """Exact per-state expectations: one row per initial count."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["s", "expected_steps", "parallel_time", "win_prob"])
    parallel = profile.expected_parallel_time
    for s in range(profile.n + 1):
        writer.writerow([
            s,
            _fmt(profile.expected_steps[s]),
            _fmt(parallel[s]),
            _fmt(profile.win_prob[s]),
        ])
