"""Command-line front end: simulate, exact, couple, grid, plots, theorem2.

Every subcommand is a thin shell over the library: parse flags, build a
config, call one function, write files or print a report.  Output never
includes timestamps or machine identifiers, so identical invocations
produce identical bytes.  Exit status is 0 on success, 1 when a check or
coupling fails, 2 on bad usage.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .chain import (
    check_kernel_pair_identity_sweep,
    check_row_dominance_sweep,
    check_state_monotonicity_sweep,
    expected_absorption,
)
from .core import (
    MajorityLabError,
    ModelKind,
    ProcessSpec,
    SeedPolicy,
    horizon,
)
from .coupling import (
    CouplingViolationError,
    check_quantile_order,
    check_structural_dominance,
    run_coupled_batch,
    write_coupled_csv,
)
from .harness import (
    ExperimentConfig,
    check_majority_preservation,
    emit_plot_data,
    parse_init,
    read_cells_csv,
    run_cell,
    run_grid,
    write_hitting_times_csv,
)
from .kernels import (
    check_adoption_gap_identity,
    check_adoption_pair_identity,
    check_drift_closed_form,
    check_ruin_ratio,
    make_kernel,
)
from .simulate import SCHEMA_VERSION, write_records_csv

__all__ = ["main", "build_parser", "EXACT_CHECKS"]

EXACT_CHECKS = ("lemma5", "lemma7", "lemma8", "lemma9", "lemma10", "lemma11",
                "drift", "ratio")


def _add_model(p: argparse.ArgumentParser, required: bool = True,
               default: str | None = None) -> None:
    p.add_argument("--model", choices=("gossip", "sequential"),
                   required=required, default=default,
                   help="update schedule: synchronous rounds or one agent per step")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="majority-lab",
        description="Simulation and exact analysis of j-sample majority "
                    "consensus on the complete graph.")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    sim = sub.add_parser(
        "simulate", help="run one (model, j, n) cell and write raw runs",
        description="Run repeated simulations of a single process and write "
                    "runs.csv plus summary.json into --out.")
    _add_model(sim)
    sim.add_argument("--j", type=int, required=True, help="sample size per update")
    sim.add_argument("--n", type=int, required=True, help="population size")
    sim.add_argument("--runs", type=int, default=100, help="independent runs")
    sim.add_argument("--init", default="balanced",
                     help="initial a-count: balanced, bias:ZETA, or count:S0")
    sim.add_argument("--seed", type=int, default=0, help="master seed")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--step-cap", type=float, default=None, metavar="MULT",
                     help="cap runs at MULT * n ln n interactions "
                          "(MULT * ln n rounds for gossip); default 100")

    ex = sub.add_parser(
        "exact", help="closed-form identity checks and exact hitting times",
        description="Either run one named exhaustive check (--check) or "
                    "solve for exact absorption profiles (--hitting-times).")
    ex.add_argument("--check", choices=EXACT_CHECKS,
                    help="which identity or dominance sweep to run")
    ex.add_argument("--j-max", type=int, default=12,
                    help="largest sample size covered by sweeps")
    ex.add_argument("--n-max", type=int, default=64,
                    help="largest population covered by sweeps")
    ex.add_argument("--grid-resolution", type=int, default=1000,
                    help="points per unit interval for curve checks")
    ex.add_argument("--hitting-times", action="store_true",
                    help="write exact expected absorption times instead")
    _add_model(ex, required=False)
    ex.add_argument("--j", type=int, help="sample size (hitting times)")
    ex.add_argument("--n", type=int, help="population size (hitting times)")
    ex.add_argument("--out", help="output CSV file (hitting times)")

    cp = sub.add_parser(
        "couple", help="run quantile-coupled (P_j, P_{j+1}) pairs",
        description="Drive coupled pairs of consecutive processes on shared "
                    "randomness and verify the per-step dominance flags; "
                    "exits 1 on any violation with the trace written out.")
    _add_model(cp)
    cp.add_argument("--j-low", type=int, required=True,
                    help="sample size of the slower process (pair is j, j+1)")
    cp.add_argument("--n", type=int, required=True, help="population size")
    cp.add_argument("--runs", type=int, default=100, help="coupled pairs to run")
    cp.add_argument("--init", default="balanced",
                    help="initial a-count: balanced, bias:ZETA, or count:S0")
    cp.add_argument("--seed", type=int, default=0, help="master seed")
    cp.add_argument("--out", required=True, help="output directory")
    cp.add_argument("--step-cap", type=float, default=None, metavar="MULT",
                    help="cap each pair at MULT times the analysis horizon; "
                         "default 100")

    gr = sub.add_parser(
        "grid", help="run a (j, n) cross-product experiment from a config file",
        description="Read a flat key=value config, apply any flag overrides, "
                    "run every cell, and write cells.csv, per-cell run files, "
                    "and summary.json into --out.")
    gr.add_argument("--config", required=True, help="key = value config file")
    gr.add_argument("--out", required=True, help="output directory")
    _add_model(gr, required=False)
    gr.add_argument("--j", help="comma-separated sample sizes (override)")
    gr.add_argument("--n", help="comma-separated population sizes (override)")
    gr.add_argument("--runs", type=int, help="runs per cell (override)")
    gr.add_argument("--init", help="initial-state rule (override)")
    gr.add_argument("--seed", type=int, help="master seed (override)")
    gr.add_argument("--step-cap", type=float, metavar="MULT",
                    help="horizon multiplier (override)")
    gr.add_argument("--base", choices=("e", "2"), help="primary log base (override)")

    pl = sub.add_parser(
        "plots", help="turn cells.csv into plot-ready data files",
        description="Read cell statistics produced by grid and emit "
                    "whitespace-delimited files for plotting tools.")
    pl.add_argument("--in", dest="in_dir", required=True,
                    help="directory containing cells.csv")
    pl.add_argument("--out", required=True, help="directory for .dat files")
    pl.add_argument("--base", choices=("e", "2"), default="e",
                    help="log base listed first in boxplot files")

    th = sub.add_parser(
        "theorem2", help="majority-preservation rate from a seeded advantage",
        description="Start from ceil(n/2 + zeta*sqrt(n ln n)) supporters and "
                    "report the fraction of runs the initial majority wins.")
    th.add_argument("--n", type=int, required=True, help="population size")
    th.add_argument("--zeta", type=float, required=True,
                    help="advantage multiplier on sqrt(n ln n)")
    th.add_argument("--runs", type=int, default=1000, help="independent runs")
    th.add_argument("--seed", type=int, default=0, help="master seed")
    _add_model(th, required=False, default="sequential")
    th.add_argument("--j", type=int, default=3, help="sample size per update")
    th.add_argument("--step-cap", type=float, default=None, metavar="MULT",
                    help="horizon multiplier; default 100")
    return p


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = ExperimentConfig(
        model=ModelKind(args.model),
        j_values=(args.j,),
        n_values=(args.n,),
        runs=args.runs,
        init=parse_init(args.init),
        master_seed=args.seed,
        step_cap_mult=args.step_cap,
    )
    cell, records = run_cell(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "runs.csv", "w", newline="") as fh:
        write_records_csv(records, fh)
    _write_json(out / "summary.json", {
        "schema_version": SCHEMA_VERSION,
        "config": config.to_dict(),
        "cell": cell.summary(),
    })
    print(f"wrote {config.runs} runs to {out / 'runs.csv'}")
    print(f"converged {config.runs - cell.censored}/{config.runs}, "
          f"mean steps {cell.mean_steps:.6g}, "
          f"normalized (base e) {cell.mean_norm_ln:.6g}")
    return 0


def _exact_check_results(args: argparse.Namespace):
    j_max, n_max, res = args.j_max, args.n_max, args.grid_resolution
    even_lows = tuple(j for j in range(2, j_max, 2))
    pops = tuple(n for n in (10, 25, 64, 1000) if n <= n_max) or (n_max,)
    if args.check == "lemma5":
        return [check_state_monotonicity_sweep(m, j_max=j_max, n_max=n_max)
                for m in (ModelKind.GOSSIP, ModelKind.SEQUENTIAL)]
    if args.check == "lemma7":
        return [check_adoption_gap_identity(j_max=j_max, grid_points=res)]
    if args.check == "lemma8":
        results = [check_row_dominance_sweep(m, j_max=j_max, n_max=n_max)
                   for m in (ModelKind.GOSSIP, ModelKind.SEQUENTIAL)]
        results.append(check_quantile_order(
            j_lows=even_lows, populations=tuple(n for n in pops if n <= 64)))
        return results
    if args.check == "lemma9":
        return [check_adoption_pair_identity(j_max=j_max, grid_points=res)]
    if args.check == "lemma10":
        return [check_kernel_pair_identity_sweep(m, j_max=j_max, n_max=n_max)
                for m in (ModelKind.GOSSIP, ModelKind.SEQUENTIAL)]
    if args.check == "lemma11":
        return [check_structural_dominance(j_lows=even_lows, populations=pops)]
    if args.check == "drift":
        return [check_drift_closed_form(n_max=n_max)]
    if args.check == "ratio":
        return [check_ruin_ratio(grid_points=res)]
    raise AssertionError(f"unhandled check {args.check!r}")


def _cmd_exact(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    if bool(args.check) == bool(args.hitting_times):
        parser.error("exact requires exactly one of --check or --hitting-times")
    if args.check:
        results = _exact_check_results(args)
        for result in results:
            print(result.summary())
        return 0 if all(r.passed for r in results) else 1
    missing = [name for name in ("model", "j", "n", "out")
               if getattr(args, name) is None]
    if missing:
        parser.error("exact --hitting-times requires --" + ", --".join(missing))
    kernel = make_kernel(ModelKind(args.model), ProcessSpec(args.j), args.n)
    profile = expected_absorption(kernel)
    out = Path(args.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        write_hitting_times_csv(profile, fh)
    print(f"wrote exact absorption profile for {args.model} j={args.j} "
          f"n={args.n} to {out}")
    return 0


def _cmd_couple(args: argparse.Namespace) -> int:
    model = ModelKind(args.model)
    s0 = parse_init(args.init).resolve(args.n)
    cap = None
    if args.step_cap is not None:
        cap = horizon(model, args.n, args.step_cap)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    policy = SeedPolicy(args.seed)
    try:
        stats = run_coupled_batch(model, args.j_low, args.n, s0, policy,
                                  args.runs, cap=cap)
    except CouplingViolationError as err:
        payload = {
            "schema_version": SCHEMA_VERSION,
            "model": str(model),
            "j_low": args.j_low,
            "n": args.n,
            "s0": s0,
            "runs": args.runs,
            "seed": args.seed,
            "violation": str(err),
            "run_index": err.run_index,
        }
        _write_json(out / "summary.json", payload)
        if err.trace is not None:
            with open(out / "violation_trace.csv", "w", newline="") as fh:
                err.trace.to_csv(fh)
            print(f"dominance violation: {err}; trace written to "
                  f"{out / 'violation_trace.csv'}", file=sys.stderr)
        else:
            print(f"dominance violation: {err}", file=sys.stderr)
        return 1
    with open(out / "couplings.csv", "w", newline="") as fh:
        write_coupled_csv(stats, fh)
    summary = stats.summary()
    summary["seed"] = args.seed
    _write_json(out / "summary.json", summary)
    print(f"wrote {args.runs} coupled runs to {out / 'couplings.csv'}")
    print(f"violations 0, high finished no later in "
          f"{summary['frac_high_no_later']:.4f} of doubly-converged runs")
    return 0


def _cmd_grid(args: argparse.Namespace) -> int:
    overrides = {
        "model": args.model,
        "j": args.j,
        "n": args.n,
        "runs": None if args.runs is None else str(args.runs),
        "init": args.init,
        "seed": None if args.seed is None else str(args.seed),
        "step-cap": None if args.step_cap is None else str(args.step_cap),
        "base": args.base,
    }
    config = ExperimentConfig.from_file(args.config, overrides=overrides)
    stats = run_grid(config, args.out)
    print(f"ran {len(stats)} cells x {config.runs} runs; "
          f"results in {Path(args.out) / 'cells.csv'}")
    return 0


def _cmd_plots(args: argparse.Namespace) -> int:
    cells_path = Path(args.in_dir) / "cells.csv"
    if not cells_path.exists():
        raise MajorityLabError(f"no cells.csv under {args.in_dir}")
    with open(cells_path, newline="") as fh:
        rows = read_cells_csv(fh)
    written = emit_plot_data(rows, args.out, base=args.base)
    print(f"wrote {len(written)} plot files to {args.out}")
    return 0


def _cmd_theorem2(args: argparse.Namespace) -> int:
    model = ModelKind(args.model)
    cap = None
    if args.step_cap is not None:
        cap = horizon(model, args.n, args.step_cap)
    result = check_majority_preservation(model, args.j, args.n, args.zeta,
                                         args.runs, SeedPolicy(args.seed),
                                         step_cap=cap)
    print(json.dumps(result.summary(), indent=2))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "exact":
            return _cmd_exact(args, parser)
        if args.command == "couple":
            return _cmd_couple(args)
        if args.command == "grid":
            return _cmd_grid(args)
        if args.command == "plots":
            return _cmd_plots(args)
        if args.command == "theorem2":
            return _cmd_theorem2(args)
        raise AssertionError(f"unhandled command {args.command!r}")
    except MajorityLabError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
