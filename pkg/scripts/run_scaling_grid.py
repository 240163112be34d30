"""Desk-scale convergence-time study over (model, j, n).

Runs the full grid, writes raw runs, per-cell statistics, and
plot-ready normalized-time files, then prints one summary row per cell.

Typical use:
    python3 scripts/run_scaling_grid.py --out results/scaling
    python3 scripts/run_scaling_grid.py --model gossip --j 3 4 5 \
        --n 1000 10000 --runs 200 --out /tmp/quick
"""

import argparse
from pathlib import Path

from majority_lab.core import ModelKind
from majority_lab.harness import (ExperimentConfig, emit_plot_data,
                                  parse_init, run_grid)


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--model", choices=("sequential", "gossip", "both"),
                        default="both")
    parser.add_argument("--j", type=int, nargs="+", default=[3, 4, 5, 6, 7, 8])
    parser.add_argument("--n", type=int, nargs="+",
                        default=[100, 1000, 10_000])
    parser.add_argument("--runs", type=int, default=100)
    parser.add_argument("--init", default="balanced",
                        help="balanced, bias:Z, or count:S")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--base", choices=("e", "2"), default="e",
                        help="log base for the normalized plot columns")
    parser.add_argument("--out", required=True)
    return parser.parse_args()


def main() -> int:
    args = parse_args()
    models = (["sequential", "gossip"] if args.model == "both"
              else [args.model])
    out_root = Path(args.out)
    all_cells = []
    for model in models:
        config = ExperimentConfig(model=ModelKind(model),
                                  j_values=tuple(args.j),
                                  n_values=tuple(args.n),
                                  runs=args.runs,
                                  init=parse_init(args.init),
                                  master_seed=args.seed)
        cells = run_grid(config, out_root / model)
        all_cells.extend(cells)
    files = emit_plot_data(all_cells, out_root / "plots", base=args.base)

    header = f"{'model':>10} {'j':>3} {'n':>7} {'censored':>8} " \
             f"{'mean steps':>12} {'norm(ln)':>9} {'norm(log2)':>10}"
    print(header)
    for cell in all_cells:
        print(f"{str(cell.model):>10} {cell.j:>3} {cell.n:>7} "
              f"{cell.censored:>8} {cell.mean_steps:>12.1f} "
              f"{cell.mean_norm_ln:>9.3f} {cell.mean_norm_log2:>10.3f}")
    print(f"wrote {len(files)} plot files under {out_root / 'plots'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
