"""Run every closed-form and exact-kernel check in one pass.

Covers the adoption-curve identities, row monotonicity, kernel dominance
and pair identity for both models, the coupling constructions, the
per-state drift formula, and the gambler's-ruin ratio.  Prints one
summary line per check and exits nonzero if any fails.

Typical use:
    python3 scripts/verify_exact.py
    python3 scripts/verify_exact.py --quick
"""

import argparse

from majority_lab.chain import (check_kernel_pair_identity_sweep,
                                check_row_dominance_sweep,
                                check_state_monotonicity_sweep)
from majority_lab.core import ModelKind
from majority_lab.coupling import (check_quantile_order,
                                   check_structural_dominance)
from majority_lab.kernels import (check_adoption_gap_identity,
                                  check_adoption_pair_identity,
                                  check_drift_closed_form, check_ruin_ratio)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--quick", action="store_true",
                        help="smaller sweeps for a fast smoke pass")
    args = parser.parse_args()

    j_max = 6 if args.quick else 12
    n_max = 24 if args.quick else 64
    grid = 200 if args.quick else 1000
    drift_n = 100 if args.quick else 1000
    pair_lows = tuple(range(2, j_max, 2))
    pops = (10, 25) if args.quick else (10, 25, 64, 1000)

    results = [
        check_adoption_gap_identity(j_max=j_max, grid_points=grid),
        check_adoption_pair_identity(j_max=j_max, grid_points=grid),
        check_drift_closed_form(n_max=drift_n),
        check_ruin_ratio(grid_points=grid),
    ]
    for model in (ModelKind.SEQUENTIAL, ModelKind.GOSSIP):
        results.append(check_state_monotonicity_sweep(model, j_max=j_max,
                                                      n_max=n_max))
        results.append(check_row_dominance_sweep(model, j_max=j_max,
                                                 n_max=n_max))
        results.append(check_kernel_pair_identity_sweep(model, j_max=j_max,
                                                        n_max=n_max))
    results.append(check_structural_dominance(j_lows=pair_lows,
                                              populations=pops))
    results.append(check_quantile_order(j_lows=pair_lows,
                                        populations=(10, 25, n_max),
                                        grid_points=grid))

    for result in results:
        print(result.summary())
    failed = sum(1 for r in results if not r.passed)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
