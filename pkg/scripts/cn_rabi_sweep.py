"""Control-Not truth-table fidelity versus the step-2 nuclear Rabi frequency.

Prints a CSV of f_nR / f_nd, the worst basis-input population, the
control-0 leakage and the rectangular-pulse envelope 1 / (1 + (f_nd/f_nR)^2).
"""

import argparse
import sys

import numpy as np

from stmqc.protocols import GateSpec, cn_truth_table, leakage_null_rabi
from stmqc.spin_model import build_frequency_table, reference_config


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n-ions", type=int, default=3)
    p.add_argument("--min-ratio", type=float, default=0.1)
    p.add_argument("--max-ratio", type=float, default=1.0)
    p.add_argument("--points", type=int, default=37)
    args = p.parse_args(argv)

    cfg = reference_config(args.n_ions)
    f_nd = build_frequency_table(cfg).f_nd
    ratios = np.linspace(args.min_ratio, args.max_ratio, args.points)
    nulls = [leakage_null_rabi(f_nd, m) / f_nd for m in (1, 2, 3)]
    ratios = np.unique(np.concatenate([ratios, [r for r in nulls if args.min_ratio <= r <= args.max_ratio], [0.5]]))

    print("f_nR_hz,ratio,min_population,control0_leak,envelope,gate_duration_s")
    for r in ratios:
        rabi = r * f_nd
        table = cn_truth_table(cfg, GateSpec(0, 1, nuclear_rabi=rabi))
        worst = min(p for p, _ in table.values())
        leak = 1 - table[(0, 0)][0]
        envelope = 1 / (1 + (1 / r) ** 2)
        print(f"{rabi:.6g},{r:.6g},{worst:.6f},{leak:.3e},{envelope:.3e},{1 / (2 * rabi):.6g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
