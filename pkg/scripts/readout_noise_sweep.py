"""Readout decision rate versus noise level and trace resolution.

Each point runs ``--trials`` seeded traces with alternating true nuclear
state at site 0 of the reference chain.
"""

import argparse
import sys

from stmqc.readout import EXCITED, GROUND, INDETERMINATE, detect_larmor, mixdown_for_site, site_candidates, synthesize_trace
from stmqc.spin_model import reference_config


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--noise", type=lambda s: [float(x) for x in s.split(",")], default=[0.5, 1, 2, 4, 8, 12, 16])
    p.add_argument("--resolution", type=lambda s: [float(x) for x in s.split(",")], default=[0.5, 2, 10])
    p.add_argument("--depth", type=float, default=0.1)
    p.add_argument("--n-samples", type=int, default=16384)
    p.add_argument("--trials", type=int, default=400)
    args = p.parse_args(argv)

    cfg = reference_config(3)
    a_hz = cfg.species.hyperfine_A_over_h
    cand = site_candidates(cfg, 0)
    lo = mixdown_for_site(cand)
    print("resolution_factor,noise_sigma,correct_rate,indeterminate_rate")
    for factor in args.resolution:
        duration = factor / a_hz
        rate = args.n_samples / duration
        for sigma in args.noise:
            correct = undecided = 0
            for seed in range(args.trials):
                truth = seed % 2
                tr = synthesize_trace(cand["f_e1" if truth else "f_e0"], args.depth, sigma, duration, rate, lo, seed)
                state = detect_larmor(tr, cand).decided_state
                correct += state == (EXCITED if truth else GROUND)
                undecided += state == INDETERMINATE
            print(f"{factor:g},{sigma:g},{correct / args.trials:.4f},{undecided / args.trials:.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
