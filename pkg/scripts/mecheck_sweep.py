"""Trajectory vs master-equation cross-check over presets and schemes at k=2.

    python scripts/mecheck_sweep.py --trajectories 200 --seed 7
"""

import argparse
import itertools
import sys

from rydgrover.cli import run_mecheck
from rydgrover.config import ExperimentConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--presets", nargs="+", default=["a1", "b1", "c1", "a2", "b2", "c2"])
    ap.add_argument("--k", type=int, default=2)
    ap.add_argument("--iterations", type=int, default=3)
    ap.add_argument("--trajectories", type=int, default=200)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    failed = False
    for preset, scheme in itertools.product(args.presets, ("direct", "ancilla")):
        cfg = ExperimentConfig(k=args.k, scheme=scheme, preset=preset, iterations=args.iterations,
                               trajectories=args.trajectories, seed=args.seed)
        check = run_mecheck(cfg)
        failed |= not check.passed
        zs = " ".join(f"{z:.2f}" for z in check.z)
        print(f"{preset:6s} {scheme:8s} z = {zs}  {'PASS' if check.passed else 'FAIL'}")
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main()
