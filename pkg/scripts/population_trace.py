"""Population time series of a dissipation-free k=2 search (timing diagram plus level populations).

    python scripts/population_trace.py --out trace.csv [--mode me] [--scheme ancilla]
"""

import argparse

from rydgrover.cli import run_trace
from rydgrover.config import ExperimentConfig
from rydgrover.model import RelaxationRates


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="trace.csv")
    ap.add_argument("--marked", default="01")
    ap.add_argument("--scheme", default="direct", choices=["direct", "ancilla"])
    ap.add_argument("--mode", default="trajectory", choices=["trajectory", "me"])
    ap.add_argument("--points", type=int, default=40, help="samples per segment")
    args = ap.parse_args()
    cfg = ExperimentConfig(k=len(args.marked), scheme=args.scheme, preset="a1", marked=args.marked,
                           iterations=1, seed=0, rates_per_s=RelaxationRates().as_dict(),
                           trace_mode=args.mode, trace_points=args.points, out=args.out)
    text = run_trace(cfg)
    print(f"wrote {len(text.splitlines()) - 2} rows to {args.out}")


if __name__ == "__main__":
    main()
