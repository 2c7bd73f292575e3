"""Mean convergence time against the number of delay processes on a 50-ring.

Writes one CSV per curve (m=2 with d=10 and d=25, m=5 with d=2) plus a
gnuplot-ready two-column file, into --outdir.
"""

import argparse
import logging
import os

from tokensep.harness import ExperimentSpec, sweep

CURVES = ((2, 10), (2, 25), (5, 2))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=50)
    ap.add_argument("--trials", type=int, default=300)
    ap.add_argument("--seed", type=int, default=20240601)
    ap.add_argument("--counters", choices=("uniform", "zero"), default="uniform")
    ap.add_argument("--target", choices=("legitimate", "separated"), default="legitimate")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO)
    os.makedirs(args.outdir, exist_ok=True)
    tag = f"{args.counters}_{args.target}"
    for m, d in CURVES:
        spec = ExperimentSpec(n=args.n, m=m, d=d, trials=args.trials, values=range(1, args.n + 1),
                              master_seed=args.seed, counters=args.counters, target=args.target)
        res = sweep(spec, workers=args.workers)
        stem = os.path.join(args.outdir, f"delay_count_m{m}_d{d}_{tag}")
        with open(stem + ".csv", "w") as fh:
            fh.write(res.to_csv())
        with open(stem + ".dat", "w") as fh:
            fh.write(res.to_gnuplot())
        tail = [p.mean for p in res.points if p.delay_count >= 5]
        print(f"m={m} d={d}: 1 delay {res.points[0].mean:.1f}, "
              f">=5 delays {min(tail):.1f}..{max(tail):.1f}  -> {stem}.csv")


if __name__ == "__main__":
    main()
