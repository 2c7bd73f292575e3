"""Mean convergence time against ring size (m=2, d=n//3, n/2 delay processes)."""

import argparse
import logging
import os

from tokensep.harness import ExperimentSpec, slope, sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=300)
    ap.add_argument("--seed", type=int, default=20240601)
    ap.add_argument("--counters", choices=("uniform", "zero"), default="uniform")
    ap.add_argument("--target", choices=("legitimate", "separated"), default="legitimate")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO)
    os.makedirs(args.outdir, exist_ok=True)
    ns = list(range(10, 191, 20))
    spec = ExperimentSpec(m=2, trials=args.trials, axis="ring_size", values=ns,
                          master_seed=args.seed, counters=args.counters, target=args.target)
    res = sweep(spec, workers=args.workers)
    stem = os.path.join(args.outdir, f"ring_size_{args.counters}_{args.target}")
    with open(stem + ".csv", "w") as fh:
        fh.write(res.to_csv())
    with open(stem + ".dat", "w") as fh:
        fh.write(res.to_gnuplot())
    means = [p.mean for p in res.points]
    print("means:", " ".join(f"{x:.1f}" for x in means))
    print(f"slope {slope(ns, means):.3f} rounds/node  -> {stem}.csv")


if __name__ == "__main__":
    main()
