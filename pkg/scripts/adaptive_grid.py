"""Stabilization rounds of the ring-size-learning variant over a grid of (n, m)."""

import argparse
import csv
import random
import sys

from tokensep.adaptive import Timeout, adaptive_config, random_adaptive_state, run_until_stable
from tokensep.harness import child_seed


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-n", type=int, default=40)
    ap.add_argument("--seeds", type=int, default=20)
    args = ap.parse_args()
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("n", "m", "target", "mean_round", "max_round", "timeouts"))
    for n in range(3, args.max_n + 1):
        for m in range(2, n):
            cfg = adaptive_config(n, m)
            rounds, timeouts = [], 0
            for seed in range(args.seeds):
                st = random_adaptive_state(cfg, random.Random(child_seed(n * 1000 + m, seed)))
                try:
                    at, cb = run_until_stable(cfg, st, n ** 3, hold=5 * n)
                    rounds.append(at)
                    timeouts += cb != n // m - 1
                except Timeout:
                    timeouts += 1
            mean = sum(rounds) / len(rounds) if rounds else float("nan")
            w.writerow((n, m, n // m - 1, f"{mean:.1f}", max(rounds, default=-1), timeouts))


if __name__ == "__main__":
    main()
