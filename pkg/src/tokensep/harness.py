"""Random instances and Monte Carlo convergence experiments.

Trials run as a batch: every trial is one row of ``(B, n)`` integer arrays
and a round is a handful of whole-array operations. :func:`batch_step` and
:func:`batch_legitimate` mirror ``protocol.step_round`` and
``legitimacy.check`` exactly; the test suite holds them to that.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .ring_model import GlobalState, InfeasibleConfig, RingConfig

log = logging.getLogger(__name__)

CSV_COLUMNS = ("n", "m", "d", "delay_count", "trials", "master_seed",
               "mean", "median", "p95", "max", "timeouts")


class InfeasiblePoint(InfeasibleConfig):
    pass


def child_seed(master_seed: int, trial: int) -> int:
    """64-bit per-trial seed from numpy's SeedSequence hash of ``(master_seed, trial)``."""
    ss = np.random.SeedSequence([master_seed, trial])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def random_state(config: RingConfig, rng: np.random.Generator, counters: str = "uniform") -> GlobalState:
    """Tokens i.i.d. uniform over processes, each resting or queued with prob 1/2.

    Delay counters are uniform in ``[0, C]``, or all 0 with ``counters="zero"``.
    """
    if counters not in ("uniform", "zero"):
        raise ValueError(f"unknown counter initialisation {counters!r}")
    n = config.n
    r = [0] * n
    q = [0] * n
    for _ in range(config.m):
        i = int(rng.integers(n))
        if rng.random() < 0.5:
            r[i] += 1
        else:
            q[i] += 1
    if counters == "zero":
        c = [0 if config.is_delay(i) else None for i in range(n)]
    else:
        c = [int(rng.integers(0, config.C + 1)) if config.is_delay(i) else None for i in range(n)]
    return GlobalState(tuple(r), tuple(q), tuple(c))


def random_delay_set(n: int, k: int, rng: np.random.Generator) -> frozenset:
    return frozenset(int(x) for x in rng.choice(n, size=k, replace=False))


# -- batch engine -------------------------------------------------------------

@dataclass
class Batch:
    r: np.ndarray
    q: np.ndarray
    c: np.ndarray
    delay: np.ndarray  # bool
    C: int
    m: int

    @classmethod
    def from_states(cls, configs: Sequence[RingConfig], states: Sequence[GlobalState]) -> "Batch":
        n = configs[0].n
        C, m = configs[0].C, configs[0].m
        if any(cf.n != n or cf.C != C or cf.m != m for cf in configs):
            raise ValueError("a batch shares n, m and C")
        r = np.array([s.r for s in states], dtype=np.int64).reshape(len(states), n)
        q = np.array([s.q for s in states], dtype=np.int64).reshape(len(states), n)
        c = np.array([[v or 0 for v in s.c] for s in states], dtype=np.int64).reshape(len(states), n)
        delay = np.array([[cf.is_delay(i) for i in range(n)] for cf in configs], dtype=bool)
        return cls(r, q, c, delay.reshape(len(states), n), C, m)

    def take(self, rows: np.ndarray) -> "Batch":
        return Batch(self.r[rows], self.q[rows], self.c[rows], self.delay[rows], self.C, self.m)

    def state(self, row: int) -> GlobalState:
        d = self.delay[row]
        return GlobalState(tuple(int(x) for x in self.r[row]), tuple(int(x) for x in self.q[row]),
                           tuple(int(v) if d[i] else None for i, v in enumerate(self.c[row])))


def batch_step(b: Batch) -> Batch:
    D = b.delay
    nr = b.r + np.roll(b.q, 1, axis=1)
    has = nr > 0
    relay_fire = ~D & has
    counting = D & (b.c > 0)
    delay_fire = D & (b.c == 0) & has
    c = np.where(counting, b.c - 1, np.where(delay_fire, b.C, b.c))
    fire = relay_fire | delay_fire
    return Batch(nr - fire, fire.astype(np.int64), c, D, b.C, b.m)


def _batch_distances(occ: np.ndarray) -> tuple:
    B, n = occ.shape
    big = 2 * n
    right = np.empty((B, n), dtype=np.int64)
    nxt = np.full(B, big, dtype=np.int64)
    for k in range(2 * n - 1, -1, -1):
        i = k % n
        nxt = np.where(occ[:, i], 0, nxt + 1)
        if k < n:
            right[:, i] = nxt
    left = np.empty((B, n), dtype=np.int64)
    prv = np.full(B, big, dtype=np.int64)
    for k in range(2 * n):
        i = k % n
        prv = np.where(occ[:, i], 0, prv + 1)
        if k >= n:
            left[:, i] = prv
    return right, left


def batch_separated(b: Batch, _dist: Optional[list] = None) -> np.ndarray:
    """All tokens queued, one per process, every gap above C (first two conjuncts only)."""
    r, q, C = b.r, b.q, b.C
    n = r.shape[1]
    ok = (q.sum(1) == b.m) & (r.sum(1) == 0) & (q <= 1).all(1)
    if not ok.any():
        return ok
    tok = r + q
    occ = tok > 0
    right, left = _batch_distances(occ)
    if _dist is not None:
        _dist.extend((right, left))
    g = np.minimum(np.roll(right, -1, axis=1) + 1, n)
    g = np.where(tok >= 2, 0, g)
    return ok & ~(occ & (g <= C)).any(1)


def batch_legitimate(b: Batch) -> np.ndarray:
    q, c, D, C = b.q, b.c, b.delay, b.C
    dist = []
    ok = batch_separated(b, dist)
    if not ok.any():
        return ok
    right, left = dist
    ok &= ~(D & (c > 0) & (q == 0) & (right != C - c)).any(1)
    ok &= ~(D & (q == 0) & ~(left > c)).any(1)
    ok &= ~(D & (q == 1) & (c != C)).any(1)
    return ok


TARGETS = {"legitimate": batch_legitimate, "separated": batch_separated}


def batch_converge(b: Batch, max_rounds: int, target: str = "legitimate") -> np.ndarray:
    """Rounds until the first state meeting ``target`` per row; -1 on timeout.

    ``legitimate`` is the full predicate. ``separated`` ignores the delay
    counters and is offered only for comparing against other simulators.
    """
    done_fn = TARGETS[target]
    B = b.r.shape[0]
    out = np.full(B, -1, dtype=np.int64)
    rows = np.arange(B)
    cur = b
    for k in range(max_rounds + 1):
        leg = done_fn(cur)
        if leg.any():
            out[rows[leg]] = k
            keep = ~leg
            rows = rows[keep]
            if rows.size == 0:
                break
            cur = cur.take(keep)
        if k == max_rounds:
            break
        cur = batch_step(cur)
    return out


# -- experiments --------------------------------------------------------------

@dataclass
class ExperimentSpec:
    n: int = 50
    m: int = 2
    d: Optional[int] = None  # ring_size axis: None means floor(n/3)
    delay_count: Optional[int] = None  # ring_size axis: None means n//2
    trials: int = 300
    max_rounds: Optional[int] = None  # None means n**3
    axis: str = "delay_count"
    values: Sequence[int] = ()
    master_seed: int = 0
    counters: str = "uniform"
    target: str = "legitimate"

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.axis not in ("delay_count", "ring_size"):
            raise ValueError(f"unknown sweep axis {self.axis!r}")

    def point(self, value: int) -> tuple:
        """``(n, m, d, delay_count)`` for one axis value."""
        if self.axis == "delay_count":
            return self.n, self.m, self.d, value
        n = value
        d = self.d if self.d is not None else n // 3
        k = self.delay_count if self.delay_count is not None else n // 2
        return n, self.m, d, k


@dataclass
class PointResult:
    n: int
    m: int
    d: int
    delay_count: int
    trials: int
    master_seed: int
    mean: float
    median: float
    p95: float
    max: int
    timeouts: int
    rounds: list = field(default_factory=list, repr=False)
    seeds: list = field(default_factory=list, repr=False)

    def row(self) -> list:
        return [self.n, self.m, self.d, self.delay_count, self.trials, self.master_seed,
                _fmt(self.mean), _fmt(self.median), _fmt(self.p95), self.max, self.timeouts]


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    points: list = field(default_factory=list)
    skipped: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for p in self.points:
            w.writerow(p.row())
        return buf.getvalue()

    def to_gnuplot(self) -> str:
        x = "delay_count" if self.spec.axis == "delay_count" else "n"
        lines = [f"# {x} mean"]
        for p in self.points:
            lines.append(f"{getattr(p, x)} {_fmt(p.mean)}")
        return "\n".join(lines) + "\n"


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def trial_instances(n: int, m: int, C: int, delay_count: Optional[int], trials: int,
                    master_seed: int, delay_set: Optional[frozenset] = None,
                    counters: str = "uniform") -> tuple:
    """Per-trial (configs, states, seeds); a fresh random delay set per trial unless given."""
    configs, states, seeds = [], [], []
    for t in range(trials):
        seed = child_seed(master_seed, t)
        rng = np.random.default_rng(seed)
        D = delay_set if delay_set is not None else random_delay_set(n, delay_count, rng)
        cfg = RingConfig(n=n, m=m, C=C, delay_set=D, seed=seed)
        configs.append(cfg)
        states.append(random_state(cfg, rng, counters))
        seeds.append(seed)
    return configs, states, seeds


def measure_convergence(n: int, m: int, d: int, delay_count: Optional[int], trials: int,
                        max_rounds: Optional[int] = None, master_seed: int = 0,
                        delay_set: Optional[frozenset] = None, counters: str = "uniform",
                        target: str = "legitimate") -> PointResult:
    C = d - 1
    if m * d > n:
        raise InfeasiblePoint(f"m*d = {m * d} > n = {n}")
    if delay_set is not None:
        delay_count = len(delay_set)
    max_rounds = n ** 3 if max_rounds is None else max_rounds
    configs, states, seeds = trial_instances(n, m, C, delay_count, trials, master_seed,
                                             delay_set, counters)
    rounds = batch_converge(Batch.from_states(configs, states), max_rounds, target)
    done = rounds[rounds >= 0]
    timeouts = int((rounds < 0).sum())
    if timeouts and delay_count:
        log.warning("%d timeouts at n=%d m=%d d=%d delays=%d: convergence counterexample candidates",
                    timeouts, n, m, d, delay_count)
    vals = done.astype(float) if done.size else np.array([math.nan])
    return PointResult(
        n=n, m=m, d=d, delay_count=delay_count, trials=trials, master_seed=master_seed,
        mean=float(vals.mean()), median=float(np.median(vals)),
        p95=float(np.percentile(vals, 95)), max=int(done.max()) if done.size else -1,
        timeouts=timeouts, rounds=[int(x) for x in rounds], seeds=seeds,
    )


def _run_point(args: tuple) -> PointResult:
    n, m, d, k, trials, max_rounds, seed, counters, target = args
    return measure_convergence(n, m, d, k, trials, max_rounds, seed,
                               counters=counters, target=target)


def sweep(spec: ExperimentSpec, workers: int = 1) -> ExperimentResult:
    res = ExperimentResult(spec)
    jobs = []
    for v in spec.values:
        n, m, d, k = spec.point(v)
        if d is None or d < 1 or m * d > n or not 0 <= k <= n:
            log.info("skipping infeasible point n=%d m=%d d=%s delay_count=%d", n, m, d, k)
            res.skipped.append(v)
            continue
        jobs.append((n, m, d, k, spec.trials, spec.max_rounds, spec.master_seed,
                     spec.counters, spec.target))
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as ex:
            res.points = list(ex.map(_run_point, jobs))
    else:
        res.points = [_run_point(j) for j in jobs]
    return res


def slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of ``ys`` against ``xs``."""
    return float(np.polyfit(np.asarray(xs, float), np.asarray(ys, float), 1)[0])
