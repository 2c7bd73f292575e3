"""Acceptance criteria 1-12, each at its stated tolerance.

Every test records a PASS/FAIL line (shown in the terminal summary) before
asserting. Runnable directly too: ``python tests/test_acceptance.py``.
"""

import itertools
import random
import time

import numpy as np
import pytest

from tokensep import GlobalState, RingConfig, check, check_desiderata, run
from tokensep.adaptive import Timeout, adaptive_config, random_adaptive_state, run_until_stable
from tokensep.harness import (Batch, ExperimentSpec, batch_converge, child_seed, random_delay_set,
                              random_state, slope, sweep)
from tokensep.legitimacy import diagnostics, enumerate_legitimate
from tokensep.petri import (CALIBRATED, OCCUPANCY, PHASES, equivalent, equivalent_batch,
                            exhaustive_equivalence, small_instance_batches)
from tokensep.protocol import (ChainState, _step, bernoulli_injections, chain_settled_round,
                               run_chain)
from tokensep.ring_model import token_count

from acceptance_log import record

MASTER_SEED = 20240601


def _round_checks(states, m):
    """(conserved every round, q <= 1 from round 1 on) over a state sequence."""
    conserved = all(token_count(s) == m for s in states)
    single = all(max(s.q) <= 1 for s in states[1:]) if len(states) > 1 else True
    return conserved, single


# -- shared criterion-1 and criterion-2 runs -----------------------------------

def _legitimate_sample(rng):
    """Random legitimate state for n <= 60 by composing gaps, independently of the enumerator."""
    n = rng.randint(2, 60)
    m = rng.randint(1, min(n, 6))
    C = rng.randint(0, n // m - 1)
    extra = n - m * (C + 1)
    cuts = sorted(rng.randint(0, extra) for _ in range(m - 1))
    gaps = [C + 1 + b - a for a, b in zip([0] + cuts, cuts + [extra])]
    start = rng.randrange(n)
    pos, p = [], start
    for g in gaps:
        pos.append(p % n)
        p += g
    D = frozenset(i for i in range(n) if rng.random() < 0.3)
    q = [1 if i in pos else 0 for i in range(n)]
    c = [None] * n
    for i in D:
        if q[i]:
            c[i] = C
            continue
        right = next(k for k in range(n) if q[(i + k) % n])
        left = next(k for k in range(n) if q[(i - k) % n])
        opts = [0] + [C - right] * (1 <= C - right < left)
        c[i] = rng.choice(opts)
    return RingConfig(n, m, C, D), GlobalState((0,) * n, tuple(q), tuple(c))


@pytest.fixture(scope="module")
def closure_runs():
    t0 = time.time()
    total = bad = 0
    conserved = single = True
    for n in range(2, 9):
        for m in (1, 2, 3):
            for C in range(0, n // m if m <= n else 0):
                for k in range(n + 1):
                    for D in itertools.combinations(range(n), k):
                        cfg = RingConfig(n, m, C, frozenset(D))
                        for s in enumerate_legitimate(cfg):
                            nxt = _step(C, s)
                            total += 1
                            bad += not check(cfg, nxt, validated=True).legitimate
                            a, b = _round_checks([s, nxt], m)
                            conserved &= a
                            single &= b
    rng = random.Random(MASTER_SEED)
    sampled = sampled_bad = 0
    for _ in range(1000):
        cfg, s = _legitimate_sample(rng)
        nxt = _step(cfg.C, s)
        sampled += 1
        sampled_bad += not (check(cfg, s).legitimate and check(cfg, nxt).legitimate)
        a, b = _round_checks([s, nxt], cfg.m)
        conserved &= a
        single &= b
    return dict(total=total, bad=bad, sampled=sampled, sampled_bad=sampled_bad,
                conserved=conserved, single=single, seconds=time.time() - t0)


def _exhaustive_instances():
    """All criterion-2 small instances grouped per configuration: n <= 5, <= 3 tokens."""
    for n in range(2, 6):
        for m in range(1, min(3, n) + 1):
            splits = []
            for place in itertools.combinations_with_replacement(range(2 * n), m):
                v = np.bincount(np.array(place), minlength=2 * n)
                splits.append((tuple(int(x) for x in v[:n]), tuple(int(x) for x in v[n:])))
            for C in range(0, n // m):
                for k in range(1, n + 1):
                    for D in itertools.combinations(range(n), k):
                        cfg = RingConfig(n, m, C, frozenset(D))
                        states = []
                        for r, q in splits:
                            for cs in itertools.product(range(C + 1), repeat=k):
                                c = [None] * n
                                for i, v in zip(D, cs):
                                    c[i] = v
                                states.append(GlobalState(r, q, tuple(c)))
                        yield cfg, states


def _random_instances(count=2000):
    for t in range(count):
        rng = np.random.default_rng(child_seed(MASTER_SEED, t))
        n = int(rng.integers(2, 41))
        m = int(rng.integers(1, min(n, 8) + 1))
        C = int(rng.integers(0, n // m))
        D = random_delay_set(n, int(rng.integers(1, n + 1)), rng)
        cfg = RingConfig(n, m, C, D)
        yield cfg, [random_state(cfg, rng)]


class Tally:
    def __init__(self):
        self.runs = self.timeouts = 0
        self.conserved = self.single = True
        self.spacing = self.resting = self.F_mono = self.F_zero = self.drained = True
        self.no_warmup = 0
        self.desiderata_bad = 0
        self.max_conv_ratio = 0.0
        self.examples = []

    def note(self, what, cfg, s):
        if len(self.examples) < 5:
            self.examples.append((what, cfg, s))


@pytest.fixture(scope="module")
def convergence_runs():
    t0 = time.time()
    tally = Tally()
    for source in (_exhaustive_instances(), _random_instances()):
        for cfg, states in source:
            n, C = cfg.n, cfg.C
            conv = batch_converge(Batch.from_states([cfg] * len(states), states), n ** 3)
            for s, k in zip(states, conv):
                tally.runs += 1
                k = int(k)
                if k < 0:
                    tally.timeouts += 1
                    tally.note("timeout", cfg, s)
                    continue
                tally.max_conv_ratio = max(tally.max_conv_ratio, k / n ** 3)
                tr = run(cfg, s, k + 4 * n + C + 1, track_tokens=True)
                a, b = _round_checks(tr.states, cfg.m)
                tally.conserved &= a
                tally.single &= b
                rep = diagnostics(cfg, tr)
                if rep.converged_at != k:
                    tally.note("batch/scalar convergence mismatch", cfg, s)
                    tally.timeouts += 1
                if rep.warmup_round is None:
                    tally.no_warmup += 1
                    tally.note("no warmup", cfg, s)
                    continue
                if not rep.interarrival_ok:
                    tally.spacing = False
                    tally.note("inter-arrival", cfg, s)
                if not rep.resting_bound_ok:
                    tally.resting = False
                    tally.note("resting bound", cfg, s)
                if not rep.F_nonincreasing:
                    tally.F_mono = False
                    tally.note("F increases", cfg, s)
                if rep.F_zero_round is None or rep.F_zero_round > max(k, rep.warmup_round):
                    tally.F_zero = False
                    tally.note("F not zero by convergence", cfg, s)
                if rep.drained_round is None or rep.drained_round > max(k, rep.warmup_round) + C:
                    tally.drained = False
                    tally.note("delay not drained", cfg, s)
                d = check_desiderata(cfg, tr, k, k + 3 * n)
                if not (d["D1"] and d["D2"] and d["D3"] and d["D4"] and d["D4_exact"]
                        and d["visits"] == [3 * cfg.m] * n):
                    tally.desiderata_bad += 1
                    tally.note("desiderata", cfg, s)
    tally.seconds = time.time() - t0
    return tally


# -- criteria -----------------------------------------------------------------

def test_criterion_01_closure(closure_runs):
    r = closure_runs
    ok = r["bad"] == 0 and r["sampled_bad"] == 0 and r["total"] > 0 and r["seconds"] < 60
    record(1, "closure", ok,
           f"{r['total']} enumerated legitimate states (n<=8), {r['bad']} broken; "
           f"{r['sampled']} sampled (n<=60), {r['sampled_bad']} broken; {r['seconds']:.1f}s")
    assert ok


def test_criterion_02_convergence(convergence_runs):
    t = convergence_runs
    ok = t.timeouts == 0 and t.runs > 0
    record(2, "convergence within n^3", ok,
           f"{t.runs} runs (exhaustive n<=5 + 2000 random n<=40), {t.timeouts} timeouts, "
           f"max rounds/n^3 = {t.max_conv_ratio:.3f}; {t.seconds:.0f}s")
    assert ok, t.examples


def test_criterion_03_single_queue(closure_runs, convergence_runs):
    ok = closure_runs["single"] and convergence_runs.single
    record(3, "q_i <= 1 from round 1", ok, "checked every round of criteria 1-2 executions")
    assert ok


def test_criterion_04_conservation(closure_runs, convergence_runs):
    ok = closure_runs["conserved"] and convergence_runs.conserved
    record(4, "token conservation", ok, "checked every round of criteria 1-2 executions")
    assert ok


def test_criterion_05_interarrival(convergence_runs):
    t = convergence_runs
    ok = t.spacing and t.no_warmup == 0
    record(5, "post-warmup inter-arrival >= C+1", ok,
           f"{t.runs} traces, {t.no_warmup} without a warmup state")
    assert ok, t.examples


def test_criterion_06_variant(convergence_runs):
    t = convergence_runs
    ok = t.F_mono and t.F_zero and t.resting and t.drained and t.no_warmup == 0
    record(6, "variant F non-increasing and zero by convergence", ok,
           f"non-increasing={t.F_mono}, zero by max(convergence, warmup)={t.F_zero}, "
           f"resting bounds hold={t.resting}, every delay seen with r=c=0 by "
           f"max(convergence, warmup)+C={t.drained}")
    assert ok, t.examples


def test_criterion_07_desiderata(convergence_runs):
    t = convergence_runs
    ok = t.desiderata_bad == 0
    record(7, "desiderata over 3n post-convergence rounds", ok,
           f"{t.runs - t.timeouts - t.no_warmup} converged runs, {t.desiderata_bad} violations")
    assert ok, t.examples


def test_criterion_08_adaptive():
    t0 = time.time()
    runs = failures = 0
    first = None
    for n in range(3, 41):
        for m in range(2, n):
            cfg = adaptive_config(n, m)
            for seed in range(20):
                runs += 1
                st = random_adaptive_state(cfg, random.Random(child_seed(n * 1000 + m, seed)))
                try:
                    _, cb = run_until_stable(cfg, st, n ** 3, hold=5 * n)
                    good = cb == n // m - 1
                except Timeout:
                    good = False
                if not good:
                    failures += 1
                    first = first or (n, m, seed)
    ok = failures == 0
    record(8, "adaptive ClockBase -> floor(n/m)-1", ok,
           f"{runs} runs over 2<=m<n<=40 x 20 seeds, {failures} failures"
           f"{'' if ok else f' (first {first})'}; {time.time() - t0:.0f}s")
    assert ok


def _delay_count_curves(target):
    curves = {}
    for m, d in ((2, 10), (2, 25), (5, 2)):
        spec = ExperimentSpec(n=50, m=m, d=d, trials=300, values=range(1, 51),
                              master_seed=MASTER_SEED, target=target)
        curves[(m, d)] = {p.delay_count: p.mean for p in sweep(spec).points}
    return curves


def _delay_count_verdict(curves):
    bands = {(2, 10): (4, 12), (2, 25): (35, 55), (5, 2): (1, 5)}
    verdicts, ok = [], True
    for key, (lo, hi) in bands.items():
        tail = [v for k, v in curves[key].items() if k >= 5]
        in_band = all(lo <= v <= hi for v in tail)
        flat = max(tail) - min(tail) <= 10
        ok &= in_band and flat
        verdicts.append(f"m={key[0]},d={key[1]}: tail {min(tail):.1f}..{max(tail):.1f} in [{lo},{hi}]"
                        f"={in_band}, flat={flat}")
    return ok, "; ".join(verdicts)


def test_criterion_09_delay_count_sweep():
    t0 = time.time()
    ok, detail = _delay_count_verdict(_delay_count_curves("legitimate"))
    elapsed = time.time() - t0
    ok &= elapsed < 300
    info = _delay_count_verdict(_delay_count_curves("separated"))[1]
    record(9, "delay-count sweep bands", ok,
           f"{detail}; {elapsed:.0f}s | not gated, separation-only convergence: {info}")
    assert ok


def _ring_size_means(target):
    ns = list(range(10, 191, 20))
    spec = ExperimentSpec(m=2, trials=300, axis="ring_size", values=ns, master_seed=MASTER_SEED,
                          target=target)
    return ns, [p.mean for p in sweep(spec).points]


def test_criterion_10_ring_size_slope():
    ns, means = _ring_size_means("legitimate")
    b = slope(ns, means)
    inversions = sum(y < x for x, y in zip(means, means[1:]))
    ok = 0.25 <= b <= 0.65 and inversions <= 1
    _, alt = _ring_size_means("separated")
    record(10, "ring-size slope", ok,
           f"slope {b:.3f} rounds/node (band [0.25, 0.65]), {inversions} inversions; "
           f"means {', '.join(f'{x:.1f}' for x in means)} | not gated, separation-only "
           f"convergence: slope {slope(ns, alt):.3f}")
    assert ok


def test_criterion_11_petri():
    t0 = time.time()
    rejected = []
    for conv in itertools.product(OCCUPANCY, PHASES):
        if conv == CALIBRATED:
            continue
        fails = any(not equivalent_batch(cfg, r, q, c, 50, conv).all()
                    for cfg, r, q, c in small_instance_batches(6, 2, 3))
        rejected.append(fails)
    total, failed = exhaustive_equivalence(6, 2, 3, rounds=50)
    rng = np.random.default_rng(MASTER_SEED)
    rand_bad = 0
    for _ in range(500):
        n = int(rng.integers(2, 31))
        m = int(rng.integers(0, 9))
        C = int(rng.integers(0, 6))
        D = random_delay_set(n, int(rng.integers(0, n + 1)), rng)
        cfg = RingConfig(n, m, C, D, unchecked=True)
        rand_bad += not equivalent(cfg, random_state(cfg, rng), 200)[0]
    ok = all(rejected) and not failed and rand_bad == 0
    record(11, "Petri equivalence", ok,
           f"calibrated map {CALIBRATED} unique={all(rejected)}; exhaustive {total} instances, "
           f"{len(failed)} failures; 500 random n<=30 x 200 rounds, {rand_bad} failures; "
           f"{time.time() - t0:.0f}s")
    assert ok


def test_criterion_12_chain():
    rng = random.Random(MASTER_SEED)
    bad = 0
    for k in range(100):
        p = (0.2, 0.5, 1.0)[k % 3]
        states = run_chain(ChainState.empty(20), bernoulli_injections(p, rng), 2, 200)
        bad += chain_settled_round(states, 2) is None
    ok = bad == 0
    record(12, "open chain spacing", ok, f"100 scripts (p in 0.2/0.5/1.0), {bad} never settled")
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
