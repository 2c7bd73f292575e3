"""Single corrective process that learns the ring size and maximizes separation.

One process runs the revised delay program; every other process relays.
The delay process times how long its own released token takes to come back
(skipping the arrivals of the other ``M - 1`` tokens) and sets its release
spacing ``ClockBase`` to ``floor(t / M) - 1``. Its counter ``c`` is kept in the
ring state like any delay counter, but is bounded by ``ClockBase`` instead of
a fixed ``C``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Optional

from .legitimacy import check
from .ring_model import GlobalState, RingConfig, RingError, StateMismatch

T_MAX = 2**63 - 1


class MultipleDelayProcesses(RingError):
    pass


class Timeout(RuntimeError):
    def __init__(self, max_rounds: int):
        super().__init__(f"no stable suffix within {max_rounds} rounds")
        self.max_rounds = max_rounds


@dataclass(frozen=True)
class AdaptiveState:
    clock_base: int
    timing: bool
    t: int
    ignore: int
    M: int


@dataclass(frozen=True)
class AdaptiveRing:
    ring: GlobalState
    ctl: AdaptiveState

    @property
    def round(self) -> int:
        return self.ring.round


def delay_index(config: RingConfig) -> int:
    if len(config.delay_set) != 1:
        raise MultipleDelayProcesses(
            f"adaptive protocol needs exactly one delay process, got {len(config.delay_set)}"
        )
    return next(iter(config.delay_set))


def target_clock_base(n: int, m: int) -> int:
    return n // m - 1


def step_round_adaptive(config: RingConfig, state: AdaptiveRing, literal_threshold: bool = False) -> AdaptiveRing:
    """One synchronous round: relays everywhere, the revised delay program at the delay process.

    The timing phase ends on the first arrival after ``ignore`` arrivals have
    been skipped, i.e. when ``ignore`` drops below 0. ``literal_threshold``
    ends it at ``ignore < 1`` instead, one arrival early; kept only to exhibit
    that reading's failure to reach ``floor(n/m) - 1``.
    """
    k = delay_index(config)
    ring, ctl = state.ring, state.ctl
    if ring.n != config.n or ring.c[k] is None:
        raise StateMismatch("adaptive state does not match config")
    r, q = ring.r, ring.q
    n = len(r)
    cb, timing, ignore = ctl.clock_base, ctl.timing, ctl.ignore
    t = min(ctl.t + 1, T_MAX)
    stop_below = 1 if literal_threshold else 0
    if q[k - 1] > 0 and timing:
        ignore -= 1
        if ignore < stop_below:
            timing = False
            cb = max(0, t // ctl.M - 1)

    nr = [r[i] + q[i - 1] for i in range(n)]
    nq = [0] * n
    nc = list(ring.c)
    for i in range(n):
        if i == k:
            continue
        if nr[i] > 0:
            nr[i] -= 1
            nq[i] = 1
    ck = ring.c[k]
    if ck > 0:
        nc[k] = ck - 1
    elif nr[k] > 0:
        nc[k] = cb
        nr[k] -= 1
        nq[k] = 1
        if not timing:
            timing = True
            t = 0
            ignore = ctl.M - nr[k] - 1
    return AdaptiveRing(
        GlobalState(tuple(nr), tuple(nq), tuple(nc), ring.round + 1),
        AdaptiveState(cb, timing, t, ignore, ctl.M),
    )


def stable_now(config: RingConfig, state: AdaptiveRing) -> bool:
    """ClockBase at its target and the ring legitimate for ``C = ClockBase``."""
    k = delay_index(config)
    cb = state.ctl.clock_base
    if cb != target_clock_base(config.n, config.m) or not 0 <= state.ring.c[k] <= cb:
        return False
    cfg = RingConfig(config.n, config.m, cb, config.delay_set, config.seed, unchecked=True)
    return check(cfg, state.ring, validated=True).legitimate


def run_until_stable(config: RingConfig, state: AdaptiveRing, max_rounds: int,
                     hold: Optional[int] = None, literal_threshold: bool = False) -> tuple:
    """Return ``(round, ClockBase)`` where the stable suffix begins.

    Stable means :func:`stable_now` holds at that round and for ``hold``
    (default ``n``) further rounds. Raises :class:`Timeout` otherwise.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    hold = config.n if hold is None else hold
    start = None
    cur = state
    while True:
        if stable_now(config, cur):
            if start is None:
                start = cur.round
            if cur.round - start >= hold:
                return start, cur.ctl.clock_base
        else:
            start = None
        if cur.round - state.round >= max_rounds + hold:
            raise Timeout(max_rounds)
        if start is None and cur.round - state.round >= max_rounds:
            raise Timeout(max_rounds)
        cur = step_round_adaptive(config, cur, literal_threshold)


def random_adaptive_state(config: RingConfig, rng: random.Random, M: Optional[int] = None) -> AdaptiveRing:
    """Arbitrary start: tokens i.i.d. over processes, each resting or queued with prob 1/2.

    Controller variables: timing ~ fair coin, t ~ U[0, 2n], ignore ~ U[-1, m],
    ClockBase ~ U[0, n], counter ~ U[0, n].
    """
    k = delay_index(config)
    n, m = config.n, config.m
    r = [0] * n
    q = [0] * n
    for _ in range(m):
        i = rng.randrange(n)
        if rng.random() < 0.5:
            r[i] += 1
        else:
            q[i] += 1
    c = [None] * n
    c[k] = rng.randint(0, n)
    ctl = AdaptiveState(
        clock_base=rng.randint(0, n),
        timing=rng.random() < 0.5,
        t=rng.randint(0, 2 * n),
        ignore=rng.randint(-1, m),
        M=m if M is None else M,
    )
    return AdaptiveRing(GlobalState(tuple(r), tuple(q), tuple(c)), ctl)


def adaptive_config(n: int, m: int, delay: int = 0, seed: int = 0) -> RingConfig:
    # C is unused by the adaptive program; 0 keeps the instance feasible for any m <= n
    return RingConfig(n=n, m=m, C=0, delay_set=frozenset({delay}), seed=seed)
