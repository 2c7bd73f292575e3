"""Synchronous round semantics of the delay/relay programs and the open chain.

A round is evaluated in two phases from the old state. Phase A moves every
queued token to rest at the successor (``r_i += q_{i-1}``, all ``q`` cleared).
Phase B lets each process enqueue at most one resting token: relays always
do when they can; a delay process does so only when its counter is 0, and
then reloads the counter to ``C``. A positive counter just counts down.
"""

from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional, Sequence

from .ring_model import GlobalState, RingConfig, StateMismatch, validate


def step_round(config: RingConfig, state: GlobalState) -> GlobalState:
    validate(config, state)
    return _step(config.C, state)


def _step(C: int, state: GlobalState) -> GlobalState:
    r, q, c = state.r, state.q, state.c
    n = len(r)
    nr = [r[i] + q[i - 1] for i in range(n)]
    nq = [0] * n
    nc = list(c)
    for i in range(n):
        ci = c[i]
        if ci is None:
            if nr[i] > 0:
                nr[i] -= 1
                nq[i] = 1
        elif ci > 0:
            nc[i] = ci - 1
        elif nr[i] > 0:
            nc[i] = C
            nr[i] -= 1
            nq[i] = 1
    return GlobalState(tuple(nr), tuple(nq), tuple(nc), state.round + 1)


# -- ghost token identities ---------------------------------------------------

class TokenTracker:
    """FIFO token identities riding along with r/q counts.

    Each process keeps a queue of ids about to move (``queued``) and a queue
    of resting ids. Ids never influence dynamics.
    """

    def __init__(self, state: GlobalState):
        self.queued = [deque() for _ in range(state.n)]
        self.resting = [deque() for _ in range(state.n)]
        tid = 0
        for i in range(state.n):
            for _ in range(state.q[i]):
                self.queued[i].append(tid)
                tid += 1
            for _ in range(state.r[i]):
                self.resting[i].append(tid)
                tid += 1
        self.m = tid

    def advance(self, old: GlobalState, new: GlobalState) -> list:
        """Move ids according to the ``old -> new`` transition.

        Returns, per process, the list of ids that arrived there this round.
        """
        n = old.n
        arrived = [list(self.queued[i - 1]) for i in range(n)]
        for i in range(n):
            self.resting[i].extend(arrived[i])
        queued = [deque() for _ in range(n)]
        for i in range(n):
            for _ in range(new.q[i]):
                queued[i].append(self.resting[i].popleft())
            assert len(self.resting[i]) == new.r[i]
        self.queued = queued
        return arrived

    def positions(self) -> tuple:
        pos = [0] * self.m
        for i in range(len(self.queued)):
            for t in self.queued[i]:
                pos[t] = i
            for t in self.resting[i]:
                pos[t] = i
        return tuple(pos)

    def cyclic_order(self) -> list:
        """Ids in clockwise order starting from p_0 (queued ahead of resting)."""
        out = []
        for i in range(len(self.queued)):
            # the queue head leaves first, so it is clockwise-ahead of later entries
            out.extend(reversed(self.resting[i]))
            out.extend(reversed(self.queued[i]))
        return out


@dataclass
class Trace:
    config: RingConfig
    states: list
    token_paths: Optional[list] = None  # per round: tuple id -> process index
    arrivals: Optional[list] = None  # per round k>=1: per process, ids that arrived
    orders: Optional[list] = None  # per round: clockwise id order

    def __len__(self):
        return len(self.states)

    @property
    def tracked(self) -> bool:
        return self.token_paths is not None

    def to_jsonl(self) -> Iterator[str]:
        from .ring_model import state_to_json

        for s in self.states:
            yield state_to_json(self.config, s)


def run(
    config: RingConfig,
    state: GlobalState,
    rounds: int,
    track_tokens: bool = False,
    step: Optional[Callable] = None,
) -> Trace:
    """Iterate ``step_round`` for ``rounds`` rounds and record every state."""
    if rounds < 0:
        raise ValueError("rounds must be >= 0")
    validate(config, state)
    step = step or (lambda s: _step(config.C, s))
    states = [state]
    tracker = TokenTracker(state) if track_tokens else None
    trace = Trace(config, states)
    if tracker:
        trace.token_paths = [tracker.positions()]
        trace.arrivals = [None]
        trace.orders = [tracker.cyclic_order()]
    cur = state
    for _ in range(rounds):
        nxt = step(cur)
        states.append(nxt)
        if tracker:
            trace.arrivals.append(tracker.advance(cur, nxt))
            trace.token_paths.append(tracker.positions())
            trace.orders.append(tracker.cyclic_order())
        cur = nxt
    return trace


# -- open chain ---------------------------------------------------------------

@dataclass(frozen=True)
class ChainState:
    """Open linear chain ``p_1 .. p_length`` (stored 0-based).

    ``p_1`` keeps its backlog in ``pending`` and releases one token downstream
    only when ``throttle_c`` is 0; ``r[0]`` is unused and stays 0. Tokens queued
    at the last process leave the system in the next round.
    """

    length: int
    throttle_c: int
    r: tuple
    q: tuple
    pending: int = 0
    round: int = 0

    def __post_init__(self):
        object.__setattr__(self, "r", tuple(self.r))
        object.__setattr__(self, "q", tuple(self.q))
        if len(self.r) != self.length or len(self.q) != self.length:
            raise StateMismatch("chain r/q length mismatch")
        if min(self.r + self.q) < 0 or self.pending < 0 or self.throttle_c < 0:
            raise StateMismatch("chain counts must be non-negative")

    @classmethod
    def empty(cls, length: int) -> "ChainState":
        return cls(length, 0, (0,) * length, (0,) * length)

    def positions(self) -> list:
        """Chain indices holding tokens, with multiplicity (``pending`` excluded)."""
        out = []
        for i in range(self.length):
            out.extend([i] * (self.r[i] + self.q[i]))
        return out


def step_chain(chain: ChainState, inject: int, C: int) -> ChainState:
    if inject < 0:
        raise ValueError("inject must be >= 0")
    L = chain.length
    r, q = chain.r, chain.q
    nr = [0] + [r[i] + q[i - 1] for i in range(1, L)]
    nq = [0] * L
    pending = chain.pending + inject + r[0]
    tc = chain.throttle_c
    if tc > 0:
        tc -= 1
    elif pending > 0:
        tc = C
        pending -= 1
        nq[0] = 1
    for i in range(1, L):
        if nr[i] > 0:
            nr[i] -= 1
            nq[i] = 1
    return ChainState(L, tc, tuple(nr), tuple(nq), pending, chain.round + 1)


def scripted_injections(script: Sequence[int]) -> Iterator[int]:
    """Replay a fixed per-round injection list, then inject nothing."""
    yield from script
    while True:
        yield 0


def bernoulli_injections(p: float, rng: random.Random) -> Iterator[int]:
    while True:
        yield 1 if rng.random() < p else 0


def run_chain(chain: ChainState, injections: Iterable[int], C: int, rounds: int) -> list:
    states = [chain]
    it = iter(injections)
    for _ in range(rounds):
        chain = step_chain(chain, next(it), C)
        states.append(chain)
    return states


def chain_gaps(chain: ChainState) -> list:
    """Gaps between consecutive tokens strictly below ``p_1``; co-located tokens give 0."""
    pos = [p for p in chain.positions() if p >= 1]
    return [b - a for a, b in zip(pos, pos[1:])]


def load_injection_script(path: str) -> list:
    """Read an injection script: JSON list of ints or one int per line."""
    with open(path) as fh:
        text = fh.read().strip()
    if text.startswith("["):
        return [int(x) for x in json.loads(text)]
    return [int(line) for line in text.split() if line]


def chain_settled_round(states: Sequence[ChainState], C: int) -> Optional[int]:
    """First index from which every later chain state has all gaps ``>= C+1``.

    ``None`` when the final state still violates the separation.
    """
    settled = None
    for k, s in enumerate(states):
        if all(g >= C + 1 for g in chain_gaps(s)):
            if settled is None:
                settled = k
        else:
            settled = None
    return settled
