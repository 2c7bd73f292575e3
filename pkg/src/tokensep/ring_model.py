"""Ring instances, per-process state, and the distance functions on token positions.

Processes are indexed ``0..n-1``; clockwise is increasing index mod ``n``.
A process holds ``r + q`` tokens: ``r`` resting, ``q`` queued to move on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence


class RingError(ValueError):
    pass


class InfeasibleConfig(RingError):
    pass


class StateMismatch(RingError):
    pass


class NoTokens(RingError):
    pass


class NotATokenHolder(RingError):
    pass


@dataclass(frozen=True)
class RingConfig:
    n: int
    m: int
    C: int
    delay_set: frozenset = field(default_factory=frozenset)
    seed: int = 0
    unchecked: bool = False

    def __post_init__(self):
        object.__setattr__(self, "delay_set", frozenset(self.delay_set))
        if self.n <= 1:
            raise RingError(f"ring needs n > 1, got n={self.n}")
        if self.m < 0 or self.C < 0:
            raise RingError("m and C must be non-negative")
        bad = [i for i in self.delay_set if not 0 <= i < self.n]
        if bad:
            raise RingError(f"delay indices out of range: {sorted(bad)}")
        if not (0 <= self.seed < 2**64):
            raise RingError("seed must be a 64-bit unsigned integer")
        if not self.unchecked and not self.feasible:
            raise InfeasibleConfig(
                f"m*(C+1) = {self.m * (self.C + 1)} exceeds n = {self.n}"
            )

    @property
    def d(self) -> int:
        """Target separation between consecutive tokens."""
        return self.C + 1

    @property
    def feasible(self) -> bool:
        return self.m * (self.C + 1) <= self.n

    def is_delay(self, i: int) -> bool:
        return i in self.delay_set


@dataclass(frozen=True)
class ProcessState:
    r: int
    q: int
    c: Optional[int] = None  # None for relay processes

    @property
    def kind(self) -> str:
        return "relay" if self.c is None else "delay"

    @property
    def tokens(self) -> int:
        return self.r + self.q


@dataclass(frozen=True)
class GlobalState:
    """Whole-ring state at a round boundary.

    Stored column-wise (``r``, ``q``, ``c`` tuples) because every stepper and
    checker walks the ring by index; ``processes`` gives the row view.
    """

    r: tuple
    q: tuple
    c: tuple
    round: int = 0

    def __post_init__(self):
        object.__setattr__(self, "r", tuple(self.r))
        object.__setattr__(self, "q", tuple(self.q))
        object.__setattr__(self, "c", tuple(self.c))
        if not len(self.r) == len(self.q) == len(self.c):
            raise StateMismatch("r, q, c must have equal length")
        if any(x < 0 for x in self.r) or any(x < 0 for x in self.q):
            raise StateMismatch("token counts must be non-negative")

    @property
    def n(self) -> int:
        return len(self.r)

    @property
    def processes(self) -> tuple:
        return tuple(ProcessState(r, q, c) for r, q, c in zip(self.r, self.q, self.c))

    @classmethod
    def from_processes(cls, processes: Iterable[ProcessState], round: int = 0) -> "GlobalState":
        ps = list(processes)
        return cls(tuple(p.r for p in ps), tuple(p.q for p in ps), tuple(p.c for p in ps), round)

    @classmethod
    def build(
        cls,
        config: RingConfig,
        r: Optional[Sequence[int]] = None,
        q: Optional[Sequence[int]] = None,
        c: Optional[dict] = None,
        round: int = 0,
    ) -> "GlobalState":
        """Convenience constructor: unspecified r/q are zero, delay counters default to 0."""
        n = config.n
        c = c or {}
        cs = tuple(c.get(i, 0) if config.is_delay(i) else None for i in range(n))
        return cls(tuple(r or (0,) * n), tuple(q or (0,) * n), cs, round)

    def holders(self) -> list:
        return [i for i in range(self.n) if self.r[i] + self.q[i] > 0]

    def with_round(self, k: int) -> "GlobalState":
        return GlobalState(self.r, self.q, self.c, k)


def validate(config: RingConfig, state: GlobalState, check_count: bool = False) -> None:
    """Raise StateMismatch unless ``state`` has the shape ``config`` demands."""
    if state.n != config.n:
        raise StateMismatch(f"state has {state.n} processes, config has {config.n}")
    for i, c in enumerate(state.c):
        if config.is_delay(i):
            if c is None:
                raise StateMismatch(f"p{i} runs delay but has no counter")
            if not 0 <= c <= config.C:
                raise StateMismatch(f"p{i} counter {c} outside [0, {config.C}]")
        elif c is not None:
            raise StateMismatch(f"p{i} runs relay but carries a counter")
    if check_count and token_count(state) != config.m:
        raise StateMismatch(f"state holds {token_count(state)} tokens, config says m={config.m}")


def token_count(state: GlobalState) -> int:
    return sum(state.r) + sum(state.q)


def _occupied(state: GlobalState) -> list:
    return [state.r[i] + state.q[i] > 0 for i in range(state.n)]


def rdist(state: GlobalState, i: int) -> int:
    """Clockwise distance from ``p_i`` to the nearest token (0 if ``p_i`` holds one)."""
    occ = _occupied(state)
    n = state.n
    for k in range(n):
        if occ[(i + k) % n]:
            return k
    raise NoTokens("ring holds no tokens")


def ldist(state: GlobalState, i: int) -> int:
    """Counterclockwise distance from ``p_i`` to the nearest token."""
    occ = _occupied(state)
    n = state.n
    for k in range(n):
        if occ[(i - k) % n]:
            return k
    raise NoTokens("ring holds no tokens")


def gap(state: GlobalState, i: int) -> int:
    """Clockwise gap from token holder ``p_i`` to the next token.

    ``n`` for a lone token, 0 when ``p_i`` holds two or more tokens.
    """
    if state.r[i] + state.q[i] == 0:
        raise NotATokenHolder(f"p{i} holds no token")
    if state.r[i] + state.q[i] >= 2:
        return 0
    occ = _occupied(state)
    n = state.n
    for k in range(1, n):
        if occ[(i + k) % n]:
            return k
    return n


def tokdist(state: GlobalState) -> int:
    """Minimum strictly positive clockwise gap between token positions (0 on co-location)."""
    holders = state.holders()
    if not holders:
        raise NoTokens("ring holds no tokens")
    n = state.n
    best = n
    for a, i in enumerate(holders):
        if state.r[i] + state.q[i] >= 2:
            return 0
        nxt = holders[(a + 1) % len(holders)]
        best = min(best, (nxt - i) % n or n)
    return best


# -- JSON ---------------------------------------------------------------------

def state_to_json(config: RingConfig, state: GlobalState) -> str:
    procs = []
    for r, q, c in zip(state.r, state.q, state.c):
        p = {"r": r, "q": q}
        if c is not None:
            p["c"] = c
        procs.append(p)
    doc = {
        "n": config.n,
        "C": config.C,
        "delay": sorted(config.delay_set),
        "procs": procs,
        "round": state.round,
    }
    return json.dumps(doc, separators=(",", ":"))


def state_from_json(text: str, unchecked: bool = False) -> tuple:
    """Parse a state document; returns ``(RingConfig, GlobalState)`` with m taken from the token count."""
    doc = json.loads(text)
    procs = doc["procs"]
    n = doc["n"]
    if len(procs) != n:
        raise StateMismatch(f"document declares n={n} but lists {len(procs)} processes")
    delay = frozenset(doc.get("delay", ()))
    state = GlobalState(
        tuple(p["r"] for p in procs),
        tuple(p["q"] for p in procs),
        tuple(p.get("c") if i in delay else None for i, p in enumerate(procs)),
        doc.get("round", 0),
    )
    config = RingConfig(n=n, m=token_count(state), C=doc["C"], delay_set=delay, unchecked=unchecked)
    validate(config, state)
    return config, state
