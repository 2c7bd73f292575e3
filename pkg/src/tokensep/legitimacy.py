"""Legitimacy predicate, desiderata checks, and convergence diagnostics over traces."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, asdict
from typing import Iterator, Optional

from .protocol import Trace
from .ring_model import GlobalState, RingConfig, validate

CONJUNCTS = ("leg0", "leg1", "leg2", "leg3", "leg4")


class TrackingRequired(ValueError):
    pass


class WindowTooShort(ValueError):
    pass


@dataclass
class LegitimacyReport:
    legitimate: bool
    conjuncts: dict
    witness: Optional[tuple] = None  # (conjunct id, process index or None)

    def to_dict(self) -> dict:
        return {"legitimate": self.legitimate, "conjuncts": dict(self.conjuncts),
                "witness": list(self.witness) if self.witness else None}


def _distances(state: GlobalState) -> tuple:
    """Clockwise and counterclockwise distance-to-token arrays, both O(n)."""
    n = state.n
    occ = [state.r[i] + state.q[i] > 0 for i in range(n)]
    big = 2 * n
    right = [big] * n
    nxt = big
    for k in range(2 * n - 1, -1, -1):
        i = k % n
        nxt = 0 if occ[i] else nxt + 1
        if k < n:
            right[i] = nxt
    left = [big] * n
    prv = big
    for k in range(2 * n):
        i = k % n
        prv = 0 if occ[i] else prv + 1
        if k >= n:
            left[i] = prv
    return right, left


def check(config: RingConfig, state: GlobalState, validated: bool = False) -> LegitimacyReport:
    if not validated:
        validate(config, state)
    n, C, m = config.n, config.C, config.m
    r, q, c = state.r, state.q, state.c
    res = dict.fromkeys(CONJUNCTS, True)
    witness = {}

    # leg0: every token queued, one per process
    if sum(q) != m or sum(r) != 0:
        res["leg0"] = False
        witness["leg0"] = next((i for i in range(n) if r[i] > 0), None)
    for i in range(n):
        if q[i] > 1:
            res["leg0"] = False
            witness.setdefault("leg0", i)
            break

    if m == 0 or not any(r[i] + q[i] for i in range(n)):
        # no tokens: tokdist undefined; treat gap constraint as vacuous
        right = left = [2 * n] * n
    else:
        right, left = _distances(state)
        # leg1: tokdist > C, gaps computed from holder to next holder
        for i in range(n):
            t = r[i] + q[i]
            if t == 0:
                continue
            g = 0 if t >= 2 else 1 + right[(i + 1) % n]
            if g > n:
                g = n
            if g <= C:
                res["leg1"] = False
                witness.setdefault("leg1", i)
                break

    for i in config.delay_set:
        ci = c[i]
        if q[i] == 0:
            if ci > 0 and right[i] != C - ci:
                res["leg2"] = False
                witness.setdefault("leg2", i)
            if not left[i] > ci:
                res["leg3"] = False
                witness.setdefault("leg3", i)
        elif q[i] == 1 and ci != C:
            res["leg4"] = False
            witness.setdefault("leg4", i)

    ok = all(res.values())
    first = None
    for k in CONJUNCTS:
        if not res[k]:
            first = (k, witness.get(k))
            break
    return LegitimacyReport(ok, res, first)


def is_legitimate(config: RingConfig, state: GlobalState) -> bool:
    return check(config, state, validated=True).legitimate


def converged_at(config: RingConfig, trace: Trace) -> Optional[int]:
    for k, s in enumerate(trace.states):
        if check(config, s, validated=True).legitimate:
            return k
    return None


# -- desiderata ---------------------------------------------------------------

def _positions(state: GlobalState) -> list:
    out = []
    for i in range(state.n):
        out.extend([i] * (state.r[i] + state.q[i]))
    return out


def check_desiderata(config: RingConfig, trace: Trace, from_round: int = 0,
                     to_round: Optional[int] = None, strict_window: bool = False) -> dict:
    """D1..D4 over states ``[from_round, to_round)`` (default: to the end).

    D4 is exact only when the window length is a multiple of ``n``; otherwise
    it reports whether every process's visit count is within ``m`` of
    ``k*m/n`` (raises WindowTooShort instead when ``strict_window``).
    """
    from .ring_model import token_count, tokdist

    states = trace.states[from_round:to_round]
    if not states:
        raise WindowTooShort("empty window")
    n, m, C = config.n, config.m, config.C
    d1 = all(token_count(s) == m for s in states)
    d2 = all(m == 0 or tokdist(s) >= C + 1 for s in states)
    d3 = True
    for a, b in zip(states, states[1:]):
        shifted = sorted((p + 1) % n for p in _positions(a))
        if shifted != sorted(_positions(b)):
            d3 = False
            break
    k = len(states)
    visits = [0] * n
    for s in states:
        for i in range(n):
            if s.r[i] + s.q[i] > 0:
                visits[i] += 1
    if k % n == 0:
        d4 = all(v == k * m // n for v in visits)
        d4_exact = True
    else:
        if strict_window:
            raise WindowTooShort(f"window of {k} rounds is not a multiple of n={n}")
        d4 = max(abs(v - k * m / n) for v in visits) <= m
        d4_exact = False
    return {"D1": d1, "D2": d2, "D3": d3, "D4": d4, "D4_exact": d4_exact, "visits": visits}


# -- convergence diagnostics --------------------------------------------------

@dataclass
class DiagnosticsReport:
    warmup_round: Optional[int]
    F_values: list = field(default_factory=list)  # per state from warmup_round on
    F_nonincreasing: bool = True
    F_zero_round: Optional[int] = None
    drained_round: Optional[int] = None  # every delay process seen with r = c = 0
    resting_bound_ok: bool = True
    interarrival_ok: bool = True
    min_interarrival: Optional[int] = None
    counter_recurrence: Optional[dict] = None
    desiderata: Optional[dict] = None
    converged_at: Optional[int] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["F_values"] = [list(f) for f in self.F_values]
        return d


def warmup_round(config: RingConfig, trace: Trace) -> Optional[int]:
    """First state index by which every token id has arrived at some delay process."""
    if not trace.tracked:
        raise TrackingRequired("warmup detection needs token ids; run with track_tokens")
    m = len(trace.token_paths[0])
    seen = set()
    if m == 0:
        return 0
    for k in range(1, len(trace.states)):
        for i in config.delay_set:
            seen.update(trace.arrivals[k][i])
        if len(seen) == m:
            return k
    return None


def arrival_rounds(trace: Trace, i: int) -> list:
    """Rounds ``k`` (transition ``k-1 -> k``) in which a token arrived at ``p_i``."""
    n = trace.config.n
    return [k for k in range(1, len(trace.states)) if trace.states[k - 1].q[(i - 1) % n] > 0]


def diagnostics(config: RingConfig, trace: Trace) -> DiagnosticsReport:
    """Warmup, inter-arrival spacing, and the resting-bound variant function.

    Inter-arrival gaps are measured over arrivals in rounds that start from
    states strictly after the warmup state ``w``.

    After warmup state ``w``, each delay process starts with resting bound
    ``1 + r_i`` at ``w``. A round that leaves ``r_i`` below the reference
    value re-anchors the bound at ``1 + r_i``. The bound drops to 0 for good
    at a state with ``r_i = 0`` and ``c_i = 0``, or at the first legitimate
    state (legitimate states are closed and hold no resting tokens).
    ``F`` is the tuple of bounds.
    """
    w = warmup_round(config, trace)
    rep = DiagnosticsReport(warmup_round=w, converged_at=converged_at(config, trace))
    if w is None:
        return rep
    states = trace.states
    n, C = config.n, config.C
    delays = sorted(config.delay_set)

    # Only rounds starting after the warmup state count: a token in transit at
    # ``w`` left its previous process before ``w``, so its spacing is not yet
    # governed by the delay processes.
    min_gap = None
    for i in range(n):
        last = None
        for k in range(w + 2, len(states)):
            if states[k - 1].q[(i - 1) % n] > 0:
                if last is not None:
                    g = k - last
                    min_gap = g if min_gap is None else min(min_gap, g)
                last = k
    rep.min_interarrival = min_gap
    rep.interarrival_ok = min_gap is None or min_gap >= C + 1

    ref = {i: states[w].r[i] for i in delays}
    zero = {i: False for i in delays}
    drained = set()
    prev = None
    conv = rep.converged_at
    for k in range(w, len(states)):
        s = states[k]
        if conv is not None and k >= conv:
            zero = dict.fromkeys(delays, True)
        for i in delays:
            if s.r[i] == 0 and s.c[i] == 0:
                drained.add(i)
            if zero[i]:
                if s.r[i] > 0:
                    rep.resting_bound_ok = False
                continue
            if s.r[i] == 0 and s.c[i] == 0:
                zero[i] = True
                continue
            if s.r[i] > 1 + ref[i]:
                rep.resting_bound_ok = False
            if s.r[i] < ref[i]:
                ref[i] = s.r[i]
        F = tuple(0 if zero[i] else 1 + ref[i] for i in delays)
        rep.F_values.append(F)
        if prev is not None and any(a > b for a, b in zip(F, prev)):
            rep.F_nonincreasing = False
        if rep.drained_round is None and len(drained) == len(delays):
            rep.drained_round = k
        if rep.F_zero_round is None and not any(F):
            rep.F_zero_round = k
        prev = F
    return rep


def counter_recurrence(config: RingConfig, trace: Trace, i: int) -> set:
    """Counter values observed at delay process ``p_i`` over the trace."""
    return {s.c[i] for s in trace.states}


# -- enumeration oracle -------------------------------------------------------

def enumerate_legitimate(config: RingConfig) -> Iterator[GlobalState]:
    """All legitimate states of ``config``, by direct construction.

    Token placements are the m-subsets of processes with every cyclic gap
    above C; each delay counter is then forced (queued: C) or confined to
    the values its clockwise/counterclockwise distances allow.
    """
    n, m, C = config.n, config.m, config.C
    if m == 0:
        return
    delays = sorted(config.delay_set)
    for pos in itertools.combinations(range(n), m):
        gaps = [((pos[(a + 1) % m] - pos[a]) % n) or n for a in range(m)]
        if min(gaps) <= C:
            continue
        q = [0] * n
        for p in pos:
            q[p] = 1
        base = GlobalState((0,) * n, tuple(q), tuple(0 if i in config.delay_set else None for i in range(n)))
        right, left = _distances(base)
        choices = []
        for i in delays:
            if q[i]:
                choices.append((C,))
            else:
                opts = [0] if left[i] > 0 else []
                opts += [ci for ci in range(1, C + 1) if right[i] == C - ci and left[i] > ci]
                choices.append(tuple(opts))
        for combo in itertools.product(*choices):
            cs = list(base.c)
            for i, ci in zip(delays, combo):
                cs[i] = ci
            yield GlobalState(base.r, base.q, tuple(cs))
