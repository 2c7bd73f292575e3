"""Petri-net embodiment: a major ring of n places plus one timer ring per delay process.

Every major place has one outgoing transition. At a relay process it is a
plain transition to the next major place. At a delay process it is a joint
transition that also consumes the minor ring's token from the joint place
(position 0) and returns it to position ``C``. Minor-advance transitions
move the minor token ``pos -> pos-1``. With ``C = 0`` the minor ring is a
single place looped through the joint, so the joint behaves as a relay.

Under maximal synchronous firing every enabled transition fires once per
round. No two transitions share an input place, so firing is deterministic.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Optional

import numpy as np

from .protocol import _step
from .ring_model import GlobalState, RingConfig, StateMismatch, validate


class InvalidMarking(ValueError):
    pass


@dataclass(frozen=True)
class Place:
    kind: str  # "major" | "minor"
    proc: int
    pos: int = 0

    def label(self) -> str:
        return f"P{self.proc}" if self.kind == "major" else f"m{self.proc}_{self.pos}"


@dataclass(frozen=True)
class Transition:
    kind: str  # "relay" | "advance" | "joint"
    proc: int
    inputs: tuple
    outputs: tuple
    pos: int = 0

    def label(self) -> str:
        if self.kind == "advance":
            return f"adv{self.proc}_{self.pos}"
        return f"{self.kind}{self.proc}"


@dataclass(frozen=True)
class PetriNet:
    n: int
    C: int
    delays: tuple
    places: tuple
    transitions: tuple

    def index(self) -> dict:
        return {p: k for k, p in enumerate(self.places)}

    def count(self, kind: str) -> int:
        return sum(t.kind == kind for t in self.transitions)


@dataclass(frozen=True)
class Marking:
    tokens: tuple  # aligned with net.places
    round: int = 0


def compile(config: RingConfig) -> PetriNet:
    n, C = config.n, config.C
    delays = tuple(sorted(config.delay_set))
    places = [Place("major", i) for i in range(n)]
    for d in delays:
        places += [Place("minor", d, p) for p in range(C + 1)]
    idx = {p: k for k, p in enumerate(places)}
    ts = []
    for i in range(n):
        here, there = idx[Place("major", i)], idx[Place("major", (i + 1) % n)]
        if config.is_delay(i):
            ts.append(Transition("joint", i, (here, idx[Place("minor", i, 0)]),
                                 (there, idx[Place("minor", i, C)])))
        else:
            ts.append(Transition("relay", i, (here,), (there,)))
    for d in delays:
        for p in range(1, C + 1):
            ts.append(Transition("advance", d, (idx[Place("minor", d, p)],),
                                 (idx[Place("minor", d, p - 1)],), pos=p))
    return PetriNet(n, C, delays, tuple(places), tuple(ts))


# -- program state <-> marking correspondence ---------------------------------

def occupancy_downstream(state: GlobalState) -> tuple:
    """A queued token is in transit, so it counts at the successor place."""
    n = state.n
    return tuple(state.r[i] + state.q[i - 1] for i in range(n))


def occupancy_holder(state: GlobalState) -> tuple:
    return tuple(state.r[i] + state.q[i] for i in range(state.n))


def phase_identity(c: int, q: int, C: int) -> int:
    return c


def phase_shifted(c: int, q: int, C: int) -> int:
    return min(c + 1, C)


OCCUPANCY = {"downstream": occupancy_downstream, "holder": occupancy_holder}
PHASES = {"c": phase_identity, "c+1": phase_shifted}

# Frozen by calibrate(); see tests/test_petri.py::test_calibration_selects_frozen_map.
CALIBRATED = ("downstream", "c")


def initial_marking(config: RingConfig, state: GlobalState, net: Optional[PetriNet] = None,
                    convention: tuple = CALIBRATED, minor_offset: int = 0) -> Marking:
    """Marking for ``state``. ``minor_offset`` rotates every minor token (negative controls only)."""
    validate(config, state)
    net = net or compile(config)
    occ_fn, phase_fn = OCCUPANCY[convention[0]], PHASES[convention[1]]
    idx = net.index()
    tokens = [0] * len(net.places)
    for i, v in enumerate(occ_fn(state)):
        tokens[idx[Place("major", i)]] = v
    C = config.C
    for d in net.delays:
        pos = (phase_fn(state.c[d], state.q[d], C) + minor_offset) % (C + 1)
        tokens[idx[Place("minor", d, pos)]] = 1
    return Marking(tuple(tokens), state.round)


def major_occupancy(net: PetriNet, marking: Marking) -> tuple:
    return marking.tokens[:net.n]


def _check_minor(net: PetriNet, marking: Marking) -> None:
    base = net.n
    for k in range(len(net.delays)):
        ring = marking.tokens[base + k * (net.C + 1): base + (k + 1) * (net.C + 1)]
        if sum(ring) != 1:
            raise InvalidMarking(f"minor ring of p{net.delays[k]} holds {sum(ring)} tokens")


def fire_synchronous(net: PetriNet, marking: Marking) -> Marking:
    _check_minor(net, marking)
    old = marking.tokens
    new = list(old)
    for t in net.transitions:
        if all(old[p] > 0 for p in t.inputs):
            for p in t.inputs:
                new[p] -= 1
            for p in t.outputs:
                new[p] += 1
    return Marking(tuple(new), marking.round + 1)


def equivalent(config: RingConfig, state: GlobalState, rounds: int,
               convention: tuple = CALIBRATED, minor_offset: int = 0) -> tuple:
    """Lockstep program vs. net; ``(True, None)`` or ``(False, first divergent round)``."""
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    net = compile(config)
    occ_fn = OCCUPANCY[convention[0]]
    mk = initial_marking(config, state, net, convention, minor_offset)
    s = state
    for k in range(rounds + 1):
        if occ_fn(s) != major_occupancy(net, mk):
            return False, k
        if k == rounds:
            break
        s = _step(config.C, s)
        mk = fire_synchronous(net, mk)
    return True, None


def small_instances(max_n: int = 6, max_C: int = 2, max_tokens: int = 3) -> Iterator[tuple]:
    """Every (config, state) with n <= max_n, C <= max_C, 1..max_tokens tokens.

    Covers all delay sets, all r/q splits of the tokens, and all counter values.
    The feasibility bound is not required: the correspondence is structural.
    """
    for n in range(2, max_n + 1):
        for C in range(0, max_C + 1):
            for m in range(1, max_tokens + 1):
                slots = 2 * n
                for dsz in range(0, n + 1):
                    for D in itertools.combinations(range(n), dsz):
                        cfg = RingConfig(n, m, C, frozenset(D), unchecked=True)
                        for place in itertools.combinations_with_replacement(range(slots), m):
                            r = [0] * n
                            q = [0] * n
                            for s in place:
                                if s < n:
                                    r[s] += 1
                                else:
                                    q[s - n] += 1
                            for cs in itertools.product(range(C + 1), repeat=dsz):
                                c = [None] * n
                                for i, v in zip(D, cs):
                                    c[i] = v
                                yield cfg, GlobalState(tuple(r), tuple(q), tuple(c))


def calibrate(instances: Iterable[tuple], rounds: int = 50) -> list:
    """Return every (occupancy, phase) convention passing equivalence on all ``instances``."""
    insts = list(instances)
    passing = []
    for conv in itertools.product(OCCUPANCY, PHASES):
        if all(equivalent(cfg, s, rounds, conv)[0] for cfg, s in insts):
            passing.append(conv)
    return passing


# -- batched equivalence ------------------------------------------------------

def _incidence(net: PetriNet) -> tuple:
    """Per-transition input and output place index arrays (inputs padded by repetition)."""
    ins = np.array([(t.inputs + t.inputs)[:2] for t in net.transitions], dtype=np.intp)
    outs = np.array([(t.outputs + t.outputs)[:2] for t in net.transitions], dtype=np.intp)
    arity = np.array([len(t.inputs) for t in net.transitions])
    return ins.reshape(-1, 2), outs.reshape(-1, 2), arity


def fire_batch(net: PetriNet, markings: np.ndarray, _inc: Optional[tuple] = None) -> np.ndarray:
    """Maximal synchronous firing applied to every row of a ``(B, places)`` array."""
    ins, outs, arity = _inc or _incidence(net)
    m = markings.T  # place-major rows make the per-place updates contiguous
    enabled = (m[ins[:, 0]] > 0) & (m[ins[:, 1]] > 0)
    new = m.copy()
    for k in range(len(ins)):
        e = enabled[k]
        new[ins[k, 0]] -= e
        new[outs[k, 0]] += e
        if arity[k] == 2:
            new[ins[k, 1]] -= e
            new[outs[k, 1]] += e
    return new.T
def initial_markings(config: RingConfig, r: np.ndarray, q: np.ndarray, c: np.ndarray,
                     net: Optional[PetriNet] = None, convention: tuple = CALIBRATED,
                     minor_offset: int = 0) -> np.ndarray:
    """Vectorized :func:`initial_marking` for ``(B, n)`` arrays of program states."""
    net = net or compile(config)
    B, n = r.shape
    C = config.C
    out = np.zeros((B, len(net.places)), dtype=np.int64)
    out[:, :n] = r + np.roll(q, 1, axis=1) if convention[0] == "downstream" else r + q
    for k, d in enumerate(net.delays):
        phase = c[:, d] if convention[1] == "c" else np.minimum(c[:, d] + 1, C)
        pos = (phase + minor_offset) % (C + 1)
        out[np.arange(B), n + k * (C + 1) + pos] = 1
    return out


def equivalent_batch(config: RingConfig, r: np.ndarray, q: np.ndarray, c: np.ndarray,
                     rounds: int, convention: tuple = CALIBRATED, minor_offset: int = 0) -> np.ndarray:
    """Per-row verdict of :func:`equivalent` for a batch of states sharing one config."""
    from .harness import Batch, batch_step

    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    net = compile(config)
    inc = _incidence(net)
    n = config.n
    D = np.zeros((r.shape[0], n), dtype=bool)
    D[:, list(net.delays)] = True
    prog = Batch(r.astype(np.int64), q.astype(np.int64), np.where(D, c, 0).astype(np.int64),
                 D, config.C, 0)
    mk = initial_markings(config, prog.r, prog.q, prog.c, net, convention, minor_offset)
    downstream = convention[0] == "downstream"
    ok = np.ones(r.shape[0], dtype=bool)
    for k in range(rounds + 1):
        occ = prog.r + (np.roll(prog.q, 1, axis=1) if downstream else prog.q)
        ok &= (occ == mk[:, :n]).all(1)
        if k == rounds:
            break
        prog = batch_step(prog)
        mk = fire_batch(net, mk, inc)
    return ok


def small_instance_batches(max_n: int = 6, max_C: int = 2, max_tokens: int = 3) -> Iterator[tuple]:
    """The :func:`small_instances` population grouped as ``(config, r, q, c)`` array batches."""
    for n in range(2, max_n + 1):
        slots = 2 * n
        split = []
        for m in range(1, max_tokens + 1):
            for place in itertools.combinations_with_replacement(range(slots), m):
                v = np.bincount(np.array(place), minlength=slots)
                split.append(v)
        split = np.array(split, dtype=np.int64)
        R, Q = split[:, :n], split[:, n:]
        for C in range(0, max_C + 1):
            for dsz in range(0, n + 1):
                for D in itertools.combinations(range(n), dsz):
                    cfg = RingConfig(n, max_tokens, C, frozenset(D), unchecked=True)
                    combos = np.array(list(itertools.product(range(C + 1), repeat=dsz)),
                                      dtype=np.int64).reshape((C + 1) ** dsz, dsz)
                    cs = np.zeros((len(combos), n), dtype=np.int64)
                    cs[:, list(D)] = combos
                    nc = len(cs)
                    yield (cfg, np.repeat(R, nc, axis=0), np.repeat(Q, nc, axis=0),
                           np.tile(cs, (len(R), 1)))


def exhaustive_equivalence(max_n: int = 6, max_C: int = 2, max_tokens: int = 3, rounds: int = 50,
                           convention: tuple = CALIBRATED, minor_offset: int = 0) -> tuple:
    """``(instances checked, failing instances)`` over the whole small population."""
    total, failed = 0, []
    for cfg, r, q, c in small_instance_batches(max_n, max_C, max_tokens):
        ok = equivalent_batch(cfg, r, q, c, rounds, convention, minor_offset)
        total += len(ok)
        for row in np.flatnonzero(~ok)[:10]:
            failed.append((cfg, r[row].tolist(), q[row].tolist(), c[row].tolist()))
    return total, failed


def calibrate_exhaustive(max_n: int = 6, max_C: int = 2, max_tokens: int = 3, rounds: int = 50) -> list:
    """Batched :func:`calibrate` over the full small population."""
    passing = []
    for conv in itertools.product(OCCUPANCY, PHASES):
        if all(equivalent_batch(cfg, r, q, c, rounds, conv).all()
               for cfg, r, q, c in small_instance_batches(max_n, max_C, max_tokens)):
            passing.append(conv)
    return passing


# -- export -------------------------------------------------------------------

def to_dot(net: PetriNet) -> str:
    lines = ["digraph petri {", "  rankdir=LR;"]
    for p in net.places:
        lines.append(f'  {p.label()} [shape=circle, label="{p.label()}"];')
    for t in net.transitions:
        lines.append(f'  {t.label()} [shape=box, style=filled, fillcolor=black, '
                     f'width=0.1, height=0.4, label=""];')
    for t in net.transitions:
        for p in t.inputs:
            lines.append(f"  {net.places[p].label()} -> {t.label()};")
        for p in t.outputs:
            lines.append(f"  {t.label()} -> {net.places[p].label()};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def marking_to_json(net: PetriNet, marking: Marking) -> str:
    return json.dumps({"round": marking.round, "major": list(major_occupancy(net, marking)),
                       "minor": {str(d): marking.tokens[net.n + k * (net.C + 1):
                                                        net.n + (k + 1) * (net.C + 1)].index(1)
                                 for k, d in enumerate(net.delays)}},
                      separators=(",", ":"))
