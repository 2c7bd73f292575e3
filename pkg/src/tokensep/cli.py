"""Command-line front end.

Exit codes: 0 success (``check``: legitimate, ``petri``: equivalent),
1 negative verdict (not legitimate, not equivalent, adaptive timeouts,
chain never settled), 2 usage or input error, 3 infeasible configuration.
Data goes to standard output or ``--out``; logs go to standard error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import random
import sys
from typing import Optional, Sequence

import numpy as np

from . import adaptive, harness, legitimacy, petri, protocol
from .ring_model import (
    InfeasibleConfig,
    RingConfig,
    RingError,
    state_from_json,
    state_to_json,
    tokdist,
)

log = logging.getLogger("tokensep")

EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


# -- argument helpers ---------------------------------------------------------

def _int_list(text: str) -> list:
    try:
        return [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _values(text: str) -> list:
    """``1,5,10`` or an inclusive range ``lo:hi[:step]``."""
    if ":" in text:
        parts = [int(x) for x in text.split(":")]
        if len(parts) not in (2, 3):
            raise argparse.ArgumentTypeError(f"bad range {text!r}")
        step = parts[2] if len(parts) == 3 else 1
        return list(range(parts[0], parts[1] + 1, step))
    return _int_list(text)


def _delay_spec(text: str):
    """Either explicit indices ``0,3`` or ``random:K`` for K random processes."""
    if text.startswith("random:"):
        try:
            return int(text.split(":", 1)[1])
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad delay count in {text!r}")
    return frozenset(_int_list(text))


def _resolve_delay(spec, n: int, rng: np.random.Generator) -> frozenset:
    if spec is None:
        return frozenset({0})
    if isinstance(spec, int):
        if not 0 <= spec <= n:
            raise UsageError(f"delay count {spec} outside [0, {n}]")
        return harness.random_delay_set(n, spec, rng)
    return spec


def _ring(args, rng: np.random.Generator) -> tuple:
    """``(config, state)`` from ``--state-file`` or from flags plus a seeded random state."""
    if getattr(args, "state_file", None):
        with open(args.state_file) as fh:
            cfg, st = state_from_json(fh.read(), unchecked=True)
        if not args.unchecked and not cfg.feasible:
            raise InfeasibleConfig(f"m*(C+1) = {cfg.m * (cfg.C + 1)} exceeds n = {cfg.n}")
        return RingConfig(cfg.n, cfg.m, cfg.C, cfg.delay_set, args.seed, args.unchecked), st
    if args.d < 1:
        raise UsageError("--d must be >= 1")
    D = _resolve_delay(args.delay, args.n, rng)
    cfg = RingConfig(args.n, args.m, args.d - 1, D, args.seed, args.unchecked)
    return cfg, harness.random_state(cfg, rng)


def _add_common(p: argparse.ArgumentParser, ring: bool = True) -> None:
    p.add_argument("--n", type=int, default=10, help="ring size")
    p.add_argument("--m", type=int, default=1, help="token count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write data here instead of standard output")
    p.add_argument("--unchecked", action="store_true", help="allow m*d > n")
    if ring:
        p.add_argument("--d", type=int, default=1, help="separation; C = d - 1")
        p.add_argument("--delay", type=_delay_spec, default=None,
                       help="delay process indices (0,3,5) or random:K (default: 0)")
        p.add_argument("--state-file", help="initial state as JSON")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tokensep", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("simulate", help="run the protocol and report convergence diagnostics")
    _add_common(p)
    p.add_argument("--rounds", type=int, default=None, help="default: n**2")
    p.add_argument("--track-tokens", action="store_true", help="enable warmup/variant diagnostics")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--trace", help="also write every state as JSON lines to this file")

    p = sub.add_parser("check", help="legitimacy verdict for a state file")
    _add_common(p)

    p = sub.add_parser("sweep", help="Monte Carlo convergence sweep, CSV out")
    _add_common(p, ring=False)
    p.add_argument("--d", type=int, default=None, help="separation (ring_size axis default n//3)")
    p.add_argument("--axis", choices=("delay_count", "ring_size"), default="delay_count")
    p.add_argument("--values", type=_values, default=None,
                   help="axis values: 1,5,10 or lo:hi[:step] (delay_count default 1:n)")
    p.add_argument("--delay-count", type=int, default=None, help="fixed count on the ring_size axis")
    p.add_argument("--trials", type=int, default=300)
    p.add_argument("--max-rounds", type=int, default=None, help="default: n**3")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--counters", choices=("uniform", "zero"), default="uniform")
    p.add_argument("--target", choices=tuple(harness.TARGETS), default="legitimate")
    p.add_argument("--gnuplot", help="also write a two-column axis/mean file here")

    p = sub.add_parser("adaptive", help="stabilization of the ring-size-learning variant")
    _add_common(p, ring=False)
    p.add_argument("--max-rounds", type=int, default=None, help="default: n**3")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--hold", type=int, default=None, help="rounds the result must persist (default 5n)")

    p = sub.add_parser("petri", help="compile the Petri net and check lockstep equivalence")
    _add_common(p)
    p.add_argument("--rounds", type=int, default=50)
    p.add_argument("--dot", help="write the net in Graphviz DOT format here")

    p = sub.add_parser("chain", help="open-chain throttling with an injection script")
    p.add_argument("--script", required=True, help="injection file: JSON list or one integer per line")
    p.add_argument("--length", type=int, default=20)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--rounds", type=int, default=None, help="default: script length + 10*length*d")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out")
    return ap


# -- subcommands --------------------------------------------------------------

def _emit(args, text: str) -> None:
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_simulate(args) -> int:
    rng = np.random.default_rng(args.seed)
    cfg, st = _ring(args, rng)
    rounds = cfg.n ** 2 if args.rounds is None else args.rounds
    trace = protocol.run(cfg, st, rounds, track_tokens=args.track_tokens)
    if args.trace:
        with open(args.trace, "w") as fh:
            fh.writelines(line + "\n" for line in trace.to_jsonl())
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("round", "legitimate", "tokdist", "r", "q", "c"))
        for s in trace.states:
            w.writerow((s.round, int(legitimacy.is_legitimate(cfg, s)),
                        tokdist(s) if cfg.m else "",
                        " ".join(map(str, s.r)), " ".join(map(str, s.q)),
                        " ".join("-" if v is None else str(v) for v in s.c)))
        _emit(args, buf.getvalue())
        return EXIT_OK
    conv = legitimacy.converged_at(cfg, trace)
    summary = {
        "n": cfg.n, "m": cfg.m, "d": cfg.d, "delay": sorted(cfg.delay_set), "seed": cfg.seed,
        "rounds": rounds, "converged_at": conv,
        "final_legitimate": legitimacy.is_legitimate(cfg, trace.states[-1]),
    }
    if conv is not None and len(trace.states) - conv > 1:
        summary["desiderata"] = legitimacy.check_desiderata(cfg, trace, conv)
    if args.track_tokens:
        rep = legitimacy.diagnostics(cfg, trace).to_dict()
        rep.pop("desiderata", None)
        F = rep.pop("F_values")
        rep["F_first"], rep["F_last"] = (F[0], F[-1]) if F else (None, None)
        summary["diagnostics"] = rep
    _emit(args, json.dumps(summary, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_check(args) -> int:
    if not args.state_file:
        raise UsageError("check needs --state-file")
    cfg, st = _ring(args, np.random.default_rng(args.seed))
    rep = legitimacy.check(cfg, st)
    _emit(args, json.dumps(rep.to_dict(), sort_keys=True) + "\n")
    return EXIT_OK if rep.legitimate else EXIT_NEGATIVE


def cmd_sweep(args) -> int:
    if args.axis == "delay_count":
        if args.d is None:
            raise UsageError("the delay_count axis needs --d")
        if args.m * args.d > args.n and not args.unchecked:
            raise InfeasibleConfig(f"m*d = {args.m * args.d} exceeds n = {args.n}")
        values = args.values or list(range(1, args.n + 1))
    else:
        if not args.values:
            raise UsageError("the ring_size axis needs --values")
        values = args.values
    spec = harness.ExperimentSpec(
        n=args.n, m=args.m, d=args.d, delay_count=args.delay_count, trials=args.trials,
        max_rounds=args.max_rounds, axis=args.axis, values=values, master_seed=args.seed,
        counters=args.counters, target=args.target,
    )
    res = harness.sweep(spec, workers=args.workers)
    _emit(args, res.to_csv())
    if args.gnuplot:
        with open(args.gnuplot, "w") as fh:
            fh.write(res.to_gnuplot())
    return EXIT_OK


def cmd_adaptive(args) -> int:
    if not 1 <= args.m <= args.n:
        raise InfeasibleConfig(f"adaptive runs need 1 <= m <= n, got m={args.m}, n={args.n}")
    max_rounds = args.max_rounds or args.n ** 3
    hold = 5 * args.n if args.hold is None else args.hold
    cfg = adaptive.adaptive_config(args.n, args.m, seed=args.seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("trial", "seed", "round", "clock_base", "target", "timeout"))
    target = adaptive.target_clock_base(args.n, args.m)
    failures = 0
    for t in range(args.trials):
        seed = harness.child_seed(args.seed, t)
        st = adaptive.random_adaptive_state(cfg, random.Random(seed))
        try:
            at, cb = adaptive.run_until_stable(cfg, st, max_rounds, hold=hold)
            w.writerow((t, seed, at, cb, target, 0))
        except adaptive.Timeout:
            failures += 1
            w.writerow((t, seed, "", "", target, 1))
    _emit(args, buf.getvalue())
    if failures:
        log.warning("%d of %d trials did not stabilize within %d rounds", failures, args.trials, max_rounds)
    return EXIT_NEGATIVE if failures else EXIT_OK


def cmd_petri(args) -> int:
    cfg, st = _ring(args, np.random.default_rng(args.seed))
    net = petri.compile(cfg)
    if args.dot:
        with open(args.dot, "w") as fh:
            fh.write(petri.to_dot(net))
    ok, where = petri.equivalent(cfg, st, args.rounds)
    out = {"equivalent": ok, "first_divergence": where, "rounds": args.rounds,
           "places": len(net.places), "transitions": len(net.transitions),
           "initial_state": json.loads(state_to_json(cfg, st))}
    _emit(args, json.dumps(out, sort_keys=True) + "\n")
    return EXIT_OK if ok else EXIT_NEGATIVE


def cmd_chain(args) -> int:
    if args.d < 1 or args.length < 2:
        raise UsageError("chain needs --d >= 1 and --length >= 2")
    script = protocol.load_injection_script(args.script)
    C = args.d - 1
    rounds = args.rounds if args.rounds is not None else len(script) + 10 * args.length * args.d
    states = protocol.run_chain(protocol.ChainState.empty(args.length),
                                protocol.scripted_injections(script), C, rounds)
    settled = protocol.chain_settled_round(states, C)
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("round", "pending", "positions", "min_gap"))
        for s in states:
            gaps = protocol.chain_gaps(s)
            w.writerow((s.round, s.pending, " ".join(map(str, s.positions())),
                        min(gaps) if gaps else ""))
        _emit(args, buf.getvalue())
    else:
        emitted = sum(s.q[-1] for s in states[:-1])
        _emit(args, json.dumps({"rounds": rounds, "injected": sum(script[:rounds]),
                                "exited": emitted, "settled_round": settled,
                                "final_pending": states[-1].pending}, sort_keys=True) + "\n")
    return EXIT_OK if settled is not None else EXIT_NEGATIVE


COMMANDS = {"simulate": cmd_simulate, "check": cmd_check, "sweep": cmd_sweep,
            "adaptive": cmd_adaptive, "petri": cmd_petri, "chain": cmd_chain}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.cmd](args)
    except InfeasibleConfig as e:
        log.error("infeasible configuration: %s", e)
        return EXIT_INFEASIBLE
    except (UsageError, RingError, OSError, ValueError, KeyError) as e:
        log.error("%s", e)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
