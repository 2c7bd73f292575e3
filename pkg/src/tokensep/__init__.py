"""Self-stabilizing circulation of separated tokens on a synchronous ring."""

from .ring_model import (
    GlobalState,
    InfeasibleConfig,
    NoTokens,
    NotATokenHolder,
    ProcessState,
    RingConfig,
    RingError,
    StateMismatch,
    gap,
    ldist,
    rdist,
    token_count,
    tokdist,
)
from .protocol import ChainState, Trace, run, step_chain, step_round
from .legitimacy import check, check_desiderata, converged_at, diagnostics

__all__ = [
    "GlobalState", "InfeasibleConfig", "NoTokens", "NotATokenHolder", "ProcessState",
    "RingConfig", "RingError", "StateMismatch", "gap", "ldist", "rdist", "token_count",
    "tokdist", "ChainState", "Trace", "run", "step_chain", "step_round", "check",
    "check_desiderata", "converged_at", "diagnostics",
]
