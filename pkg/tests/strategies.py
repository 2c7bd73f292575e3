"""Hypothesis strategies for ring configurations and arbitrary states."""

from hypothesis import strategies as st

from tokensep import GlobalState, RingConfig


@st.composite
def configs(draw, max_n=12, min_m=0, max_m=4, nonempty_delay=False, feasible=True):
    n = draw(st.integers(2, max_n))
    m = draw(st.integers(min_m, max_m))
    if feasible:
        m = min(m, n)
        top = n // m - 1 if m else n
        C = draw(st.integers(0, max(0, top)))
    else:
        C = draw(st.integers(0, n))
    delays = draw(st.frozensets(st.integers(0, n - 1), min_size=1 if nonempty_delay else 0))
    return RingConfig(n, m, C, delays, unchecked=not feasible)


@st.composite
def states_for(draw, config):
    n = config.n
    r, q = [0] * n, [0] * n
    for _ in range(config.m):
        i = draw(st.integers(0, n - 1))
        if draw(st.booleans()):
            r[i] += 1
        else:
            q[i] += 1
    c = [draw(st.integers(0, config.C)) if config.is_delay(i) else None for i in range(n)]
    return GlobalState(tuple(r), tuple(q), tuple(c))


@st.composite
def instances(draw, **kw):
    cfg = draw(configs(**kw))
    return cfg, draw(states_for(cfg))
