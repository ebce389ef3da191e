"""Single-agent search strategies.

Each strategy comes two ways: a survival-matrix generator giving exact
not-yet-checked probabilities, and a seeded sampler that produces the actual
box-check sequence. Time is counted in queries: one box per unit of time.
The two-boxes-per-phase strategies (``universal`` and ``memory``) use phase
``j`` for query times ``2j - 1`` and ``2j``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._validation import InvalidArgumentError, check_k, check_positive_int
from .distributions import BoxPrior
from .strategy_engine import LSchedule, StrategyMatrix, build_L

KINDS = ("cord", "universal", "memory", "astar", "pareto", "uniform_replacement", "uniform")
EXHAUSTIVE = frozenset({"cord", "astar", "pareto", "uniform"})
NO_OP = 0

MAX_PHASES = 1 << 22
TAIL_REL = 1e-9


@dataclass(frozen=True)
class SearcherSpec:
    kind: str
    k: int
    b: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown strategy {self.kind!r}; choose from {KINDS}")
        object.__setattr__(self, "k", check_k(self.k))
        if self.kind == "pareto":
            if self.b is None or not (0 < self.b < 1):
                raise InvalidArgumentError("pareto searcher needs 0 < b < 1")

    @property
    def sigma(self) -> float:
        if self.kind != "pareto":
            raise AttributeError("sigma is defined for the pareto searcher only")
        return self.b / (self.b + self.k - 1)

    @property
    def coordinating(self) -> bool:
        return self.kind == "cord"


@dataclass
class CheckSequence:
    agent_id: int
    seed: int
    boxes: list = field(default_factory=list)  # one tuple per step
    trial: int = 0

    def flat(self) -> list:
        return [b for step in self.boxes for b in step]


# ---------------------------------------------------------------------------
# phase strategies: universal and memory


def _phase_factors(kind, k, n_phases):
    """Per-phase first-query and whole-phase survival factors for ``j = 1..n``."""
    j = np.arange(1, n_phases + 1, dtype=np.float64)
    if kind == "universal":
        n = (k - 1) * j + 2  # unchecked boxes in the window at phase j
        return 1.0 - 1.0 / n, 1.0 - 2.0 / n
    first = 1.0 - 1.0 / (k * j)
    return first, first * first


def _activation_phase(kind, k, x):
    width = k + 1 if kind == "universal" else k
    return -(-np.asarray(x, dtype=np.int64) // width)


def _tail_decay(kind, k, n_phases):
    """``(c0, e)`` with ``N(x, 2j)^k <= N(x, 2I)^k (c0 / j)^e`` for ``j > I``.

    Universal uses the product bound with ``(I + 1)`` for ``phi <= 1`` and
    ``(I + 2)`` for ``phi = 2``; memory uses ``(i / (i + 1/k))^2`` termwise.
    """
    if kind == "universal":
        phi = 2.0 / (k - 1)
        c0 = n_phases + (1 if phi <= 1 else 2)
        return c0, phi * k
    return n_phases + 1, 2.0


def _tail_factor(kind, k, n_phases):
    c0, e = _tail_decay(kind, k, n_phases)
    # 2 * (1 + sum_{j>I} (c0/j)^e), sum bounded by its integral from I
    return 2.0 * (1.0 + c0**e * n_phases ** (1.0 - e) / (e - 1.0))


def _phase_box_times(kind, x, k, n_phases):
    a, c = _phase_factors(kind, k, n_phases)
    G = np.concatenate(([0.0], np.cumsum(np.log(c))))  # G[j] = sum_{i<=j} log c_i
    kG = k * G
    # per phase j: N(2j-1)^k + N(2j)^k relative to the activation level
    terms = np.exp(kG[:-1]) * a**k + np.exp(kG[1:])
    suffix = np.concatenate((np.cumsum(terms[::-1])[::-1], [0.0]))
    s = _activation_phase(kind, k, x)
    if np.any(s > n_phases):
        raise InvalidArgumentError("horizon ends before every box becomes active")
    base = kG[s - 1]
    lower = (2 * s - 1) + suffix[s - 1] * np.exp(-base)
    at_horizon = np.exp(kG[n_phases] - base)
    tail = at_horizon * _tail_factor(kind, k, n_phases)
    return lower, tail


def phase_box_times(kind, x_max, k, n_phases=None):
    """Per-box expected times ``T(x)`` for ``x = 1..x_max`` as ``(lower, upper)``.

    The horizon doubles from ``64 * s_max`` phases until every box's tail
    bound is below ``1e-9`` of its time or ``MAX_PHASES`` is reached.
    Automatic horizons are computed for a power-of-two box range and cached.
    """
    if kind not in ("universal", "memory"):
        raise InvalidArgumentError(f"{kind!r} is not a two-per-phase strategy")
    k = check_k(k)
    x_max = check_positive_int(x_max, "x_max")
    if n_phases is None:
        x_cap = max(256, 1 << (x_max - 1).bit_length())
        lower, upper = _auto_phase_times(kind, k, x_cap)
        return lower[:x_max].copy(), upper[:x_max].copy()
    lower, tail = _phase_box_times(kind, np.arange(1, x_max + 1), k, n_phases)
    return lower, lower + tail


@functools.lru_cache(maxsize=32)
def _auto_phase_times(kind, k, x_max):
    x = np.arange(1, x_max + 1)
    s_max = int(_activation_phase(kind, k, x_max))
    n_phases = max(4096, 64 * s_max)
    while True:
        lower, tail = _phase_box_times(kind, x, k, n_phases)
        if np.all(tail <= TAIL_REL * lower) or n_phases >= MAX_PHASES:
            break
        n_phases = min(2 * n_phases, MAX_PHASES)
    upper = lower + tail
    lower.flags.writeable = False
    upper.flags.writeable = False
    return lower, upper


def _phase_matrix(kind, x_max, k, horizon):
    k = check_k(k)
    x_max = check_positive_int(x_max, "x_max")
    if horizon is None:
        s_max = int(_activation_phase(kind, k, x_max))
        # dense storage: keep the matrix near 4M entries
        horizon = 2 * max(s_max + 1, min(64 * s_max, 4_000_000 // (2 * x_max)))
    horizon = int(horizon)
    I = horizon // 2
    horizon = 2 * I
    a, c = _phase_factors(kind, k, I)
    s = _activation_phase(kind, k, np.arange(1, x_max + 1))
    if np.any(s > I):
        raise InvalidArgumentError("horizon ends before every box becomes active")
    G = np.concatenate(([0.0], np.cumsum(np.log(c))))
    surv = np.ones((x_max, horizon + 1))
    j = np.arange(1, I + 1)
    for row, sx in enumerate(s):
        live = j >= sx
        even = np.exp(G[j] - G[sx - 1])
        odd = np.exp(G[j - 1] - G[sx - 1]) * a
        surv[row, 2 * j[live]] = even[live]
        surv[row, 2 * j[live] - 1] = odd[live]
    tail = surv[:, -1] ** k * _tail_factor(kind, k, I)
    return StrategyMatrix(surv, tail, k=k, label=kind)


def matrix_universal(x_max, k, horizon=None) -> StrategyMatrix:
    """Survival of boxes ``1..x_max`` under two fresh picks per phase from ``{1..(k+1)j}``."""
    return _phase_matrix("universal", x_max, k, horizon)


def matrix_memory(x_max, k, horizon=None) -> StrategyMatrix:
    """Survival under two independent uniform picks per phase from ``{1..kj}``."""
    return _phase_matrix("memory", x_max, k, horizon)


# ---------------------------------------------------------------------------
# pareto


def pareto_sigma(b, k):
    return b / (b + k - 1)


def pareto_windows(b, k, M):
    """``W[t] = min(M, floor(t / sigma))`` for ``t = 0..M`` using exact rationals.

    ``b`` is read as the shortest decimal that round-trips its float, so
    ``b = 0.2`` gives ``1/sigma = 11`` exactly for ``k = 3``.
    """
    k = check_k(k)
    M = check_positive_int(M, "M")
    fb = Fraction(repr(float(b)))
    inv_sigma = (fb + (k - 1)) / fb
    num, den = inv_sigma.numerator, inv_sigma.denominator
    return np.array([min(M, (t * num) // den) for t in range(M + 1)], dtype=np.int64)


def _pareto_check_b(prior, b):
    if b is None:
        if prior.kind != "pareto":
            raise InvalidArgumentError("pareto searcher needs b (prior is not pareto)")
        b = prior.b
    if not (0 < b < 1):
        raise InvalidArgumentError(f"pareto searcher needs 0 < b < 1, got {b}")
    return b


def _pareto_logs(b, k, M):
    W = pareto_windows(b, k, M)
    t = np.arange(1, M + 1)
    remaining = W[1:] - (t - 1)  # unchecked boxes in the window at step t
    if np.any(remaining < 1):
        raise AssertionError("pareto window smaller than the number of checked boxes")
    first = np.searchsorted(W, np.arange(1, M + 1), side="left")  # t_x
    return W, remaining, first


def matrix_pareto(prior: BoxPrior, k, b=None) -> StrategyMatrix:
    """Exact survival of the window-growing uniform sampler on ``M`` boxes."""
    k = check_k(k)
    b = _pareto_check_b(prior, b)
    M = prior.M
    _, remaining, first = _pareto_logs(b, k, M)
    f = 1.0 - 1.0 / remaining  # f[t-1]; f[M-1] == 0
    surv = np.ones((M, M + 1))
    for row, tx in enumerate(first):
        prod = np.cumprod(f[tx - 1 :])
        surv[row, tx:] = prod
    surv[:, M] = 0.0
    return StrategyMatrix(surv, np.zeros(M), k=k, tail_exact=True, label="pareto")


def pareto_box_times(prior: BoxPrior, k, b=None) -> np.ndarray:
    """``T(pareto, x)`` for every box in ``O(M)`` via shared step factors."""
    k = check_k(k)
    b = _pareto_check_b(prior, b)
    M = prior.M
    if M == 1:
        return np.ones(1)
    _, remaining, first = _pareto_logs(b, k, M)
    logf = np.log1p(-1.0 / remaining[: M - 1])  # steps 1..M-1, all factors > 0
    F = np.concatenate(([0.0], np.cumsum(logf)))  # F[t] = sum_{i<=t} log f_i
    kF = k * F
    vals = np.exp(kF[1:])  # N^k at t = 1..M-1 relative to F[0]
    # sum_{t=tx}^{M-1} exp(k(F[t] - F[tx-1]))
    suffix = np.concatenate((np.cumsum(vals[::-1])[::-1], [0.0]))
    return first + suffix[first - 1] * np.exp(-kF[first - 1])


# ---------------------------------------------------------------------------
# uniform baselines and the optimal schedule


def matrix_uniform(M, horizon=None) -> StrategyMatrix:
    """Uniform choice among unchecked boxes of ``1..M``: ``N(x, t) = (M - t) / M``."""
    M = check_positive_int(M, "M")
    t = np.arange(M + 1)
    surv = np.tile((M - t) / M, (M, 1))
    return StrategyMatrix(surv, np.zeros(M), tail_exact=True, label="uniform")


def matrix_uniform_replacement(M, k, horizon=None) -> StrategyMatrix:
    """Memoryless uniform choice over ``1..M``; the geometric tail is exact."""
    M = check_positive_int(M, "M")
    k = check_k(k)
    r = 1.0 - 1.0 / M
    if horizon is None:
        horizon = 8 * M
    t = np.arange(horizon + 1)
    surv = np.tile(r**t, (M, 1))
    rk = r**k
    tail = np.full(M, 0.0 if M == 1 else rk ** (horizon + 1) / (1.0 - rk))
    return StrategyMatrix(surv, tail, k=k, tail_exact=True, label="uniform_replacement")


def matrix_astar(prior: BoxPrior, k) -> StrategyMatrix:
    return build_L(prior, k).L


# ---------------------------------------------------------------------------
# samplers


def sample_cord(agent_id, t, k):
    k = check_k(k)
    if not (1 <= agent_id <= k):
        raise InvalidArgumentError(f"agent_id must be in 1..{k}, got {agent_id}")
    return (t - 1) * k + agent_id


class AgentState:
    """Mutable per-agent state for :func:`sample_step`.

    ``pool`` holds unchecked boxes that are currently eligible, in the order
    produced by swap-removal; ``window`` is how many boxes have been added.
    """

    def __init__(self, spec: SearcherSpec, agent_id=1, prior: BoxPrior | None = None,
                 schedule: LSchedule | None = None):
        self.spec = spec
        self.agent_id = agent_id
        self.pool: list[int] = []
        self.window = 0
        self.t = 0
        self.no_ops = 0
        self.M = prior.M if prior is not None else None
        self.schedule = schedule
        self.windows = None
        if spec.kind == "astar" and schedule is None:
            if prior is None:
                raise InvalidArgumentError("astar needs a prior or a precomputed schedule")
            self.schedule = build_L(prior, spec.k)
        if spec.kind == "pareto":
            self.windows = pareto_windows(spec.b, spec.k, self.M)
        if spec.kind in ("uniform", "uniform_replacement", "pareto") and self.M is None:
            raise InvalidArgumentError(f"{spec.kind} needs a prior")

    def _grow(self, upto):
        if upto > self.window:
            self.pool.extend(range(self.window + 1, upto + 1))
            self.window = upto

    def _take(self, u):
        n = len(self.pool)
        idx = min(int(u * n), n - 1)
        box = self.pool[idx]
        self.pool[idx] = self.pool[-1]
        self.pool.pop()
        return box


def _step_astar(state: AgentState, t, u):
    sch = state.schedule
    S = len(sch.alpha) - 1
    if t > S:
        state.no_ops += 1
        return NO_OP
    w_old, w_new = sch.check_probabilities(t)
    total = len(state.pool) * w_old + math.fsum(w_new)
    if not (1 - 1e-9 <= total <= 1 + 1e-9):
        raise AssertionError(f"check probabilities at t={t} sum to {total!r}")
    p_pool = len(state.pool) * w_old
    lo = int(sch.active[t - 1])
    newly = range(lo + 1, int(sch.active[t]) + 1)
    if u < p_pool:
        n = len(state.pool)
        idx = min(int(u / w_old), n - 1)
        box = state.pool[idx]
        state.pool[idx] = state.pool[-1]
        state.pool.pop()
        state.pool.extend(newly)
        return box
    r = u - p_pool
    chosen = -1
    cum = 0.0
    for i, x in enumerate(newly):
        cum += w_new[i]
        if r < cum:
            chosen = x
            break
    if chosen < 0:
        # drift guard: u landed past the last cumulative weight
        positive = [x for i, x in enumerate(newly) if w_new[i] > 0]
        if positive:
            chosen = positive[-1]
        elif state.pool:
            chosen = state.pool.pop()
    state.pool.extend(x for x in newly if x != chosen)
    if chosen < 0:
        state.no_ops += 1
        return NO_OP
    return chosen


def _step_query(state: AgentState, t, rng):
    """One query at time ``t`` (1-based); returns the checked box or ``NO_OP``."""
    spec = state.spec
    kind = spec.kind
    if kind == "cord":
        return sample_cord(state.agent_id, t, spec.k)
    u = rng.random()
    if kind == "universal":
        j = (t + 1) // 2
        if t % 2 == 1:
            state._grow((spec.k + 1) * j)
        if not state.pool:
            state.no_ops += 1
            return NO_OP
        return state._take(u)
    if kind == "memory":
        j = (t + 1) // 2
        return min(int(u * spec.k * j), spec.k * j - 1) + 1
    if kind == "uniform_replacement":
        return min(int(u * state.M), state.M - 1) + 1
    if kind in ("pareto", "uniform"):
        upto = state.M if kind == "uniform" else int(state.windows[min(t, state.M)])
        state._grow(upto)
        if not state.pool:
            state.no_ops += 1
            return NO_OP
        return state._take(u)
    return _step_astar(state, t, u)


def sample_step(spec: SearcherSpec, state: AgentState, t, rng):
    """Advance ``state`` through step ``t`` and return the boxes checked.

    A step is one query for most strategies and one two-query phase for
    ``universal`` and ``memory``; the return value is always a tuple.
    """
    if t != state.t + 1:
        raise InvalidArgumentError(f"state has completed {state.t} steps; cannot run step {t}")
    state.t = t
    if spec.kind in ("universal", "memory"):
        return (_step_query(state, 2 * t - 1, rng), _step_query(state, 2 * t, rng))
    return (_step_query(state, t, rng),)


def trace(spec: SearcherSpec, prior: BoxPrior, steps, seed=0, agent_id=1, trial=0):
    """Record ``steps`` steps of one agent's checks as a :class:`CheckSequence`."""
    from .rng import CounterRNG

    state = AgentState(spec, agent_id, prior)
    rng = CounterRNG(seed, trial, agent_id)
    seq = CheckSequence(agent_id=agent_id, seed=seed, trial=trial)
    for t in range(1, steps + 1):
        seq.boxes.append(sample_step(spec, state, t, rng))
    return seq
