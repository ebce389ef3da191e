"""Monte Carlo runs of ``k`` independent searchers against a random treasure.

Time is counted in lockstep rounds: at time ``t`` every live agent performs
its ``t``-th query. A crashed agent performs no query at or after its crash
time. Trial ``i`` always uses the same random streams, so results do not
depend on how many worker threads run the trials.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from . import _kernels
from ._validation import InvalidArgumentError, RunawayError, check_k, check_positive_int
from .distributions import BoxPrior
from .searchers import EXHAUSTIVE, SearcherSpec, pareto_windows
from .strategy_engine import build_L

log = logging.getLogger(__name__)

if "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
    # probe OpenMP before TBB; an old TBB only produces a noisy warning
    nb.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

CENSORED = -1
NEVER = np.iinfo(np.int64).max // 4
BATCH = 1 << 18


@dataclass
class SimConfig:
    prior: BoxPrior
    k: int
    strategy: str
    trials: int = 10_000
    seed: int = 0
    crash_schedule: tuple = ()
    configured_k: int | None = None
    b: float | None = None
    threads: int | None = None

    def __post_init__(self):
        self.k = check_k(self.k, minimum=1)
        self.trials = check_positive_int(self.trials, "trials")
        if self.configured_k is None:
            self.configured_k = self.k
        self.configured_k = check_k(self.configured_k)
        self.crash_schedule = tuple((int(a), int(t)) for a, t in self.crash_schedule)
        agents = [a for a, _ in self.crash_schedule]
        if len(set(agents)) != len(agents):
            raise InvalidArgumentError("crashed agents must be unique")
        for a, t in self.crash_schedule:
            if not (1 <= a <= self.k):
                raise InvalidArgumentError(f"crashed agent {a} not in 1..{self.k}")
            if t < 1:
                raise InvalidArgumentError("crash times must be >= 1")
        if self.strategy == "cord" and self.k > self.configured_k:
            raise InvalidArgumentError(
                f"the coordinated sweep assigns boxes to agents 1..{self.configured_k} only"
            )
        if self.strategy == "pareto" and self.b is None:
            self.b = self.prior.b
        self.spec = SearcherSpec(self.strategy, self.configured_k, self.b)

    @property
    def f(self) -> int:
        return len(self.crash_schedule)

    def resolved(self) -> dict:
        """Everything that determines the output; ``threads`` is deliberately absent."""
        out = {
            "strategy": self.strategy,
            "k": self.k,
            "configured_k": self.configured_k,
            "trials": self.trials,
            "seed": self.seed,
            "crash_schedule": [list(c) for c in self.crash_schedule],
            "prior": {"kind": self.prior.kind, "M": self.prior.M},
        }
        if self.prior.b is not None:
            out["prior"]["b"] = self.prior.b
        if self.b is not None:
            out["b"] = self.b
        return out


@dataclass
class SimOutcome:
    discovery_times: np.ndarray
    treasure_boxes: np.ndarray
    no_op_count: int = 0
    censored: int = 0
    config: dict = field(default_factory=dict)

    @property
    def found(self) -> np.ndarray:
        return self.discovery_times[self.discovery_times != CENSORED]

    @property
    def mean(self) -> float:
        d = self.found
        return float(np.mean(d)) if d.size else math.nan

    @property
    def stderr(self) -> float:
        d = self.found
        if d.size < 2:
            return math.nan
        return float(np.std(d, ddof=1) / math.sqrt(d.size))


def _strategy_arrays(config: SimConfig):
    prior, spec = config.prior, config.spec
    dummy_f = np.zeros(1)
    dummy_i = np.zeros(1, np.int64)
    alpha, active, q, windows = dummy_f, dummy_i, dummy_f, dummy_i
    if spec.kind == "astar":
        sch = build_L(prior, spec.k)
        alpha, active, q = sch.alpha, sch.active, sch.q
    elif spec.kind == "pareto":
        windows = pareto_windows(spec.b, spec.k, prior.M)
    return alpha, active, q, windows


def step_cap(kind, M) -> int:
    if kind in EXHAUSTIVE:
        return 10 * M
    # heavy-tailed but finite; reaching this is astronomically unlikely
    return 100_000 * M + 10_000_000


def run(config: SimConfig) -> SimOutcome:
    prior, spec = config.prior, config.spec
    if config.threads:
        nb.set_num_threads(min(int(config.threads), nb.config.NUMBA_NUM_THREADS))
    crash = np.full(config.k, NEVER, np.int64)
    for a, t in config.crash_schedule:
        crash[a - 1] = t
    alpha, active, q, windows = _strategy_arrays(config)
    cap = step_cap(spec.kind, prior.M)
    cdf = prior.cdf()
    parts = []
    for start in range(0, config.trials, BATCH):
        n = min(BATCH, config.trials - start)
        parts.append(
            _kernels.simulate_trials(
                _kernels.KIND_CODES[spec.kind], spec.k, config.k, crash, n, start,
                config.seed, cdf, prior.M, alpha, active, q, windows, cap,
            )
        )
    times = np.concatenate([p[0] for p in parts])
    treasure = np.concatenate([p[1] for p in parts])
    no_ops = int(sum(int(p[2].sum()) for p in parts))
    hit_cap = int(sum(int(p[3].sum()) for p in parts))
    censored = int(np.count_nonzero(times == CENSORED))
    if hit_cap and spec.kind in EXHAUSTIVE and not config.crash_schedule:
        raise RunawayError(f"{spec.kind} did not find the treasure within {cap} steps")
    if censored:
        log.warning("%d of %d trials never found the treasure; excluded from the mean",
                    censored, config.trials)
    return SimOutcome(times, treasure, no_ops, censored, config.resolved())


@dataclass
class FaultComparison:
    faulty: SimOutcome
    clean: SimOutcome

    @property
    def pooled_stderr(self) -> float:
        return math.hypot(self.faulty.stderr, self.clean.stderr)

    @property
    def holds(self) -> bool:
        return self.faulty.mean <= self.clean.mean + 4 * self.pooled_stderr


def run_with_faults(config: SimConfig) -> FaultComparison:
    """Run ``config`` (with crashes) beside a clean ``k - f`` agent run on the same seeds."""
    f = config.f
    if f >= config.k:
        raise InvalidArgumentError(f"f={f} crashes leave no live agent out of k={config.k}")
    clean_cfg = SimConfig(
        prior=config.prior, k=config.k - f, strategy=config.strategy,
        trials=config.trials, seed=config.seed, configured_k=config.configured_k,
        b=config.b, threads=config.threads,
    )
    return FaultComparison(run(config), run(clean_cfg))


def empirical_survival(config: SimConfig, x_max, t_max, agent_id=1) -> np.ndarray:
    """Fraction of trials in which the tagged agent has not checked ``x`` by ``t``.

    Returns an ``(x_max, t_max + 1)`` array indexed like a survival matrix.
    """
    spec = config.spec
    if spec.kind == "cord" and not (1 <= agent_id <= spec.k):
        raise InvalidArgumentError(f"agent_id must be in 1..{spec.k}")
    if config.threads:
        nb.set_num_threads(min(int(config.threads), nb.config.NUMBA_NUM_THREADS))
    alpha, active, q, windows = _strategy_arrays(config)
    first = _kernels.first_check_times(
        _kernels.KIND_CODES[spec.kind], spec.k, agent_id, config.trials, config.seed,
        config.prior.M, alpha, active, q, windows, int(t_max), int(x_max),
    )
    out = np.empty((x_max, t_max + 1))
    for x in range(x_max):
        col = first[:, x]
        counts = np.bincount(col, minlength=t_max + 1)  # counts[0]: never checked
        checked_by = np.cumsum(counts[1:])
        out[x, 0] = 1.0
        out[x, 1:] = 1.0 - checked_by / config.trials
    return out
