"""Estimator-style wrapper: fit a strategy to a prior, then query its costs.

``BoxSearcher(strategy, k).fit(prior)`` computes the exact per-box expected
discovery times of ``k`` agents running ``strategy``; ``predict`` looks them
up for given boxes and ``simulate`` runs the Monte Carlo twin.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted, column_or_1d

from ._validation import InvalidArgumentError, check_k, check_prior
from .distributions import BoxPrior
from .montecarlo import SimConfig, SimOutcome, run
from .searchers import (
    KINDS,
    SearcherSpec,
    matrix_astar,
    matrix_memory,
    matrix_pareto,
    matrix_uniform,
    matrix_uniform_replacement,
    matrix_universal,
    pareto_box_times,
    phase_box_times,
    trace,
)
from .strategy_engine import StrategyMatrix, build_L, cord_time


def _matrix_box_times(N: StrategyMatrix, k, M):
    rows = N.survival[:M] ** k
    lower = np.array([math.fsum(r) for r in rows])
    upper = lower + N.box_tail[:M]
    return (upper, upper.copy()) if N.tail_exact else (lower, upper)


def box_times(spec: SearcherSpec, prior: BoxPrior):
    """Bracket ``(lower, upper)`` on ``E[discovery time | treasure at x]`` per box.

    Only ``universal`` and ``memory`` have a gap between the two: their
    infinite tails are bounded rather than summed.
    """
    k, M = spec.k, prior.M
    kind = spec.kind
    if kind == "cord":
        t = (-(-np.arange(1, M + 1) // k)).astype(np.float64)
        return t, t.copy()
    if kind in ("universal", "memory"):
        return phase_box_times(kind, M, k)
    if kind == "pareto":
        t = pareto_box_times(prior, k, spec.b)
        return t, t.copy()
    if kind == "astar":
        N = matrix_astar(prior, k)
    elif kind == "uniform":
        N = matrix_uniform(M)
    else:
        N = matrix_uniform_replacement(M, k)
    return _matrix_box_times(N, k, M)


def exact_time(spec: SearcherSpec, prior: BoxPrior) -> tuple[float, float]:
    """``(lower, upper)`` on the expected discovery time under ``prior``."""
    lower, upper = box_times(spec, prior)
    p = prior.masses
    return math.fsum(p * lower), math.fsum(p * upper)


class BoxSearcher(BaseEstimator):
    """``k`` non-communicating agents running one strategy against a prior.

    Parameters
    ----------
    strategy : one of ``cord, universal, memory, astar, pareto,
        uniform_replacement, uniform``
    k : number of agents the strategy is configured for
    b : Pareto exponent for ``strategy="pareto"``; defaults to the prior's

    Fitted attributes: ``prior_``, ``spec_``, ``schedule_`` (astar only),
    ``box_times_`` (lower, upper), ``expected_time_`` (lower, upper),
    ``cord_time_`` and ``ratio_to_cord_``.
    """

    def __init__(self, strategy="astar", k=2, b=None):
        self.strategy = strategy
        self.k = k
        self.b = b

    def fit(self, X, y=None):
        """``X`` is a :class:`BoxPrior` or a non-increasing mass vector."""
        if self.strategy not in KINDS:
            raise InvalidArgumentError(f"unknown strategy {self.strategy!r}; choose from {KINDS}")
        prior = check_prior(X)
        k = check_k(self.k)
        b = self.b
        if self.strategy == "pareto" and b is None:
            b = prior.b
        self.prior_ = prior
        self.spec_ = SearcherSpec(self.strategy, k, b)
        self.schedule_ = build_L(prior, k) if self.strategy == "astar" else None
        self.box_times_ = box_times(self.spec_, prior)
        p = prior.masses
        self.expected_time_ = (math.fsum(p * self.box_times_[0]), math.fsum(p * self.box_times_[1]))
        self.cord_time_ = cord_time(prior, k)
        self.ratio_to_cord_ = 0.5 * sum(self.expected_time_) / self.cord_time_
        return self

    def _boxes(self, X):
        check_is_fitted(self, "box_times_")
        boxes = column_or_1d(np.asarray(X)).astype(np.int64)
        if np.any((boxes < 1) | (boxes > self.prior_.M)):
            raise InvalidArgumentError(f"boxes must lie in 1..{self.prior_.M}")
        return boxes - 1

    def transform(self, X):
        """``(n, 2)`` array of lower and upper expected times for boxes ``X``."""
        idx = self._boxes(X)
        lower, upper = self.box_times_
        return np.column_stack((lower[idx], upper[idx]))

    def predict(self, X):
        """Expected discovery time given the treasure is in each box of ``X``."""
        return self.transform(X).mean(axis=1)

    def survival_matrix(self, horizon=None) -> StrategyMatrix:
        check_is_fitted(self, "spec_")
        kind, k, M = self.spec_.kind, self.spec_.k, self.prior_.M
        if kind == "astar":
            return self.schedule_.L
        if kind == "universal":
            return matrix_universal(M, k, horizon)
        if kind == "memory":
            return matrix_memory(M, k, horizon)
        if kind == "pareto":
            return matrix_pareto(self.prior_, k, self.spec_.b)
        if kind == "uniform":
            return matrix_uniform(M)
        if kind == "uniform_replacement":
            return matrix_uniform_replacement(M, k, horizon)
        raise InvalidArgumentError("the coordinated sweep has no single-agent survival matrix")

    def simulate(self, trials=10_000, seed=0, crash_schedule=(), n_agents=None,
                 threads=None) -> SimOutcome:
        """Monte Carlo run; ``n_agents`` live agents (default ``k``) use the ``k``-agent strategy."""
        check_is_fitted(self, "spec_")
        config = SimConfig(
            prior=self.prior_, k=self.spec_.k if n_agents is None else n_agents,
            strategy=self.spec_.kind, trials=trials, seed=seed, crash_schedule=crash_schedule,
            configured_k=self.spec_.k, b=self.spec_.b, threads=threads,
        )
        return run(config)

    def trace(self, steps, seed=0, agent_id=1, trial=0):
        check_is_fitted(self, "spec_")
        return trace(self.spec_, self.prior_, steps, seed=seed, agent_id=agent_id, trial=trial)
