"""Functional view of single-agent strategies.

A strategy is summarized by its survival matrix ``N[x, t]``: the probability
that one agent has not checked box ``x`` by its ``t``-th query. With ``k``
independent agents the treasure at ``x`` survives time ``t`` with probability
``N[x, t] ** k``, so the expected discovery time is ``sum_t sum_x p N^k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import IncompleteMatrixError, InvalidArgumentError, check_k
from .distributions import BoxPrior, q_weights

COLUMN_TOL = 1e-9


@dataclass
class StrategyMatrix:
    """Survival probabilities ``survival[x - 1, t]`` for ``t = 0..H``.

    ``box_tail[x - 1]`` bounds ``sum_{t > H} N(x, t)^k`` from above for the
    ``k`` the matrix was built for. ``tail_exact`` marks tails that are exact
    values rather than bounds.
    """

    survival: np.ndarray
    box_tail: np.ndarray | None = None
    k: int | None = None
    tail_exact: bool = False
    label: str = ""

    def __post_init__(self):
        self.survival = np.asarray(self.survival, dtype=np.float64)
        if self.survival.ndim != 2:
            raise InvalidArgumentError("survival must be a 2-D matrix")
        if self.box_tail is None:
            self.box_tail = np.zeros(self.survival.shape[0])
        self.box_tail = np.asarray(self.box_tail, dtype=np.float64)

    @property
    def horizon(self) -> int:
        return self.survival.shape[1] - 1

    @property
    def n_boxes(self) -> int:
        return self.survival.shape[0]

    def column_usage(self) -> np.ndarray:
        """``C_N(t) = sum_x (1 - N(x, t))`` for every stored column."""
        return np.sum(1.0 - self.survival, axis=0)

    def tail_bound(self, prior: BoxPrior) -> float:
        n = min(self.n_boxes, prior.M)
        return math.fsum(prior.masses[:n] * self.box_tail[:n])


@dataclass
class LSchedule:
    """Water levels ``alpha[t]``, active prefix sizes ``active[t]`` and the matrix ``L``.

    ``alpha[0]`` is ``inf`` (nothing is active before the first query).
    """

    alpha: np.ndarray
    active: np.ndarray
    L: StrategyMatrix
    q: np.ndarray = field(repr=False)

    def check_probabilities(self, t: int) -> tuple[float, np.ndarray]:
        """Per-box check probabilities of the optimal sampler at step ``t >= 1``.

        Returns ``(w_old, w_new)``: each previously-active unchecked box is
        checked with probability ``w_old``; the newly active boxes
        ``active[t-1]+1 .. active[t]`` are checked with the entries of ``w_new``.
        """
        a_prev, a_now = self.alpha[t - 1], self.alpha[t]
        w_old = 0.0 if math.isinf(a_prev) else 1.0 - a_now / a_prev
        new = self.q[self.active[t - 1] : self.active[t]]
        w_new = 1.0 - a_now * new
        return w_old, w_new


@dataclass(frozen=True)
class Violation:
    kind: str  # "range" | "start" | "monotone" | "column"
    box: int | None
    t: int
    magnitude: float


def build_L(prior: BoxPrior, k) -> LSchedule:
    """Compute the entrywise-minimal valid survival function for ``(prior, k)``.

    For each ``t`` the active prefix is extended while
    ``sum_{x<=y} (1 - q(x)/q(y)) <= t``; the level then solves
    ``t = sum_{x<=ac} (1 - alpha q(x))`` in closed form.
    """
    k = check_k(k)
    q = q_weights(prior, k).q
    S = prior.support
    M = prior.M
    qs = q[:S]
    prefix = np.concatenate(([0.0], np.cumsum(qs)))

    alpha = np.zeros(S + 1)
    active = np.zeros(S + 1, dtype=np.int64)
    alpha[0] = np.inf
    ac = 0
    for t in range(1, S + 1):
        if t >= S:
            ac = S
            alpha[t] = 0.0
            active[t] = S
            continue
        y = ac + 1
        while y <= S:
            # sum_{x<=y} (1 - q(x)/q(y)) = y - Q(y)/q(y)
            used = y - prefix[y] / qs[y - 1]
            if used > t:
                break
            y += 1
        ac = y - 1
        if ac <= t:
            raise RuntimeError(
                f"active prefix exhausted at t={t}: ac={ac} leaves no positive level"
            )
        alpha[t] = (ac - t) / prefix[ac]
        active[t] = ac

    survival = np.ones((M, S + 1))
    for t in range(1, S + 1):
        col = np.minimum(1.0, alpha[t] * qs)
        survival[:S, t] = col
    return LSchedule(
        alpha=alpha,
        active=active,
        L=StrategyMatrix(survival, np.zeros(M), k=k, tail_exact=True, label="astar"),
        q=q,
    )


def expected_time(N: StrategyMatrix, prior: BoxPrior, k) -> tuple[float, float]:
    """Bracket ``[lower, upper]`` on ``sum_x p(x) sum_t N(x, t)^k``.

    The stored columns give the lower end; the upper end adds the tail bound.
    An exact tail is added to both ends.
    """
    k = check_k(k)
    n = min(N.n_boxes, prior.M)
    if prior.support > N.n_boxes:
        raise IncompleteMatrixError(
            f"matrix covers {N.n_boxes} boxes but the prior has support {prior.support}"
        )
    p = prior.masses[:n]
    surv = N.survival[:n]
    col_terms = p @ (surv**k)
    lower = math.fsum(col_terms)
    if N.k is not None and N.k != k and np.any(N.box_tail[:n] > 0):
        raise InvalidArgumentError(f"matrix tail was bounded for k={N.k}, not k={k}")
    last = surv[:, -1]
    if np.any((p > 0) & (last > 0) & (N.box_tail[:n] == 0)) and not N.tail_exact:
        raise IncompleteMatrixError(
            "positive survival at the horizon with no tail bound; extend the horizon"
        )
    upper = lower + N.tail_bound(prior)
    if N.tail_exact:
        return upper, upper
    return lower, upper


def cord_time(prior: BoxPrior, k) -> float:
    """Expected time of the coordinated sweep: ``sum_x p(x) ceil(x/k)``."""
    k = check_k(k)
    x = np.arange(1, prior.M + 1)
    rounds = -(-x // k)
    return math.fsum(prior.masses * rounds)


def validate(N: StrategyMatrix, tol: float = COLUMN_TOL) -> list[Violation]:
    """List every broken survival-matrix invariant (empty when valid)."""
    out = []
    S = N.survival
    bad = np.argwhere((S < -tol) | (S > 1 + tol))
    for x, t in bad:
        v = S[x, t]
        out.append(Violation("range", int(x) + 1, int(t), float(-v if v < 0 else v - 1)))
    for x in np.nonzero(np.abs(S[:, 0] - 1.0) > tol)[0]:
        out.append(Violation("start", int(x) + 1, 0, float(abs(S[x, 0] - 1.0))))
    rises = np.diff(S, axis=1)
    for x, t in np.argwhere(rises > tol):
        out.append(Violation("monotone", int(x) + 1, int(t) + 1, float(rises[x, t])))
    usage = N.column_usage()
    for t in np.nonzero(usage > np.arange(S.shape[1]) + tol)[0]:
        out.append(Violation("column", None, int(t), float(usage[t] - t)))
    return out
