"""Continuous Pareto analysis: the optimal survival surface and its cost.

On ``x, t`` in ``(0, 1]`` with box weight ``x^-b`` the cost-minimizing valid
surface is piecewise closed-form; its cost ``U`` times ``k(2 - b)`` is the
limiting ratio of the Pareto searcher to the coordinated sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from ._validation import InvalidArgumentError, check_k


@dataclass(frozen=True)
class ContinuumParams:
    b: float
    k: int

    def __post_init__(self):
        if not (0 < self.b <= 1):
            raise InvalidArgumentError(f"b must be in (0, 1], got {self.b}")
        object.__setattr__(self, "k", check_k(self.k))

    @property
    def sigma(self) -> float:
        return self.b / (self.b + self.k - 1)

    @property
    def exponent(self) -> float:
        """``b / (k - 1)``, the power on ``x`` in the optimal surface."""
        return self.b / (self.k - 1)

    def gamma(self, t: float) -> float:
        """Smallest ``x`` left untouched at time ``t`` (1 once everything is active)."""
        return min(1.0, t / self.sigma)

    def level(self, t: float) -> float:
        """Water level ``alpha(t)``: ``(sigma/t)^(b/(k-1))`` early, linear decay late."""
        s = self.sigma
        if t < s:
            return (s / t) ** self.exponent
        return (1.0 - t) / (1.0 - s)


def opt_value(x, t, params: ContinuumParams) -> float:
    if x <= 0 or x > 1:
        raise InvalidArgumentError(f"x must be in (0, 1], got {x}")
    if t < 0:
        raise InvalidArgumentError(f"t must be >= 0, got {t}")
    s, e = params.sigma, params.exponent
    if t <= s * x:
        return 1.0
    if t <= s:
        return (s * x / t) ** e
    if t <= 1:
        return (1.0 - t) / (1.0 - s) * x**e
    return 0.0


def u_opt(params: ContinuumParams) -> float:
    s = params.sigma
    return s * (2 - s) / (2 - params.b) + (1 - s) ** 2 / (params.k + 1)


def u_opt_quadrature(params: ContinuumParams, epsrel=1e-11) -> float:
    """Integrate ``x^-b OPT(x, t)^k`` over the unit square numerically.

    Used as the independent check of :func:`u_opt`. The ``x^-b`` singularity
    is handled by an algebraic quadrature weight; ``t`` is split at ``sigma``
    and ``x`` at ``t / sigma`` so every piece is smooth.
    """
    b, k = params.b, params.k
    s = params.sigma

    def opt_k(x, t):
        return opt_value(x, t, params) ** k if x > 0 else (0.0 if t > 0 else 1.0)

    def inner(t):
        g = min(1.0, t / s)
        total = 0.0
        if g > 0:
            if b < 1:
                val, _ = integrate.quad(lambda x: opt_k(x, t), 0.0, g, weight="alg",
                                        wvar=(-b, 0.0), epsabs=0, epsrel=epsrel, limit=200)
            else:
                # OPT^k vanishes like x^(k/(k-1)) at 0, which absorbs 1/x
                val, _ = integrate.quad(lambda x: opt_k(x, t) / x if x > 0 else 0.0, 0.0, g,
                                        epsabs=0, epsrel=epsrel, limit=200)
            total += val
        if g < 1:
            val, _ = integrate.quad(lambda x: opt_k(x, t) * x**-b, g, 1.0,
                                    epsabs=0, epsrel=epsrel, limit=200)
            total += val
        return total

    early, _ = integrate.quad(inner, 0.0, s, epsabs=0, epsrel=epsrel, limit=200)
    late, _ = integrate.quad(inner, s, 1.0, epsabs=0, epsrel=epsrel, limit=200)
    return early + late


def pareto_ratio_limit(params: ContinuumParams) -> float:
    """Limiting ``T(pareto) / T(cord)`` as ``M`` grows: ``k (2 - b) U``."""
    return params.k * (2 - params.b) * u_opt(params)


def pareto_ratio_components(params: ContinuumParams) -> dict:
    s, k, b = params.sigma, params.k, params.b
    return {
        "sigma": s,
        "u_opt": u_opt(params),
        "early_term": k * s * (2 - s),
        "late_term": k * (2 - b) * (1 - s) ** 2 / (k + 1),
        "limit": pareto_ratio_limit(params),
    }


def gamma_product_check(a, b_int, phi):
    """Compare ``prod_{i=a}^{b} i / (i + phi)`` with ``(a / b)^phi`` in log space.

    Returns ``(lhs, rhs, holds)``.
    """
    if not (0 < phi <= 1):
        raise InvalidArgumentError(f"phi must be in (0, 1], got {phi}")
    a, b_int = int(a), int(b_int)
    if not (1 <= a <= b_int):
        raise InvalidArgumentError("need integers 1 <= a <= b")
    i = np.arange(a, b_int + 1, dtype=np.float64)
    log_lhs = math.fsum(np.log(i) - np.log(i + phi))
    log_rhs = phi * (math.log(a) - math.log(b_int))
    lhs, rhs = math.exp(log_lhs), math.exp(log_rhs)
    return lhs, rhs, log_lhs <= log_rhs + math.log1p(1e-12)


def gamma_product_grid(b_max=200, phis=None):
    """Count violations of the product inequality over ``1 <= a <= b <= b_max``.

    Returns ``(checked, violations, worst_log_margin)``.
    """
    if phis is None:
        phis = np.round(np.arange(1, 11) / 10, 10)
    checked = violations = 0
    worst = -math.inf
    n = np.arange(1, b_max + 1, dtype=np.float64)
    for phi in phis:
        # prefix[j] = sum_{i<=j} log(i/(i+phi))
        prefix = np.concatenate(([0.0], np.cumsum(np.log(n) - np.log(n + phi))))
        for a in range(1, b_max + 1):
            bs = np.arange(a, b_max + 1)
            log_lhs = prefix[bs] - prefix[a - 1]
            log_rhs = phi * (math.log(a) - np.log(bs))
            margin = log_lhs - log_rhs
            checked += bs.size
            violations += int(np.count_nonzero(margin > math.log1p(1e-12)))
            worst = max(worst, float(margin.max()))
    return checked, violations, worst


def discrete_waterfill(c, T, k):
    """Minimize ``sum c f^k`` subject to ``sum (1 - f) <= T`` with ``f`` in ``[0, 1]``.

    The optimum is ``f = min(1, alpha c^(-1/(k-1)))`` with the smallest
    feasible ``alpha``. Boxes are sorted by weight and each candidate active
    set size ``m`` is tested for consistency: the level it implies must push
    its ``m`` heaviest boxes below 1 and leave the next one at 1.
    """
    k = check_k(k)
    c = np.asarray(c, dtype=np.float64)
    if c.ndim != 1:
        raise InvalidArgumentError("c must be a vector")
    if np.any(c < 0) or not np.all(np.isfinite(c)):
        raise InvalidArgumentError("c must be finite and non-negative")
    T = float(T)
    if T < 0:
        raise InvalidArgumentError("T must be >= 0")
    f = np.ones_like(c)
    support = np.nonzero(c > 0)[0]
    n = support.size
    if n == 0 or T == 0:
        return f
    if T >= n:
        f[support] = 0.0
        return f
    order = support[np.argsort(-c[support], kind="stable")]
    w = c[order] ** (-1.0 / (k - 1))  # non-decreasing
    csum = np.cumsum(w)
    alpha = None
    for m in range(1, n + 1):
        if m <= T:
            continue
        level = (m - T) / csum[m - 1]
        inside = level * w[m - 1] <= 1.0 + 1e-15
        outside = m == n or level * w[m] >= 1.0 - 1e-15
        if inside and outside:
            alpha = level
            break
    if alpha is None:
        raise RuntimeError("no consistent active set; weights are not well ordered")
    f[order] = np.minimum(1.0, alpha * w)
    return f
