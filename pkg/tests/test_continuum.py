import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize

from boxsearch.continuum import (
    ContinuumParams,
    discrete_waterfill,
    gamma_product_check,
    gamma_product_grid,
    opt_value,
    pareto_ratio_components,
    pareto_ratio_limit,
    u_opt,
    u_opt_quadrature,
)
from boxsearch._validation import InvalidArgumentError


def test_params():
    p = ContinuumParams(0.5, 2)
    assert p.sigma == pytest.approx(1 / 3)
    assert p.exponent == 0.5
    assert p.gamma(0.1) == pytest.approx(0.3)
    assert p.gamma(0.9) == 1.0
    with pytest.raises(InvalidArgumentError):
        ContinuumParams(0.0, 2)
    with pytest.raises(InvalidArgumentError):
        ContinuumParams(1.5, 2)
    with pytest.raises(InvalidArgumentError):
        ContinuumParams(0.5, 1)


@pytest.mark.parametrize("b, k", [(0.3, 2), (0.7, 3), (1.0, 5)])
def test_opt_continuous_at_breakpoints(b, k):
    p = ContinuumParams(b, k)
    s = p.sigma
    eps = 1e-9
    for x in (0.2, 0.6, 1.0):
        assert opt_value(x, s * x - eps, p) == pytest.approx(opt_value(x, s * x + eps, p), abs=1e-6)
        assert opt_value(x, s - eps, p) == pytest.approx(opt_value(x, s + eps, p), abs=1e-6)
    assert opt_value(0.5, 1.0, p) == 0.0
    assert opt_value(0.5, 2.0, p) == 0.0


@pytest.mark.parametrize("b, k", [(0.2, 2), (0.5, 3), (0.9, 10), (1.0, 2)])
def test_opt_spends_budget(b, k):
    """The surface uses exactly ``t`` units of checking by time ``t``."""
    p = ContinuumParams(b, k)
    for t in (0.05, p.sigma / 2, p.sigma, 0.5 * (1 + p.sigma), 0.99):
        g = p.gamma(t)
        used, _ = integrate.quad(lambda x: 1 - opt_value(x, t, p), 0, g, epsabs=1e-12,
                                 points=[g / 2])
        assert used == pytest.approx(t, rel=1e-7)


def test_opt_rejects_domain():
    p = ContinuumParams(0.5, 2)
    with pytest.raises(InvalidArgumentError):
        opt_value(0.0, 0.5, p)
    with pytest.raises(InvalidArgumentError):
        opt_value(0.5, -1, p)


def test_known_ratios():
    assert pareto_ratio_limit(ContinuumParams(1.0, 2)) == pytest.approx(5 / 3, abs=1e-14)
    assert pareto_ratio_limit(ContinuumParams(0.5, 2)) == pytest.approx(14 / 9, abs=1e-14)


@pytest.mark.parametrize("b, k", [(0.1, 2), (0.5, 3), (0.9, 10), (1.0, 2)])
def test_u_opt_quadrature(b, k):
    p = ContinuumParams(b, k)
    assert u_opt_quadrature(p) == pytest.approx(u_opt(p), rel=1e-8)


def test_ratio_components_add_up():
    for b in (0.1, 0.5, 0.9):
        for k in (2, 3, 5, 10):
            c = pareto_ratio_components(ContinuumParams(b, k))
            assert c["early_term"] + c["late_term"] == pytest.approx(c["limit"], abs=1e-12)


def test_gamma_product_single():
    lhs, rhs, holds = gamma_product_check(1, 1, 1.0)
    assert lhs == pytest.approx(0.5) and rhs == 1.0 and holds
    lhs, rhs, holds = gamma_product_check(3, 10, 0.5)
    direct = math.prod(i / (i + 0.5) for i in range(3, 11))
    assert lhs == pytest.approx(direct, rel=1e-13)
    assert rhs == pytest.approx((3 / 10) ** 0.5)
    assert holds
    with pytest.raises(InvalidArgumentError):
        gamma_product_check(5, 4, 0.5)
    with pytest.raises(InvalidArgumentError):
        gamma_product_check(1, 4, 1.5)


def test_gamma_grid():
    checked, violations, worst = gamma_product_grid(60)
    assert checked == 10 * 60 * 61 // 2
    assert violations == 0
    assert worst <= 0


# ---------------------------------------------------------------------------
# discrete water-filling


def test_waterfill_examples():
    np.testing.assert_allclose(discrete_waterfill([1 / 2, 1 / 3, 1 / 6], 1, 2), [0.4, 0.6, 1])
    np.testing.assert_array_equal(discrete_waterfill([0.3, 0.2], 0, 2), [1, 1])
    np.testing.assert_array_equal(discrete_waterfill([0.3, 0.2, 0.0], 5, 3), [0, 0, 1])


def test_waterfill_indicator():
    c = np.array([1, 1, 1, 1, 0, 0.0])
    f = discrete_waterfill(c, 1.5, 3)
    np.testing.assert_allclose(f, [(4 - 1.5) / 4] * 4 + [1, 1])


def test_waterfill_rejects_bad_input():
    with pytest.raises(InvalidArgumentError):
        discrete_waterfill([[1, 2]], 1, 2)
    with pytest.raises(InvalidArgumentError):
        discrete_waterfill([1, -1], 1, 2)
    with pytest.raises(InvalidArgumentError):
        discrete_waterfill([1, 1], -1, 2)


def slsqp_oracle(c, T, k):
    """Generic constrained minimizer of sum c f^k with sum (1 - f) <= T."""
    n = len(c)
    best = None
    for start in (np.full(n, 0.5), np.ones(n), np.full(n, max(0.0, 1 - T / n))):
        res = optimize.minimize(
            lambda f: float(np.dot(c, f**k)), start,
            jac=lambda f: k * c * f ** (k - 1),
            bounds=[(0, 1)] * n,
            constraints=[{"type": "ineq", "fun": lambda f: T - np.sum(1 - f),
                          "jac": lambda f: np.ones(n)}],
            method="SLSQP", options={"ftol": 1e-14, "maxiter": 500},
        )
        if best is None or res.fun < best.fun:
            best = res
    return best


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(0.01, 1.0), min_size=1, max_size=5),
    st.floats(0.0, 5.0),
    st.integers(2, 5),
)
def test_waterfill_matches_generic_optimizer(c, T, k):
    c = np.array(c)
    f = discrete_waterfill(c, T, k)
    assert np.all((f >= 0) & (f <= 1))
    assert np.sum(1 - f) <= T + 1e-9
    res = slsqp_oracle(c, T, k)
    ours = float(np.dot(c, f**k))
    assert ours <= res.fun + 1e-7 * max(1.0, abs(res.fun))


@settings(max_examples=80, deadline=None)
@given(
    st.lists(st.floats(1e-3, 1.0), min_size=1, max_size=12),
    st.floats(0.0, 12.0),
    st.integers(2, 6),
)
def test_waterfill_kkt_structure(c, T, k):
    c = np.array(c)
    f = discrete_waterfill(c, T, k)
    inner = (f > 1e-12) & (f < 1 - 1e-12)
    if inner.sum() >= 2:
        level = f[inner] * c[inner] ** (1 / (k - 1))
        np.testing.assert_allclose(level, level[0], rtol=1e-9)
    # boxes left untouched are the lightest ones
    if inner.any() and (f >= 1 - 1e-12).any():
        assert c[f >= 1 - 1e-12].max() <= c[inner].min() * (1 + 1e-9)
