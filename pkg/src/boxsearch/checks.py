"""Named numerical checks behind ``boxsearch verify``.

Each function returns a list of :class:`CheckResult`; a check passes when
its measured value meets the stated requirement.
"""

from __future__ import annotations

import math
import os
import subprocess
import sys
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .continuum import (
    ContinuumParams,
    discrete_waterfill,
    gamma_product_grid,
    pareto_ratio_components,
    pareto_ratio_limit,
    u_opt,
    u_opt_quadrature,
)
from .distributions import BoxPrior, make_custom, make_pareto, make_uniform
from .estimators import exact_time
from .montecarlo import SimConfig, run, run_with_faults
from .searchers import SearcherSpec, matrix_uniform_replacement, phase_box_times
from .strategy_engine import build_L, cord_time, expected_time

ALL_KINDS = ("cord", "universal", "memory", "astar", "pareto", "uniform_replacement", "uniform")
B_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))
K_GRID = (2, 3, 5, 10)


@dataclass
class CheckResult:
    name: str
    measured: object
    required: str
    passed: bool
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        m = self.measured
        if isinstance(m, float):
            m = f"{m:.6g}"
        return f"{status} {self.name}: {m} (required {self.required}) [{self.seconds:.2f}s]"


def golden_priors() -> list[BoxPrior]:
    return [
        make_custom([1 / 2, 1 / 3, 1 / 6]),
        make_uniform(3),
        make_uniform(10),
        make_uniform(50),
        make_pareto(0.5, 1000),
    ]


def prior_label(prior: BoxPrior) -> str:
    if prior.kind == "pareto":
        return f"pareto:{prior.b:g},{prior.M}"
    if prior.kind == "uniform":
        return f"uniform:{prior.M}"
    return "custom:" + ",".join(f"{m:.4g}" for m in prior.masses)


def applicable(kind: str, prior: BoxPrior) -> bool:
    """The pareto searcher takes its exponent from a pareto prior."""
    return kind != "pareto" or prior.kind == "pareto"


# ---------------------------------------------------------------------------
# construction and optimality


def check_golden_schedule() -> list[CheckResult]:
    prior = make_custom([1 / 2, 1 / 3, 1 / 6])
    start = time.perf_counter()
    sch = build_L(prior, 2)
    secs = time.perf_counter() - start
    want_alpha = np.array([1 / 5, 1 / 11, 0.0])
    want_L = np.array([
        [1, 0.4, 2 / 11, 0],
        [1, 0.6, 3 / 11, 0],
        [1, 1.0, 6 / 11, 0],
    ])
    a_err = float(np.max(np.abs(sch.alpha[1:] - want_alpha)))
    l_err = float(np.max(np.abs(sch.L.survival - want_L)))
    T, _ = expected_time(sch.L, prior, 2)
    return [
        CheckResult("golden alpha", a_err, "<= 1e-12", a_err <= 1e-12, secs),
        CheckResult("golden L matrix", l_err, "<= 1e-12", l_err <= 1e-12, secs),
        CheckResult("golden build time (ms)", secs * 1e3, "< 1", secs < 1e-3, secs),
        CheckResult("golden expected time", T, "= 481/330", abs(T - 481 / 330) <= 1e-12),
    ]


def random_priors(n, seed=0, max_boxes=20) -> list[BoxPrior]:
    """Non-increasing priors with occasional ties and zero-mass tails."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        M = int(rng.integers(1, max_boxes + 1))
        m = np.sort(rng.exponential(size=M) ** rng.uniform(0.5, 3.0))[::-1]
        if i % 4 == 1:
            m = np.round(m / m[0], 1)  # creates ties
        if i % 4 == 2 and M > 2:
            m[rng.integers(1, M) :] = 0.0
        if m[0] == 0:
            m[0] = 1.0
        out.append(make_custom(m))
    return out


def check_optimality(n_priors=100, seed=0) -> list[CheckResult]:
    start = time.perf_counter()
    rng = np.random.default_rng(seed + 1)
    worst_gap = -math.inf
    worst_col = 0.0
    compared = 0
    for i, prior in enumerate(random_priors(n_priors, seed)):
        k = 2 + i % 2
        sch = build_L(prior, k)
        _, t_L = expected_time(sch.L, prior, k)
        rivals = [SearcherSpec(kind, k) for kind in ("universal", "memory", "uniform")]
        rivals.append(SearcherSpec("pareto", k, float(rng.uniform(0.05, 0.95))))
        for spec in rivals:
            lower, _ = exact_time(spec, prior)
            worst_gap = max(worst_gap, t_L - lower)
            compared += 1
        S = prior.support
        for t in range(1, S + 1):
            f = discrete_waterfill(prior.masses, t, k)
            worst_col = max(worst_col, float(np.max(np.abs(f - sch.L.survival[:, t]))))
    secs = time.perf_counter() - start
    return [
        CheckResult(f"optimal schedule vs {compared} rivals: max T(L) - T(N)", worst_gap,
                    "<= 1e-9", worst_gap <= 1e-9, secs),
        CheckResult("L columns vs water-filling", worst_col, "<= 1e-10", worst_col <= 1e-10, secs),
    ]


def check_uniform_closed_forms(Ms=(1, 2, 3, 10, 50, 200), ks=(2, 3, 5)) -> list[CheckResult]:
    start = time.perf_counter()
    err_astar = err_repl = 0.0
    for M in Ms:
        prior = make_uniform(M)
        for k in ks:
            T, _ = expected_time(build_L(prior, k).L, prior, k)
            want = float(sum(Fraction(i) ** k for i in range(M + 1)) / Fraction(M) ** k)
            err_astar = max(err_astar, abs(T - want))
            lo, hi = expected_time(matrix_uniform_replacement(M, k), prior, k)
            want = 1.0 / (1.0 - (1.0 - 1.0 / M) ** k)
            err_repl = max(err_repl, abs(lo - want), abs(hi - want))
    T3, _ = expected_time(build_L(make_uniform(3), 2).L, make_uniform(3), 2)
    secs = time.perf_counter() - start
    return [
        CheckResult("uniform A* closed form", err_astar, "<= 1e-10", err_astar <= 1e-10, secs),
        CheckResult("uniform A* at M=3, k=2", T3, "= 14/9", abs(T3 - 14 / 9) <= 1e-10),
        CheckResult("uniform with replacement closed form", err_repl, "<= 1e-10",
                    err_repl <= 1e-10, secs),
    ]


# ---------------------------------------------------------------------------
# universal and memory bounds


def check_bounds(x_max=10_000, ks=K_GRID) -> list[CheckResult]:
    out = []
    x = np.arange(1, x_max + 1)
    for k in ks:
        start = time.perf_counter()
        _, upper = phase_box_times("universal", x_max, k)
        margin = float(np.max(upper - (10 + 4 * k / (k + 1) ** 2 * x)))
        out.append(CheckResult(f"universal T(x) <= 10 + 4k/(k+1)^2 x, k={k}, x<={x_max}",
                               margin, "max excess <= 0", margin <= 0,
                               time.perf_counter() - start))
        start = time.perf_counter()
        _, upper = phase_box_times("memory", x_max, k)
        margin = float(np.max(upper - (2 + 4 * np.ceil(x / k))))
        out.append(CheckResult(f"memory T(x) <= 2 + 4 ceil(x/k), k={k}, x<={x_max}",
                               margin, "max excess <= 0", margin <= 0,
                               time.perf_counter() - start))
    start = time.perf_counter()
    worst = -math.inf
    for prior in golden_priors():
        for k in ks:
            _, upper = exact_time(SearcherSpec("universal", k), prior)
            worst = max(worst, upper - (10 + 4 * (k / (k + 1)) ** 2 * cord_time(prior, k)))
    out.append(CheckResult("universal vs cord on golden priors", worst, "max excess <= 0",
                           worst <= 0, time.perf_counter() - start))
    return out


# ---------------------------------------------------------------------------
# pareto and the continuum


def pareto_ratio(b, k, M) -> float:
    prior = make_pareto(b, M)
    lower, upper = exact_time(SearcherSpec("pareto", k, b), prior)
    return 0.5 * (lower + upper) / cord_time(prior, k)


def check_pareto(b=0.5, k=2, Ms=(1_000, 10_000, 100_000), tol=None) -> list[CheckResult]:
    if tol is None:
        tol = 0.05 if b <= 0.5 else 0.08
    start = time.perf_counter()
    limit = pareto_ratio_limit(ContinuumParams(b, k))
    ratios = [pareto_ratio(b, k, M) for M in Ms]
    gaps = [abs(r - limit) for r in ratios]
    monotone = all(g2 < g1 for g1, g2 in zip(gaps, gaps[1:]))
    rel = gaps[-1] / limit
    secs = time.perf_counter() - start
    shown = ", ".join(f"M={M}: {r:.6f}" for M, r in zip(Ms, ratios))
    return [
        CheckResult(f"pareto ratio b={b:g} k={k} approaches {limit:.6f}", shown,
                    "distance to limit strictly decreasing", monotone, secs),
        CheckResult(f"pareto ratio b={b:g} k={k} at M={Ms[-1]}", rel,
                    f"relative gap <= {tol:g}", rel <= tol, secs),
    ]


def check_continuum(bs=B_GRID, ks=K_GRID) -> list[CheckResult]:
    start = time.perf_counter()
    quad_err = ident_err = 0.0
    for b in bs:
        for k in ks:
            params = ContinuumParams(b, k)
            u = u_opt(params)
            quad_err = max(quad_err, abs(u_opt_quadrature(params) - u) / u)
            c = pareto_ratio_components(params)
            ident_err = max(ident_err, abs(c["limit"] - (c["early_term"] + c["late_term"])))
    limit_b1 = pareto_ratio_limit(ContinuumParams(1.0, 2))
    secs = time.perf_counter() - start
    return [
        CheckResult("u_opt closed form vs quadrature (relative)", quad_err, "<= 1e-6",
                    quad_err <= 1e-6, secs),
        CheckResult("k(2-b)U = k s(2-s) + k(2-b)(1-s)^2/(k+1)", ident_err, "<= 1e-12",
                    ident_err <= 1e-12, secs),
        CheckResult("limit ratio at b=1, k=2", limit_b1, "= 5/3", abs(limit_b1 - 5 / 3) <= 1e-12),
    ]


def check_gamma(b_max=200) -> list[CheckResult]:
    start = time.perf_counter()
    checked, violations, worst = gamma_product_grid(b_max)
    return [CheckResult(f"gamma product over {checked} grid points", violations,
                        "0 violations", violations == 0, time.perf_counter() - start)]


# ---------------------------------------------------------------------------
# Monte Carlo


def check_montecarlo(trials=1_000_000, seed=20240601, k=2) -> list[CheckResult]:
    out = []
    total = time.perf_counter()
    for prior in golden_priors():
        for kind in ALL_KINDS:
            if not applicable(kind, prior):
                continue
            start = time.perf_counter()
            spec = SearcherSpec(kind, k, prior.b if kind == "pareto" else None)
            lower, upper = exact_time(spec, prior)
            mid = 0.5 * (lower + upper)
            sim = run(SimConfig(prior, k, kind, trials=trials, seed=seed))
            z = abs(sim.mean - mid) / sim.stderr
            out.append(CheckResult(
                f"monte carlo {kind} on {prior_label(prior)}",
                f"mean {sim.mean:.6f} vs exact {mid:.6f}, z={z:.2f}",
                "|z| <= 4", bool(z <= 4 and sim.censored == 0),
                time.perf_counter() - start,
            ))
    secs = time.perf_counter() - total
    out.append(CheckResult("monte carlo suite runtime (s)", secs, "< 60", secs < 60, secs))
    return out


def check_robustness(trials=100_000, seed=7, crash_times=(1, 5, 20)) -> list[CheckResult]:
    out = []
    prior = make_uniform(50)
    for when in crash_times:
        start = time.perf_counter()
        cmp = run_with_faults(SimConfig(prior, 3, "astar", trials=trials, seed=seed,
                                        crash_schedule=((1, when),), configured_k=2))
        slack = cmp.clean.mean + 4 * cmp.pooled_stderr
        out.append(CheckResult(
            f"crash agent 1 at t={when}: 3 agents configured for 2 vs 2 clean",
            f"faulty {cmp.faulty.mean:.4f}, clean {cmp.clean.mean:.4f}",
            f"faulty <= {slack:.4f}", cmp.holds, time.perf_counter() - start,
        ))
    return out


def sim_cli_bytes(args, threads, numba_threads=4) -> bytes:
    """Run ``boxsearch sim`` in a fresh interpreter and return its CSV output."""
    env = dict(os.environ, NUMBA_NUM_THREADS=str(numba_threads))
    cmd = [sys.executable, "-m", "boxsearch", "sim", *args, "--threads", str(threads)]
    return subprocess.run(cmd, env=env, check=True, capture_output=True).stdout


def check_determinism(trials=20_000, thread_counts=(1, 2, 4)) -> list[CheckResult]:
    start = time.perf_counter()
    outs = []
    for alg, prior in (("astar", "pareto:0.5,1000"), ("universal", "uniform:50")):
        args = ["--alg", alg, "--prior", prior, "-k", "2", "--trials", str(trials),
                "--seed", "11", "--crash", "2:30"]
        outs.append([sim_cli_bytes(args, n) for n in thread_counts])
    same = all(all(o == runs[0] for o in runs) for runs in outs)
    return [CheckResult(f"sim CSV bytes identical for --threads {thread_counts}",
                        "identical" if same else "differ", "identical", same,
                        time.perf_counter() - start)]


SUITES = {
    "bounds": lambda opts: check_bounds(),
    "optimality": lambda opts: (check_golden_schedule() + check_optimality()
                                + check_uniform_closed_forms()),
    "pareto": lambda opts: (check_pareto(opts.get("b", 0.5), opts.get("k", 2),
                                         opts.get("Ms", (1_000, 10_000, 100_000)))
                            + check_continuum()),
    "gamma": lambda opts: check_gamma(),
    "montecarlo": lambda opts: (check_montecarlo(opts.get("trials", 1_000_000))
                                + check_robustness() + check_determinism()),
}


def run_suite(name, **opts) -> list[CheckResult]:
    if name == "all":
        return [r for n in SUITES for r in SUITES[n](opts)]
    return SUITES[name](opts)
