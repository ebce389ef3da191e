import math

import numpy as np
import pytest
from scipy import stats

from boxsearch import _kernels
from boxsearch.distributions import make_custom, make_pareto, make_uniform
from boxsearch.montecarlo import SimConfig, _strategy_arrays, empirical_survival
from boxsearch.rng import CounterRNG, nb_stream_key, nb_uniform_at, stream_key, uniform_at
from boxsearch.searchers import (
    NO_OP,
    AgentState,
    SearcherSpec,
    matrix_astar,
    matrix_memory,
    matrix_pareto,
    matrix_uniform,
    matrix_uniform_replacement,
    matrix_universal,
    pareto_box_times,
    pareto_windows,
    phase_box_times,
    sample_cord,
    sample_step,
    trace,
)
from boxsearch.strategy_engine import build_L, expected_time, validate
from boxsearch._validation import InvalidArgumentError

PRIORS = {
    "pareto": make_pareto(0.5, 60),
    "uniform": make_uniform(25),
    "custom": make_custom([5, 4, 4, 2, 1, 1, 1, 0.5]),
}
RANDOM_KINDS = ("universal", "memory", "astar", "pareto", "uniform_replacement", "uniform")


def first_checks(boxes, x_max):
    out = np.zeros(x_max, np.int64)
    for t, box in enumerate(boxes, start=1):
        if 1 <= box <= x_max and out[box - 1] == 0:
            out[box - 1] = t
    return out


# ---------------------------------------------------------------------------
# random streams


def test_python_and_compiled_streams_agree():
    for ids in [(0, 0, 0, 0), (7, 3, 2, 0), (2**40 + 5, 999_999, 11, 1)]:
        key = stream_key(*ids)
        assert int(nb_stream_key(*ids)) == key
        for n in (0, 1, 17, 2**33):
            assert nb_uniform_at(np.uint64(key), n) == uniform_at(key, n)


def test_streams_are_uniform():
    rng = CounterRNG(seed=5, trial=1, agent=2)
    u = np.array([rng.random() for _ in range(20_000)])
    assert u.min() >= 0 and u.max() < 1
    assert stats.kstest(u, "uniform").pvalue > 1e-4


def test_streams_differ_by_identifier():
    a = CounterRNG(1, 0, 1).random()
    assert a != CounterRNG(1, 0, 2).random()
    assert a != CounterRNG(1, 1, 1).random()
    assert a != CounterRNG(2, 0, 1).random()
    assert a != CounterRNG(1, 0, 1, purpose=1).random()


# ---------------------------------------------------------------------------
# samplers


def test_cord():
    assert [sample_cord(2, t, 3) for t in (1, 2, 3)] == [2, 5, 8]
    with pytest.raises(InvalidArgumentError):
        sample_cord(4, 1, 3)


def test_spec_validation():
    with pytest.raises(InvalidArgumentError):
        SearcherSpec("zigzag", 2)
    with pytest.raises(InvalidArgumentError):
        SearcherSpec("pareto", 2)
    with pytest.raises(InvalidArgumentError):
        SearcherSpec("pareto", 2, 1.0)
    assert SearcherSpec("pareto", 2, 0.5).sigma == pytest.approx(1 / 3)
    assert SearcherSpec("cord", 3).coordinating


def test_steps_must_be_sequential():
    spec = SearcherSpec("uniform", 2)
    state = AgentState(spec, 1, make_uniform(5))
    rng = CounterRNG(0)
    sample_step(spec, state, 1, rng)
    with pytest.raises(InvalidArgumentError):
        sample_step(spec, state, 3, rng)


def test_phase_strategies_emit_pairs():
    for kind in ("universal", "memory"):
        seq = trace(SearcherSpec(kind, 3), None, 50, seed=1)
        assert all(len(step) == 2 for step in seq.boxes)
        flat = seq.flat()
        for j in range(1, 51):
            width = (4 if kind == "universal" else 3) * j
            assert all(1 <= b <= width for b in flat[2 * j - 2 : 2 * j])


def test_without_replacement_strategies_never_repeat():
    prior = make_pareto(0.5, 200)
    for spec in (SearcherSpec("uniform", 2), SearcherSpec("pareto", 2, 0.5),
                 SearcherSpec("astar", 2)):
        flat = [b for b in trace(spec, prior, 200, seed=3).flat() if b != NO_OP]
        assert sorted(flat) == list(range(1, 201))
    flat = trace(SearcherSpec("universal", 2), None, 300, seed=3).flat()
    assert len(set(flat)) == len(flat)


def test_astar_goes_quiet_after_support():
    prior = make_custom([3, 2, 1, 0])
    seq = trace(SearcherSpec("astar", 2), prior, 6, seed=0)
    assert sorted(seq.flat()[:3]) == [1, 2, 3]
    assert seq.flat()[3:] == [NO_OP] * 3


def test_pareto_windows_exact():
    W = pareto_windows(0.5, 2, 20)  # sigma = 1/3
    assert list(W[:8]) == [0, 3, 6, 9, 12, 15, 18, 20]
    W = pareto_windows(0.2, 3, 50)  # sigma = 1/11
    assert list(W[:5]) == [0, 11, 22, 33, 44]


@pytest.mark.parametrize("kind", RANDOM_KINDS + ("cord",))
@pytest.mark.parametrize("prior_name", sorted(PRIORS))
def test_compiled_walk_matches_python_sampler(kind, prior_name):
    prior = PRIORS[prior_name]
    if kind == "pareto" and prior.kind != "pareto":
        return
    k = 2
    spec = SearcherSpec(kind, k, prior.b if kind == "pareto" else None)
    config = SimConfig(prior, k, kind, trials=1, seed=99)
    alpha, active, q, windows = _strategy_arrays(config)
    x_max = prior.M
    t_max = 4 * prior.M
    trials = 25
    first = _kernels.first_check_times(_kernels.KIND_CODES[kind], k, 1, trials, 99, prior.M,
                                       alpha, active, q, windows, t_max, x_max)
    steps = t_max // 2 if kind in ("universal", "memory") else t_max
    for i in range(trials):
        seq = trace(spec, prior, steps, seed=99, agent_id=1, trial=i)
        np.testing.assert_array_equal(first[i], first_checks(seq.flat(), x_max))


def lockstep_discovery(spec, prior, seed, trial, n_agents, crash, horizon):
    """Reference: replay every agent's Python trace and take the earliest hit."""
    u = uniform_at(stream_key(seed, trial, 0, 1), 0)
    x = int(np.searchsorted(prior.cdf(), u, side="right")) + 1
    best = None
    for a in range(1, n_agents + 1):
        steps = horizon // 2 if spec.kind in ("universal", "memory") else horizon
        flat = trace(spec, prior, steps, seed=seed, agent_id=a, trial=trial).flat()
        stop = crash.get(a, math.inf)
        for t, box in enumerate(flat, start=1):
            if t >= stop:
                break
            if box == x:
                best = t if best is None else min(best, t)
                break
    return x, best


@pytest.mark.parametrize("kind", RANDOM_KINDS + ("cord",))
def test_lockstep_rounds_match_reference(kind):
    prior = make_pareto(0.5, 40)
    n_agents = 2 if kind == "cord" else 3
    crash = {1: 4}
    spec = SearcherSpec(kind, 2, 0.5 if kind == "pareto" else None)
    config = SimConfig(prior, n_agents, kind, trials=40, seed=4, crash_schedule=((1, 4),),
                       configured_k=2, b=0.5 if kind == "pareto" else None)
    alpha, active, q, windows = _strategy_arrays(config)
    crash_arr = np.array([4] + [2**60] * (n_agents - 1), np.int64)
    times, treasure, _, _ = _kernels.simulate_trials(
        _kernels.KIND_CODES[kind], 2, n_agents, crash_arr, 40, 0, 4, prior.cdf(), prior.M,
        alpha, active, q, windows, 10**6)
    for i in range(40):
        x, best = lockstep_discovery(spec, prior, 4, i, n_agents, crash, 4000)
        assert treasure[i] == x
        assert times[i] == (best if best is not None else -1)


# ---------------------------------------------------------------------------
# exact matrices


def test_matrices_are_valid():
    prior = make_pareto(0.5, 30)
    mats = [
        matrix_universal(30, 2), matrix_memory(30, 3), matrix_pareto(prior, 2),
        matrix_uniform(30), matrix_uniform_replacement(30, 2), matrix_astar(prior, 2),
    ]
    for N in mats:
        assert validate(N) == [], N.label


@pytest.mark.parametrize("kind", ["universal", "memory"])
@pytest.mark.parametrize("k", [2, 3, 5])
def test_phase_times_match_matrix(kind, k):
    x_max = 12
    N = (matrix_universal if kind == "universal" else matrix_memory)(x_max, k, horizon=40_000)
    from_matrix_lo = (N.survival**k).sum(axis=1)
    from_matrix_hi = from_matrix_lo + N.box_tail
    lo, hi = phase_box_times(kind, x_max, k)
    assert np.all(lo >= from_matrix_lo - 1e-9)
    assert np.all(hi <= from_matrix_hi + 1e-9)
    assert np.all(lo <= hi)


def test_phase_tail_bound_is_a_bound():
    # a short horizon's upper bracket must still cover a long horizon's lower one
    for kind in ("universal", "memory"):
        for k in (2, 3, 10):
            _, hi_short = phase_box_times(kind, 50, k, n_phases=200)
            lo_long, _ = phase_box_times(kind, 50, k)
            assert np.all(hi_short >= lo_long)


def test_universal_first_phase():
    # phase 1 window {1..k+1}: N(1,1) = 1 - 1/(k+1), N(1,2) = 1 - 2/(k+1)
    N = matrix_universal(3, 2, horizon=10)
    np.testing.assert_allclose(N.survival[0, :3], [1, 2 / 3, 1 / 3])
    N = matrix_memory(3, 3, horizon=10)
    np.testing.assert_allclose(N.survival[0, :3], [1, 2 / 3, 4 / 9])


def test_pareto_times_match_matrix():
    prior = make_pareto(0.4, 300)
    for k in (2, 3):
        N = matrix_pareto(prior, k)
        lo, hi = expected_time(N, prior, k)
        assert lo == hi
        fast = math.fsum(prior.masses * pareto_box_times(prior, k))
        assert fast == pytest.approx(lo, rel=1e-12)


def test_pareto_needs_exponent():
    with pytest.raises(InvalidArgumentError):
        matrix_pareto(make_uniform(10), 2)
    N = matrix_pareto(make_uniform(10), 2, b=0.5)
    assert validate(N) == []


@pytest.mark.parametrize("kind", RANDOM_KINDS)
def test_sampled_survival_matches_matrix(kind):
    prior = make_pareto(0.5, 30)
    k = 2
    t_max = 24
    config = SimConfig(prior, k, kind, trials=40_000, seed=17, b=0.5 if kind == "pareto" else None)
    emp = empirical_survival(config, 30, t_max)
    if kind == "universal":
        exact = matrix_universal(30, k).survival[:, : t_max + 1]
    elif kind == "memory":
        exact = matrix_memory(30, k).survival[:, : t_max + 1]
    elif kind == "pareto":
        exact = matrix_pareto(prior, k).survival[:, : t_max + 1]
    elif kind == "uniform":
        exact = matrix_uniform(30).survival[:, : t_max + 1]
    elif kind == "uniform_replacement":
        exact = matrix_uniform_replacement(30, k).survival[:, : t_max + 1]
    else:
        exact = matrix_astar(prior, k).survival[:, : t_max + 1]
        exact = np.hstack((exact, np.repeat(exact[:, -1:], t_max + 1 - exact.shape[1], 1)))
    se = np.sqrt(np.maximum(exact * (1 - exact), 1e-12) / config.trials)
    z = np.abs(emp - exact) / se
    assert np.max(z[exact * (1 - exact) > 1e-9], initial=0) < 5.5
    degenerate = exact * (1 - exact) <= 1e-9
    np.testing.assert_allclose(emp[degenerate], exact[degenerate], atol=1e-12)


def test_cord_survival_is_deterministic():
    config = SimConfig(make_uniform(6), 2, "cord", trials=10, seed=0)
    emp = empirical_survival(config, 6, 3, agent_id=2)
    # agent 2 of 2 checks boxes 2, 4, 6
    assert emp[1, 1] == 0 and emp[3, 1] == 1 and emp[3, 2] == 0 and emp[0, 3] == 1


def test_astar_next_check_ignores_history():
    """Given which boxes are still unchecked, the next pick must not depend on
    the order in which the others were checked."""
    prior = make_custom([6, 5, 4, 3, 3, 2, 1])
    spec = SearcherSpec("astar", 2)
    sch = build_L(prior, 2)
    t = 3
    rows = {}
    for trial in range(30_000):
        seq = trace(spec, prior, t, seed=123, trial=trial).flat()
        history = tuple(seq[: t - 1])  # ordered
        rows.setdefault(history, []).append(seq[t - 1])
    # among histories that leave the same unchecked set, the next-box law is shared
    by_set = {}
    for history, nxt in rows.items():
        by_set.setdefault(frozenset(history), []).append(nxt)
    tested = 0
    for checked, groups in by_set.items():
        orders = [h for h in rows if frozenset(h) == checked and len(rows[h]) >= 200]
        if len(orders) < 2:
            continue
        boxes = sorted({b for h in orders for b in rows[h]})
        table = np.array([[rows[h].count(b) for b in boxes] for h in orders])
        table = table[:, table.sum(axis=0) > 0]
        if table.shape[1] < 2:
            continue
        assert stats.chi2_contingency(table).pvalue > 1e-4
        tested += 1
    assert tested >= 1
    # and the marginal check rate of an old box matches 1 - alpha(t)/alpha(t-1)
    w_old, _ = sch.check_probabilities(t)
    old_box = 1
    hits = total = 0
    for history, nxt in rows.items():
        if old_box not in history:
            total += len(nxt)
            hits += sum(1 for b in nxt if b == old_box)
    rate = hits / total
    assert abs(rate - w_old) < 5 * math.sqrt(w_old * (1 - w_old) / total)
