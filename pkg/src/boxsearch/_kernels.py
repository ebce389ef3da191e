"""Compiled simulation kernels mirroring ``searchers._step_query``.

Agents never interact, so each one is walked on its own state; the trial
loop only has to keep their clocks consistent. Stream consumption matches
the Python sampler draw for draw.
"""

import numba as nb
import numpy as np

from .rng import nb_stream_key, nb_uniform_at

CORD, UNIVERSAL, MEMORY, ASTAR, PARETO, UNIFORM_REPL, UNIFORM = range(7)
KIND_CODES = {
    "cord": CORD,
    "universal": UNIVERSAL,
    "memory": MEMORY,
    "astar": ASTAR,
    "pareto": PARETO,
    "uniform_replacement": UNIFORM_REPL,
    "uniform": UNIFORM,
}


@nb.njit(cache=True)
def _grow(pool, n, window, upto):
    for box in range(window + 1, upto + 1):
        pool[n] = box
        n += 1
    return n


@nb.njit(cache=True)
def pool_size(kind, k, M, t_to):
    """Pool capacity an agent needs to run through query ``t_to``."""
    if kind == UNIVERSAL:
        return (k + 1) * ((t_to + 1) // 2)
    return max(M, 1)


@nb.njit(cache=True, inline="always")
def _seen(box, t, record, x_max):
    if x_max > 0 and 1 <= box <= x_max and record[box - 1] == 0:
        record[box - 1] = t


@nb.njit(cache=True, inline="always")
def _take(pool, n, u):
    idx = min(int(u * n), n - 1)
    box = pool[idx]
    pool[idx] = pool[n - 1]
    return box


# One walker per strategy keeps the per-query loop free of strategy branches.
# Each advances queries t_from..t_to and returns the time target was checked
# or -1, updating state = [pool length, boxes added, draws used, no-ops].


@nb.njit(cache=True)
def _walk_cord(k, agent_id, target, t_from, t_to, record, x_max):
    for t in range(t_from, t_to + 1):
        box = (t - 1) * k + agent_id
        if box == target:
            return t
        _seen(box, t, record, x_max)
    return -1


@nb.njit(cache=True)
def _walk_universal(k, key, target, t_from, t_to, pool, state, record, x_max):
    n, window, draw, no_ops = state[0], state[1], state[2], state[3]
    found = -1
    for t in range(t_from, t_to + 1):
        u = nb_uniform_at(key, draw)
        draw += 1
        if t % 2 == 1:
            upto = (k + 1) * ((t + 1) // 2)
            n = _grow(pool, n, window, upto)
            window = upto
        box = 0
        if n > 0:
            box = _take(pool, n, u)
            n -= 1
        else:
            no_ops += 1
        if box == target:
            found = t
            break
        _seen(box, t, record, x_max)
    state[0], state[1], state[2], state[3] = n, window, draw, no_ops
    return found


@nb.njit(cache=True)
def _walk_memory(k, key, target, t_from, t_to, state, record, x_max):
    draw = state[2]
    found = -1
    for t in range(t_from, t_to + 1):
        u = nb_uniform_at(key, draw)
        draw += 1
        width = k * ((t + 1) // 2)
        box = min(int(u * width), width - 1) + 1
        if box == target:
            found = t
            break
        _seen(box, t, record, x_max)
    state[2] = draw
    return found


@nb.njit(cache=True)
def _walk_replacement(M, key, target, t_from, t_to, state, record, x_max):
    draw = state[2]
    found = -1
    for t in range(t_from, t_to + 1):
        u = nb_uniform_at(key, draw)
        draw += 1
        box = min(int(u * M), M - 1) + 1
        if box == target:
            found = t
            break
        _seen(box, t, record, x_max)
    state[2] = draw
    return found


@nb.njit(cache=True)
def _walk_window(M, windows, use_windows, key, target, t_from, t_to, pool, state, record,
                 x_max):
    """Uniform among unchecked boxes of a window: ``windows[t]`` (pareto) or all ``M``."""
    n, window, draw, no_ops = state[0], state[1], state[2], state[3]
    found = -1
    for t in range(t_from, t_to + 1):
        u = nb_uniform_at(key, draw)
        draw += 1
        upto = windows[min(t, M)] if use_windows else M
        if upto > window:
            n = _grow(pool, n, window, upto)
            window = upto
        box = 0
        if n > 0:
            box = _take(pool, n, u)
            n -= 1
        else:
            no_ops += 1
        if box == target:
            found = t
            break
        _seen(box, t, record, x_max)
    state[0], state[1], state[2], state[3] = n, window, draw, no_ops
    return found


@nb.njit(cache=True)
def _walk_astar(alpha, active, q, key, target, t_from, t_to, pool, state, record, x_max):
    n, draw, no_ops = state[0], state[2], state[3]
    S = alpha.size - 1
    found = -1
    for t in range(t_from, t_to + 1):
        u = nb_uniform_at(key, draw)
        draw += 1
        box = 0
        if t <= S:
            a_now = alpha[t]
            w_old = 0.0
            if t > 1:
                w_old = 1.0 - a_now / alpha[t - 1]
            p_pool = n * w_old
            lo = active[t - 1]
            hi = active[t]
            if u < p_pool:
                idx = min(int(u / w_old), n - 1)
                box = pool[idx]
                pool[idx] = pool[n - 1]
                n -= 1
                for x in range(lo + 1, hi + 1):
                    pool[n] = x
                    n += 1
            else:
                r = u - p_pool
                cum = 0.0
                chosen = -1
                for x in range(lo + 1, hi + 1):
                    cum += 1.0 - a_now * q[x - 1]
                    if r < cum:
                        chosen = x
                        break
                if chosen < 0:
                    # drift guard: u landed past the last cumulative weight
                    for x in range(hi, lo, -1):
                        if 1.0 - a_now * q[x - 1] > 0.0:
                            chosen = x
                            break
                    if chosen < 0 and n > 0:
                        chosen = pool[n - 1]
                        n -= 1
                for x in range(lo + 1, hi + 1):
                    if x != chosen:
                        pool[n] = x
                        n += 1
                if chosen > 0:
                    box = chosen
        if box == 0:
            no_ops += 1
        if box == target:
            found = t
            break
        _seen(box, t, record, x_max)
    state[0], state[2], state[3] = n, draw, no_ops
    return found


@nb.njit(cache=True, inline="always")
def _walk(kind, k, agent_id, key, target, t_from, t_to, M, alpha, active, q, windows,
          pool, state, record, x_max):
    """Advance one agent through queries ``t_from..t_to``.

    ``state`` holds ``[pool length, boxes added, draws used, no-ops]`` and is
    updated in place so a walk can resume where the previous one stopped.
    Returns the time ``target`` was checked, or -1. When ``x_max > 0`` the
    first check time of every box ``<= x_max`` is written into ``record``.
    """
    if kind == CORD:
        return _walk_cord(k, agent_id, target, t_from, t_to, record, x_max)
    if kind == UNIVERSAL:
        return _walk_universal(k, key, target, t_from, t_to, pool, state, record, x_max)
    if kind == MEMORY:
        return _walk_memory(k, key, target, t_from, t_to, state, record, x_max)
    if kind == UNIFORM_REPL:
        return _walk_replacement(M, key, target, t_from, t_to, state, record, x_max)
    if kind == PARETO or kind == UNIFORM:
        return _walk_window(M, windows, kind == PARETO, key, target, t_from, t_to, pool,
                            state, record, x_max)
    return _walk_astar(alpha, active, q, key, target, t_from, t_to, pool, state, record,
                       x_max)


CHUNK = 2048


@nb.njit(cache=True, inline="always")
def _one_trial(kind, k, n_agents, crash, trial, seed, cdf, M, alpha, active, q, windows,
               cap, keys, last, states, done, pools, empty):
    """Run one trial on caller-owned scratch; ``pools`` is returned in case it grew.

    Returns ``(time or -1, treasure box, no-ops, hit cap, pools)``.
    """
    tkey = nb_stream_key(seed, trial, 0, 1)
    u = nb_uniform_at(tkey, 0)
    x = np.searchsorted(cdf, u, side="right") + 1
    if x > M:
        x = M
    for a in range(n_agents):
        keys[a] = nb_stream_key(seed, trial, a + 1, 0)
        last[a] = min(crash[a] - 1, cap)
        done[a] = 0
        for c in range(4):
            states[a, c] = 0
    horizon = 16
    best = cap + 1
    while True:
        need = pool_size(kind, k, M, min(horizon, cap))
        if need > pools.shape[1]:
            bigger = np.empty((n_agents, max(need, 2 * pools.shape[1])), np.int64)
            for a in range(n_agents):
                for c in range(states[a, 0]):
                    bigger[a, c] = pools[a, c]
            pools = bigger
        for a in range(n_agents):
            t_to = min(horizon, best - 1, last[a])
            if t_to > done[a]:
                found = _walk(kind, k, a + 1, keys[a], x, done[a] + 1, t_to, M, alpha,
                              active, q, windows, pools[a], states[a], empty, 0)
                if found > 0:
                    best = found
                    done[a] = found
                else:
                    done[a] = t_to
        if best <= horizon:
            break
        exhausted = True
        for a in range(n_agents):
            if done[a] < last[a]:
                exhausted = False
        if exhausted:
            break
        horizon *= 2
    ops = 0
    capped = 0
    for a in range(n_agents):
        ops += states[a, 3]
        if last[a] == cap and done[a] == cap:
            capped = 1
    if best <= cap:
        return best, x, ops, 0, pools
    return -1, x, ops, capped, pools


@nb.njit(cache=True, parallel=True)
def simulate_trials(kind, k, n_agents, crash, trials, trial_offset, seed, cdf, M,
                    alpha, active, q, windows, cap):
    """Discovery times for ``trials`` independent trials.

    ``crash[a]`` is the first query time agent ``a + 1`` no longer performs.
    Agents advance in rounds to a doubling horizon, each stopping before the
    best discovery time seen so far, which reproduces lockstep timing.
    A trial nobody finds by ``cap`` gets time ``-1``; ``hit_cap[i] = 1`` marks
    that some live agent exhausted its steps. Trials run in chunks that share
    scratch arrays; every trial draws only from its own streams.
    """
    times = np.empty(trials, np.int64)
    treasure = np.empty(trials, np.int64)
    no_ops = np.zeros(trials, np.int64)
    hit_cap = np.zeros(trials, np.int8)
    n_chunks = (trials + CHUNK - 1) // CHUNK
    for c in nb.prange(n_chunks):
        keys = np.empty(n_agents, np.uint64)
        last = np.empty(n_agents, np.int64)  # last query each agent may perform
        states = np.zeros((n_agents, 4), np.int64)
        done = np.zeros(n_agents, np.int64)
        pools = np.empty((n_agents, pool_size(kind, k, M, min(16, cap))), np.int64)
        empty = np.zeros(0, np.int64)
        for i in range(c * CHUNK, min(trials, (c + 1) * CHUNK)):
            t, x, ops, capped, pools = _one_trial(
                kind, k, n_agents, crash, trial_offset + i, seed, cdf, M, alpha, active, q,
                windows, cap, keys, last, states, done, pools, empty,
            )
            times[i] = t
            treasure[i] = x
            no_ops[i] = ops
            hit_cap[i] = capped
    return times, treasure, no_ops, hit_cap


@nb.njit(cache=True, parallel=True)
def first_check_times(kind, k, agent_id, trials, seed, M, alpha, active, q, windows,
                      t_max, x_max):
    """First query time at which one tagged agent checks each box (0 = not by ``t_max``)."""
    out = np.zeros((trials, x_max), np.int64)
    size = pool_size(kind, k, M, t_max)
    for i in nb.prange(trials):
        key = nb_stream_key(seed, i, agent_id, 0)
        pool = np.empty(size, np.int64)
        state = np.zeros(4, np.int64)
        _walk(kind, k, agent_id, key, -1, 1, t_max, M, alpha, active, q, windows,
              pool, state, out[i], x_max)
    return out
