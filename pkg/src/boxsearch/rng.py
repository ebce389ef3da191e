"""Counter-based random streams.

Every draw is a pure function of ``(seed, trial, agent, purpose, counter)``:
the stream key is a SplitMix64 hash chain over the identifiers and the n-th
uniform is the SplitMix64 finalizer applied to ``key + (n + 1) * GAMMA``.
The same arithmetic is compiled with numba for the simulation kernels, so a
Python trace and a compiled run see identical numbers.
"""

import numba as nb
import numpy as np

MASK = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
MUL1 = 0xBF58476D1CE4E5B9
MUL2 = 0x94D049BB133111EB
SEED_SALT = 0x5851F42D4C957F2D

PURPOSE_AGENT = 0
PURPOSE_TREASURE = 1


def mix64(z):
    z &= MASK
    z = ((z ^ (z >> 30)) * MUL1) & MASK
    z = ((z ^ (z >> 27)) * MUL2) & MASK
    return z ^ (z >> 31)


def stream_key(seed, trial, agent, purpose):
    h = mix64(int(seed) ^ SEED_SALT)
    h = mix64(h + (int(trial) * GAMMA & MASK))
    return mix64(h + (int(agent) * GAMMA & MASK) + int(purpose))


def uniform_at(key, counter):
    return (mix64(key + (counter + 1) * GAMMA) >> 11) * (1.0 / 9007199254740992.0)


class CounterRNG:
    """Sequential view of one ``(seed, trial, agent, purpose)`` stream."""

    def __init__(self, seed=0, trial=0, agent=0, purpose=PURPOSE_AGENT):
        self.key = stream_key(seed, trial, agent, purpose)
        self.counter = 0

    def random(self):
        u = uniform_at(self.key, self.counter)
        self.counter += 1
        return u


# compiled twins; every constant is uint64 so numba never promotes to float
_U_MUL1 = np.uint64(MUL1)
_U_MUL2 = np.uint64(MUL2)
_U_GAMMA = np.uint64(GAMMA)
_U_SALT = np.uint64(SEED_SALT)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
_ONE = np.uint64(1)


@nb.njit(cache=True, inline="always")
def nb_mix64(z):
    z = (z ^ (z >> _U30)) * _U_MUL1
    z = (z ^ (z >> _U27)) * _U_MUL2
    return z ^ (z >> _U31)


@nb.njit(cache=True)
def nb_stream_key(seed, trial, agent, purpose):
    h = nb_mix64(np.uint64(seed) ^ _U_SALT)
    h = nb_mix64(h + np.uint64(trial) * _U_GAMMA)
    return nb_mix64(h + np.uint64(agent) * _U_GAMMA + np.uint64(purpose))


@nb.njit(cache=True, inline="always")
def nb_uniform_at(key, counter):
    z = nb_mix64(key + (np.uint64(counter) + _ONE) * _U_GAMMA)
    return np.float64(z >> _U11) * (1.0 / 9007199254740992.0)
