"""Priors over boxes: uniform, Pareto ``r_{b,M}`` and custom finite vectors.

Boxes are 1-based in every public surface; arrays are 0-based internally so
``masses[x - 1]`` is the mass of box ``x``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import (
    InvalidArgumentError,
    check_k,
    check_masses,
    check_positive_int,
)

SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class BoxPrior:
    """A non-increasing probability vector over boxes ``1..M``.

    ``kind`` is ``"custom"``, ``"uniform"`` or ``"pareto"``; ``b`` is set only
    for Pareto priors. Instances are immutable and safe to share.
    """

    masses: np.ndarray
    kind: str = "custom"
    b: float | None = None

    def __post_init__(self):
        m = np.array(self.masses, dtype=np.float64)
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)
        if abs(math.fsum(m) - 1.0) > SUM_TOL:
            raise InvalidArgumentError(f"masses sum to {math.fsum(m)!r}, not 1")
        if np.any(np.diff(m) > 0):
            raise InvalidArgumentError("masses must be non-increasing")

    @property
    def M(self) -> int:
        return int(self.masses.size)

    @property
    def support(self) -> int:
        """Number of boxes with positive mass (a prefix of the boxes)."""
        return int(np.count_nonzero(self.masses > 0))

    def cdf(self) -> np.ndarray:
        c = np.cumsum(self.masses)
        c[-1] = 1.0
        return c

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "M": self.M}
        if self.b is not None:
            out["b"] = self.b
        out["masses"] = [float(v) for v in self.masses]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "BoxPrior":
        kind = data.get("kind", "custom")
        if kind == "uniform":
            return make_uniform(int(data["M"]))
        if kind == "pareto":
            return make_pareto(float(data["b"]), int(data["M"]))
        if kind != "custom":
            raise InvalidArgumentError(f"unknown prior kind {kind!r}")
        prior = make_custom(data["masses"])
        if "M" in data and int(data["M"]) != prior.M:
            raise InvalidArgumentError("M does not match the length of masses")
        return prior

    def __eq__(self, other):
        if not isinstance(other, BoxPrior):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.b == other.b
            and np.array_equal(self.masses, other.masses)
        )

    def __hash__(self):
        return hash((self.kind, self.b, self.masses.tobytes()))

    def __repr__(self):
        extra = f", b={self.b}" if self.b is not None else ""
        return f"BoxPrior(kind={self.kind!r}, M={self.M}{extra})"


@dataclass(frozen=True, eq=False)
class QWeights:
    """``q(x) = p(x)^(-1/(k-1))``, with ``inf`` standing in for zero-mass boxes."""

    q: np.ndarray
    k: int
    _finite: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        q = np.array(self.q, dtype=np.float64)
        q.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "_finite", np.isfinite(q))

    def to_masses(self) -> np.ndarray:
        """Invert the map: ``p(x)`` proportional to ``q(x)^-(k-1)``, renormalized."""
        p = np.zeros_like(self.q)
        p[self._finite] = self.q[self._finite] ** -(self.k - 1)
        return p / p.sum()


def make_uniform(M) -> BoxPrior:
    M = check_positive_int(M, "M")
    return BoxPrior(np.full(M, 1.0 / M), kind="uniform")


def make_pareto(b, M) -> BoxPrior:
    """Pareto prior ``r_{b,M}(x) = I / x^b`` on boxes ``1..M``."""
    M = check_positive_int(M, "M")
    b = float(b)
    if not (b > 0 and math.isfinite(b)):
        raise InvalidArgumentError(f"b must be a positive real, got {b!r}")
    weights = np.arange(1, M + 1, dtype=np.float64) ** -b
    masses = weights / math.fsum(weights)
    # b -> 0 can round a tail mass one ulp above its predecessor
    masses = np.minimum.accumulate(masses)
    masses /= math.fsum(masses)
    return BoxPrior(masses, kind="pareto", b=b)


def make_custom(masses) -> BoxPrior:
    """Normalize ``masses``; non-monotone input is rejected, never sorted."""
    arr = check_masses(masses)
    arr = np.minimum.accumulate(arr)
    arr /= math.fsum(arr)
    return BoxPrior(arr, kind="custom")


def q_weights(prior: BoxPrior, k) -> QWeights:
    k = check_k(k)
    p = prior.masses
    q = np.full(p.shape, np.inf)
    pos = p > 0
    q[pos] = p[pos] ** (-1.0 / (k - 1))
    return QWeights(q, k)


def parse_prior_spec(spec: str) -> BoxPrior:
    """Parse ``uniform:M``, ``pareto:b,M`` or ``file:<path>``."""
    kind, _, rest = spec.partition(":")
    if not rest:
        raise InvalidArgumentError(f"prior spec {spec!r} must look like kind:args")
    if kind == "uniform":
        try:
            M = int(rest)
        except ValueError:
            raise InvalidArgumentError(f"bad uniform spec {spec!r}; want uniform:M") from None
        return make_uniform(M)
    if kind == "pareto":
        try:
            b, M = rest.split(",")
            return make_pareto(float(b), int(M))
        except ValueError as exc:
            if isinstance(exc, InvalidArgumentError):
                raise
            raise InvalidArgumentError(f"bad pareto spec {spec!r}; want pareto:b,M") from exc
    if kind == "file":
        return load_prior(rest)
    raise InvalidArgumentError(f"unknown prior kind {kind!r}")


def load_prior(path) -> BoxPrior:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidArgumentError(f"{path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise InvalidArgumentError(f"{path} must hold a JSON object")
    try:
        return BoxPrior.from_dict(data)
    except (KeyError, TypeError) as exc:
        raise InvalidArgumentError(f"{path} is missing or mistypes a field: {exc}") from None


def save_prior(prior: BoxPrior, path) -> None:
    Path(path).write_text(json.dumps(prior.to_dict(), indent=2) + "\n")
