"""Input validation helpers shared by the estimators, library functions and CLI."""

import numbers

import numpy as np


class InvalidArgumentError(ValueError):
    """Raised when an argument is outside the documented domain."""


class OrderViolationError(ValueError):
    """Raised when box masses are not non-increasing in the box index."""


class IncompleteMatrixError(ValueError):
    """Raised when a survival matrix cannot bound the time it has truncated."""


class RunawayError(RuntimeError):
    """Raised when an exhaustive search fails to terminate within its step cap."""


def check_k(k, minimum=2, name="k"):
    """Return ``k`` as an int, rejecting non-integers and values below ``minimum``."""
    if isinstance(k, bool) or not isinstance(k, numbers.Integral):
        if isinstance(k, numbers.Real) and float(k).is_integer():
            k = int(k)
        else:
            raise InvalidArgumentError(f"{name} must be an integer, got {k!r}")
    k = int(k)
    if k < minimum:
        raise InvalidArgumentError(f"{name} must be >= {minimum}, got {k}")
    return k


def check_positive_int(value, name):
    return check_k(value, minimum=1, name=name)


def check_masses(masses, tol=1e-12):
    """Validate a raw mass vector and return it normalized as float64.

    Zero-mass boxes may only form a suffix; any increasing adjacent pair is
    an order violation.
    """
    arr = np.asarray(masses, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidArgumentError("masses must be a non-empty 1-D vector")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("masses must be finite")
    if np.any(arr < 0):
        raise InvalidArgumentError("masses must be non-negative")
    total = float(np.sum(arr))
    if total <= 0.0:
        raise InvalidArgumentError("masses must not all be zero")
    rises = np.nonzero(np.diff(arr) > tol * max(1.0, float(arr.max())))[0]
    if rises.size:
        i = int(rises[0])
        raise OrderViolationError(
            f"masses increase from box {i + 1} ({arr[i]!r}) to box {i + 2} ({arr[i + 1]!r})"
        )
    return arr / total


def check_prior(prior):
    """Coerce ``prior`` to a :class:`BoxPrior`; array-likes become custom priors."""
    from .distributions import BoxPrior, make_custom

    if isinstance(prior, BoxPrior):
        return prior
    return make_custom(prior)
