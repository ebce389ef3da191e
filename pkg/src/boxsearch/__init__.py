"""Expected discovery times for non-communicating agents searching ordered boxes."""

from ._validation import (
    IncompleteMatrixError,
    InvalidArgumentError,
    OrderViolationError,
    RunawayError,
)
from .distributions import BoxPrior, load_prior, make_custom, make_pareto, make_uniform, save_prior
from .estimators import BoxSearcher, box_times, exact_time
from .montecarlo import SimConfig, SimOutcome, run, run_with_faults
from .searchers import KINDS, SearcherSpec, trace
from .strategy_engine import StrategyMatrix, build_L, cord_time, expected_time, validate

__all__ = [
    "BoxPrior",
    "BoxSearcher",
    "IncompleteMatrixError",
    "InvalidArgumentError",
    "KINDS",
    "OrderViolationError",
    "RunawayError",
    "SearcherSpec",
    "SimConfig",
    "SimOutcome",
    "StrategyMatrix",
    "box_times",
    "build_L",
    "cord_time",
    "exact_time",
    "expected_time",
    "load_prior",
    "make_custom",
    "make_pareto",
    "make_uniform",
    "run",
    "run_with_faults",
    "save_prior",
    "trace",
    "validate",
]
