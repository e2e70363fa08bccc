"""Greedy local-search baseline and the per-instance time limit it defines."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernels as K
from .qubo import QuboModel, as_assignment, build_delta_cache, evaluate

DEFAULT_RESTARTS = 1500
DEFAULT_SEEDS = (0, 1, 2, 3, 4)
TIME_FLOOR = 0.001
LIMIT_MARGIN = Fraction(11, 10)


def _arrays(model: QuboModel):
    integral = model.is_integer and model.int64_safe and 4 * model.row_bound < 2 ** 62
    dtype = np.int64 if integral else np.float64
    return model.diag.astype(dtype), model.data.astype(dtype), dtype


def greedy_local_search(model: QuboModel, seed: int, initial=None) -> tuple[np.ndarray, object]:
    """First-improvement descent from a uniform random (or given) start.

    The lowest index with a negative flip delta is flipped and the scan
    restarts at index 0; stops at a 1-flip local optimum.
    """
    if initial is None:
        x = np.random.default_rng(seed).integers(0, 2, model.n).astype(np.int8)
    else:
        x = as_assignment(model, initial).copy()
    diag, data, dtype = _arrays(model)
    dE = np.empty(model.n, dtype=dtype)
    K._resync(x, dE, diag, model.indptr, model.indices, data)
    K.greedy_descent(x, dE, model.indptr, model.indices, data)
    return x, evaluate(model, x)


@dataclass
class TimeLimitReport:
    per_seed_seconds: list[float]
    baseline_seconds: float
    seeds: list[int]
    restarts: int = DEFAULT_RESTARTS
    instance: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def time_restarts(model: QuboModel, restarts: int, seed: int) -> float:
    """Wall time of ``restarts`` random-start greedy descents (single thread)."""
    diag, data, dtype = _arrays(model)
    x = np.empty(model.n, dtype=np.int8)
    dE = np.empty(model.n, dtype=dtype)
    if model.n:
        K.greedy_restarts(diag, model.indptr, model.indices, data, 1, seed, x, dE)  # compile
    t0 = time.perf_counter()
    if model.n:
        K.greedy_restarts(diag, model.indptr, model.indices, data, restarts, seed, x, dE)
    return time.perf_counter() - t0


def baseline_time_limit(model: QuboModel, restarts: int = DEFAULT_RESTARTS,
                        seeds=DEFAULT_SEEDS, instance: str | None = None) -> TimeLimitReport:
    """Mean over seeds of the time for ``restarts`` greedy restarts, floored at 1 ms."""
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    seeds = [int(s) for s in seeds]
    per_seed = [time_restarts(model, restarts, s) for s in seeds]
    mean = sum(per_seed) / len(per_seed)
    return TimeLimitReport(per_seed, max(TIME_FLOOR, mean), seeds, restarts, instance)


def _decimal(v) -> Fraction:
    # floats are taken at their shortest decimal repr, so 0.4 means 4/10
    return Fraction(repr(v)) if isinstance(v, float) else Fraction(v)


def adjusted_limit(T_baseline: float, offset: float) -> int:
    """``max(1, min(floor(T), floor(1.1 T - offset)))`` in exact decimal arithmetic."""
    if T_baseline <= 0:
        raise ValueError("T_baseline must be positive")
    if offset < 0:
        raise ValueError("offset must be non-negative")
    T = _decimal(T_baseline)
    return max(1, min(math.floor(T), math.floor(T * LIMIT_MARGIN - _decimal(offset))))


__all__ = ["greedy_local_search", "TimeLimitReport", "baseline_time_limit", "adjusted_limit",
           "time_restarts", "DEFAULT_RESTARTS", "DEFAULT_SEEDS"]
