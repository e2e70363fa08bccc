"""Fitted runtime model for run/iteration planning and the time-limit offset sweep."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .baseline import adjusted_limit

SIZE_CLASSES = ("x-small", "small", "medium", "large")
SIZE_BOUNDS = {"x-small": (0, 1024), "small": (1024, 2048), "medium": (2048, 4096), "large": (4096, 8192)}

MIN_RUNS = 16
MAX_RUNS = 128
RUN_STEP = 16
MIN_ITERATIONS = 10_000
MAX_ITERATIONS = 2_000_000_000
BUDGET_FRACTION = 0.9
STOP_FRACTION = 0.99


@dataclass(frozen=True)
class FitParams:
    a: float
    b: float
    c: float
    d: float
    e: float
    k: float
    g: float
    h: float
    size_class: str = ""


DEFAULT_FITS = {
    "x-small": FitParams(2.0081e-6, 13.2942, -0.5576e-7, 0.0007, 2.9877e-6, -0.0101, -0.0020, 4.3422, "x-small"),
    "small": FitParams(2.0017e-6, 48.6364, 6.2894e-7, -0.0007, 3.5768e-6, 0.7396, 0.0056, 5.3949, "small"),
    "medium": FitParams(2.0010e-6, 193.8656, 7.8667e-7, -0.0015, 4.1800e-6, 1.8767, -0.0056, 59.8780, "medium"),
    "large": FitParams(2.0005e-6, 126.2170, 7.4802e-7, -0.0002, -9.6817e-6, -3.7253, 0.1548, -264.9900, "large"),
}


def load_fit_params(path) -> dict[str, FitParams]:
    """Read ``{"x-small": {"a": ..., ...}, ...}``; missing classes keep the defaults."""
    raw = json.loads(Path(path).read_text())
    fits = dict(DEFAULT_FITS)
    for cls, vals in raw.items():
        if cls not in SIZE_BOUNDS:
            raise ValueError(f"unknown size class {cls!r} in {path}")
        fits[cls] = FitParams(**{**vals, "size_class": cls})
    return fits


def size_class_for(n: int) -> str:
    for cls, (lo, hi) in SIZE_BOUNDS.items():
        if lo <= n < hi:
            return cls
    raise ValueError(f"no fitted runtime class for n={n} (supported: n < 8192)")


def annealing_time(runs: int, iterations: int, p: FitParams) -> float:
    return p.a * (runs * iterations) + p.b


def cpu_time(runs: int, n: int, p: FitParams) -> float:
    n2 = n * n
    return p.c * (n2 * runs) + p.d * (n * runs) + p.e * n2 + p.k * runs + p.g * n + p.h


@dataclass(frozen=True)
class RuntimePlan:
    runs: int
    iterations: int
    predicted_total: float
    fixed_overheads: float
    size_class: str = ""


class InfeasiblePlanError(ValueError):
    def __init__(self, minimum_prediction: float, time_limit: float):
        super().__init__(f"time limit {time_limit} s is below the minimum predicted runtime "
                         f"{minimum_prediction:.6g} s")
        self.minimum_prediction = minimum_prediction
        self.time_limit = time_limit


def predicted_total(n: int, runs: int, iterations: int, fixed_overheads: float, p: FitParams) -> float:
    return annealing_time(runs, iterations, p) + cpu_time(runs, n, p) + fixed_overheads


def max_iterations_within(n: int, runs: int, budget: float, fixed_overheads: float, p: FitParams) -> int:
    """Largest integer ``it`` with predicted_total(it) <= budget (may be < 1)."""
    rest = budget - cpu_time(runs, n, p) - fixed_overheads - p.b
    it = math.floor(rest / (p.a * runs))
    # absorb float rounding in the division
    while predicted_total(n, runs, it + 1, fixed_overheads, p) <= budget:
        it += 1
    while it > 0 and predicted_total(n, runs, it, fixed_overheads, p) > budget:
        it -= 1
    return it


def plan_runs_iterations(n: int, time_limit: float, fixed_overheads: float = 0.0,
                         fits: dict[str, FitParams] | None = None,
                         stop_fraction: float = STOP_FRACTION) -> RuntimePlan:
    """Runs/iterations that fill 90% of ``time_limit`` under the fitted model.

    Starts at 16 runs; the iteration count is solved from the annealing-time
    fit and clamped to [1e4, 2e9]. When the solved count exceeds the cap, runs
    grow by 16 and the search restarts. Stops once the prediction reaches
    ``stop_fraction * time_limit`` or runs are exhausted.
    """
    if time_limit <= fixed_overheads:
        raise ValueError("time_limit must exceed fixed_overheads")
    cls = size_class_for(n)
    p = (fits or DEFAULT_FITS)[cls]
    budget = BUDGET_FRACTION * time_limit
    runs = MIN_RUNS
    while True:
        it = max(MIN_ITERATIONS, max_iterations_within(n, runs, budget, fixed_overheads, p))
        overflow = it > MAX_ITERATIONS
        it = min(it, MAX_ITERATIONS)
        total = predicted_total(n, runs, it, fixed_overheads, p)
        if total > time_limit:
            if runs == MIN_RUNS:
                raise InfeasiblePlanError(total, time_limit)
            raise AssertionError("unreachable: larger run counts only follow a capped plan")
        if total >= stop_fraction * time_limit or not overflow or runs + RUN_STEP > MAX_RUNS:
            return RuntimePlan(runs, it, total, fixed_overheads, cls)
        # cap overflow: try the next run count, but keep the capped plan if it no longer fits
        nxt = runs + RUN_STEP
        if predicted_total(n, nxt, MIN_ITERATIONS, fixed_overheads, p) > time_limit:
            return RuntimePlan(runs, it, total, fixed_overheads, cls)
        runs = nxt


# --- offset sweep ---------------------------------------------------------------------

@dataclass
class SweepRow:
    offset: float
    violations: int
    avg_accuracy_pct: float
    n_instances: int
    missing: int


@dataclass
class SweepTable:
    rows: list[SweepRow] = field(default_factory=list)
    best: dict[str, object] = field(default_factory=dict)

    COLUMNS = ("offset", "violations", "avg_accuracy_pct")

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for r in self.rows:
            w.writerow([repr(float(r.offset)), r.violations, f"{r.avg_accuracy_pct:.17g}"])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def as_dicts(self) -> list[dict]:
        return [asdict(r) for r in self.rows]


def _attr(inst, name, idx):
    return getattr(inst, name) if hasattr(inst, name) else inst[idx]


def _ratio(cut, best) -> Fraction:
    if best == 0:
        return Fraction(1) if cut == 0 else Fraction(0)
    return Fraction(cut) / Fraction(best)


def offset_sweep(instances: Sequence, offsets: Iterable[float],
                 solver: Callable[[object, int], tuple[object, float]],
                 safety_margin: float = 0.10) -> SweepTable:
    """Run ``solver(instance, limit)`` under ``adjusted_limit(baseline, offset)``
    for every instance and offset.

    Instances need ``id`` and ``baseline_seconds`` (attributes, or items 0
    and 1 of a tuple). A violation is a runtime above
    ``(1 + safety_margin) * baseline_seconds``. Accuracy of a cut is relative
    to the best cut of that instance over all offsets. Solver exceptions are
    recorded as missing and excluded from that offset's average.
    """
    offsets = list(offsets)
    if not instances or not offsets:
        raise ValueError("need at least one instance and one offset")
    results: dict[float, dict[str, tuple[object, float]]] = {o: {} for o in offsets}
    failures = 0
    for inst in instances:
        iid = str(_attr(inst, "id", 0))
        base = float(_attr(inst, "baseline_seconds", 1))
        for o in offsets:
            limit = adjusted_limit(base, o)
            try:
                cut, runtime = solver(inst, limit)
            except Exception:  # noqa: BLE001 - any solver failure is a missing point
                failures += 1
                continue
            results[o][iid] = (cut, float(runtime), base)
    best: dict[str, object] = {}
    for o in offsets:
        for iid, (cut, _, _) in results[o].items():
            if iid not in best or cut > best[iid]:
                best[iid] = cut
    table = SweepTable(best=best)
    for o in offsets:
        got = results[o]
        viol = sum(1 for cut, rt, base in got.values() if rt > (1 + safety_margin) * base)
        N = len(got)
        if N:
            acc = sum((_ratio(cut, best[iid]) for iid, (cut, _, _) in got.items()), Fraction(0))
            pct = float(acc * 100 / N)
        else:
            pct = float("nan")
        table.rows.append(SweepRow(o, viol, pct, N, len(instances) - N))
    if failures:
        warnings.warn(f"offset sweep: {failures} solver failures recorded as missing", RuntimeWarning)
    return table


__all__ = [
    "FitParams", "DEFAULT_FITS", "load_fit_params", "size_class_for", "annealing_time", "cpu_time",
    "RuntimePlan", "InfeasiblePlanError", "plan_runs_iterations", "predicted_total",
    "max_iterations_within", "offset_sweep", "SweepTable", "SweepRow",
]
