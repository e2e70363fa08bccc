"""Seeded benchmark runs under per-instance limits, with verification and archiving."""

from __future__ import annotations

import json
import logging
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np
from filelock import FileLock

from ..anneal import PT, AnnealParams, solve
from ..maxcut import cut_value, maxcut_to_qubo, quantize
from ..qubo import INTEGER, as_assignment
from .instances import InstanceRecord

log = logging.getLogger(__name__)

DEFAULT_SEEDS = (0, 1, 2, 3, 4)
DEFAULT_LOCK = Path(tempfile.gettempdir()) / "dabench.lock"
FLOAT_RTOL = 1e-9


class VerificationError(RuntimeError):
    pass


@dataclass
class SolverOutcome:
    x: np.ndarray | None
    cut: object
    runtime: float
    progress: list = field(default_factory=list)
    error: str | None = None


class Solver(Protocol):
    solver_id: str

    def __call__(self, record: InstanceRecord, limit: float, seed: int) -> SolverOutcome: ...


@dataclass(frozen=True)
class SolverConfig:
    solver_id: str = "dabench-pt"
    mode: str = PT
    runs: int = 16
    replica_count: int = 16
    iterations: int | None = None
    quantize: int | None = None
    workers: int = 1
    kernel: str = "auto"
    stop_at_cut: float | None = None

    @classmethod
    def from_file(cls, path) -> "SolverConfig":
        return cls(**json.loads(Path(path).read_text()))


class AnnealerSolver:
    """Max-Cut through the QUBO reduction and :func:`dabench.anneal.solve`.

    The reported runtime covers reduction, optional quantization and solving.
    """

    def __init__(self, config: SolverConfig = SolverConfig()):
        self.config = config
        self.solver_id = config.solver_id

    def __call__(self, record: InstanceRecord, limit: float, seed: int) -> SolverOutcome:
        cfg = self.config
        t0 = time.perf_counter()
        model = maxcut_to_qubo(record.graph)
        scale = None
        if cfg.quantize is not None:
            model, spec = quantize(model, cfg.quantize)
            scale = spec
        target = None
        if cfg.stop_at_cut is not None:
            target = -cfg.stop_at_cut if scale is None else -cfg.stop_at_cut * scale.scale_factor
        params = AnnealParams(mode=cfg.mode, runs=cfg.runs, replica_count=cfg.replica_count,
                              iterations=cfg.iterations, time_limit=limit if cfg.iterations is None else None,
                              seed=seed, workers=cfg.workers, kernel=cfg.kernel, target_energy=target)
        res = solve(model, params)
        runtime = time.perf_counter() - t0
        cut = cut_value(record.graph, res.best_x)
        rescale = (lambda e: -e) if scale is None else (lambda e: -scale.rescale(e))
        progress = [(t, rescale(e)) for t, e in res.progress]
        return SolverOutcome(res.best_x, cut, runtime, progress)


@dataclass
class BenchRecord:
    instance_id: str
    solver_id: str
    seed: int
    cut: object
    runtime: float
    limit: float
    ratio: float
    status: str = "ok"
    value_kind: str = INTEGER
    category: str = ""
    assignment: np.ndarray | None = field(default=None, repr=False)
    progress: list = field(default_factory=list, repr=False)

    COLUMNS = ("instance_id", "solver_id", "seed", "cut", "runtime", "limit", "ratio", "status",
               "value_kind", "category")

    def row(self) -> dict:
        return {k: getattr(self, k) for k in self.COLUMNS}


@dataclass
class BenchResult:
    records: list[BenchRecord]
    best: dict[str, BenchRecord]
    failures: int = 0


def verify_solution(record: InstanceRecord, x, claimed) -> bool:
    """True iff the cut of ``x`` equals ``claimed`` (exactly for integer
    instances, within 1e-9 relative for float instances)."""
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != record.n:
        raise ValueError(f"assignment length {x.shape} does not match n={record.n}")
    try:
        x = as_assignment(record.n, x)
    except ValueError:
        return False
    actual = cut_value(record.graph, x)
    if record.value_kind == INTEGER:
        try:
            return int(claimed) == claimed and int(claimed) == actual
        except (TypeError, ValueError, OverflowError):
            return False
    claimed = float(claimed)
    return abs(actual - claimed) <= FLOAT_RTOL * max(abs(actual), abs(claimed))


def best_of(records: Iterable[BenchRecord]) -> BenchRecord | None:
    """Highest cut among successful records, ties broken by lowest runtime
    (then by lowest seed)."""
    ok = [r for r in records if r.status == "ok"]
    if not ok:
        return None
    return min(ok, key=lambda r: (-r.cut, r.runtime, r.seed))


def run_benchmark(instances: Sequence[InstanceRecord], solver: Callable, limits: dict[str, float],
                  seeds: int | Sequence[int] = 5, archive_dir=None, lock_path=DEFAULT_LOCK,
                  lock_timeout: float = -1) -> BenchResult:
    """Run ``solver`` on each instance for each seed, sequentially.

    Every returned cut is checked against its assignment; mismatches and
    exceptions are kept as ``rejected`` / ``failed`` records. A file lock
    keeps concurrent benchmark processes from sharing the machine.
    """
    seeds = list(range(seeds)) if isinstance(seeds, int) else list(seeds)
    solver_id = getattr(solver, "solver_id", getattr(solver, "__name__", "solver"))
    missing = [r.id for r in instances if r.id not in limits]
    if missing:
        raise ValueError(f"no time limit for instances: {missing}")
    lock = FileLock(str(lock_path), timeout=lock_timeout) if lock_path is not None else None
    records: list[BenchRecord] = []
    failures = 0
    if lock is not None:
        lock.acquire()
    try:
        for inst in instances:
            limit = float(limits[inst.id])
            cat = str(inst.category) if inst.category is not None else ""
            for seed in seeds:
                rec = BenchRecord(inst.id, solver_id, seed, 0, 0.0, limit, 0.0, "failed",
                                  inst.value_kind, cat)
                try:
                    out = solver(inst, limit, seed)
                    if out.error is not None:
                        raise RuntimeError(out.error)
                    rec.cut, rec.runtime = out.cut, float(out.runtime)
                    rec.ratio = rec.runtime / limit
                    rec.assignment = None if out.x is None else np.asarray(out.x, dtype=np.int8)
                    rec.progress = list(out.progress)
                    ok = rec.assignment is not None and verify_solution(inst, rec.assignment, rec.cut)
                    rec.status = "ok" if ok else "rejected"
                except Exception as exc:  # noqa: BLE001 - a crashing solver must not stop the run
                    log.warning("solver %s failed on %s seed %s: %s", solver_id, inst.id, seed, exc)
                if rec.status != "ok":
                    failures += 1
                records.append(rec)
    finally:
        if lock is not None:
            lock.release()
    best = {}
    for inst in instances:
        b = best_of(r for r in records if r.instance_id == inst.id)
        if b is not None:
            best[inst.id] = b
    if archive_dir is not None:
        archive_solutions(best.values(), archive_dir)
    return BenchResult(records, best, failures)


# --- solution archive -------------------------------------------------------------------

def _fmt(v) -> str:
    return format(v, ".17g") if isinstance(v, float) else str(v)


def archive_path(directory, instance_id: str, solver_id: str) -> Path:
    return Path(directory) / f"{instance_id}__{solver_id}.sol"


def archive_solutions(records: Iterable[BenchRecord], directory) -> list[Path]:
    """One file per (instance, solver): ``id solver cut runtime`` then the 0/1 string."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create archive directory {directory}: {exc}") from exc
    paths = []
    for r in records:
        if r.assignment is None:
            continue
        p = archive_path(directory, r.instance_id, r.solver_id)
        bits = "".join("1" if b else "0" for b in np.asarray(r.assignment).tolist())
        try:
            p.write_text(f"{r.instance_id} {r.solver_id} {_fmt(r.cut)} {_fmt(float(r.runtime))}\n{bits}\n")
        except OSError as exc:
            raise OSError(f"cannot write solution {p}: {exc}") from exc
        paths.append(p)
    return paths


@dataclass
class ArchivedSolution:
    instance_id: str
    solver_id: str
    cut: object
    runtime: float
    x: np.ndarray


def load_solution(path) -> ArchivedSolution:
    path = Path(path)
    lines = path.read_text().split("\n")
    head = lines[0].split()
    if len(head) != 4 or len(lines) < 2:
        raise ValueError(f"{path}: malformed solution file")
    bits = lines[1].strip()
    if bits and set(bits) - {"0", "1"}:
        raise ValueError(f"{path}: assignment must be a 0/1 string")
    try:
        cut = int(head[2])
    except ValueError:
        cut = float(head[2])
    x = np.array([int(c) for c in bits], dtype=np.int8)
    return ArchivedSolution(head[0], head[1], cut, float(head[3]), x)


__all__ = [
    "SolverOutcome", "SolverConfig", "AnnealerSolver", "BenchRecord", "BenchResult", "verify_solution",
    "best_of", "run_benchmark", "archive_solutions", "load_solution", "ArchivedSolution",
    "archive_path", "VerificationError",
]
