"""Parallel-trial annealing with a dynamic energy offset, parallel tempering,
and multi-run orchestration.

One *step* evaluates every single-bit flip of the current assignment at
once, draws an acceptance decision for each, and moves to one accepted
neighbour. When nothing is accepted the chain stays put and a growing
offset is subtracted from every delta until something is.

The heavy lifting is in :mod:`dabench._kernels`; this module owns schedule
calibration, seeding, chunked execution with time limits and progress
logging, replica exchange, and the best-result reduction.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from . import _kernels as K
from .qubo import DeltaCache, QuboModel, apply_flip, as_assignment, build_delta_cache, evaluate

SA = "SA"
PT = "PT"
UNIFORM = "uniform"
WEIGHTED = "weighted"

ACCEPT_START = 0.99
ACCEPT_HALF = 0.01
FALLBACK_T_START = 1.0
FALLBACK_T_HALF = 0.01
SA_MIN_CHUNK = 256
BINNED_MAX_BUCKETS = 4096
BINNED_MIN_N = 32


# --- parameters ---------------------------------------------------------------

@dataclass(frozen=True)
class ScheduleParams:
    """Temperature endpoints. ``decay`` is filled in once the step count is known."""

    T_start: float
    T_half: float
    calibration_samples: int = 0
    decay: float | None = None
    mean_uphill: float | None = None

    def __post_init__(self):
        if not (self.T_start > self.T_half > 0):
            raise ValueError(f"need T_start > T_half > 0, got {self.T_start}, {self.T_half}")

    def for_iterations(self, iterations: int) -> "ScheduleParams":
        """Geometric decay reaching ``T_half`` after ``iterations / 2`` steps."""
        half = max(iterations / 2.0, 1.0)
        return replace(self, decay=(self.T_half / self.T_start) ** (1.0 / half))

    def temperature(self, step: int) -> float:
        if self.decay is None:
            raise ValueError("decay not set; call for_iterations first")
        return self.T_start * self.decay ** step

    def ladder(self, replicas: int) -> np.ndarray:
        """Geometric ladder from ``T_half`` (coldest) up to ``T_start``."""
        k = np.arange(replicas) / max(replicas - 1, 1)
        return self.T_half * (self.T_start / self.T_half) ** k


@dataclass(frozen=True)
class AnnealParams:
    mode: str = SA
    runs: int = 16
    iterations: int | None = None
    replica_count: int = 16
    time_limit: float | None = None
    offset_increment: float | None = None
    schedule: ScheduleParams | None = None
    calibration_samples: int = 32
    seed: int = 0
    workers: int = 1
    exchange_interval: int | None = None
    selection: str = UNIFORM
    kernel: str = "auto"
    target_energy: float | None = None

    def __post_init__(self):
        if self.mode not in (SA, PT):
            raise ValueError(f"mode must be SA or PT, got {self.mode!r}")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.iterations is not None and self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.mode == PT and self.replica_count < 2:
            raise ValueError("parallel tempering needs replica_count >= 2")
        if self.offset_increment is not None and self.offset_increment < 0:
            raise ValueError("offset_increment must be >= 0")
        if self.time_limit is not None and self.time_limit <= 0:
            raise ValueError("time_limit must be positive")
        if self.calibration_samples < 1:
            raise ValueError("calibration_samples must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.exchange_interval is not None and self.exchange_interval < 1:
            raise ValueError("exchange_interval must be >= 1")
        if self.selection not in (UNIFORM, WEIGHTED):
            raise ValueError(f"selection must be uniform or weighted, got {self.selection!r}")
        if self.kernel not in ("auto", "exact", "binned"):
            raise ValueError(f"unknown kernel {self.kernel!r}")


@dataclass
class AnnealState:
    """Single-chain state for the reference step."""

    x: np.ndarray
    cache: DeltaCache
    energy: object
    T: float
    E_off: float
    rng: np.random.Generator

    @classmethod
    def start(cls, model: QuboModel, x, T: float, rng: np.random.Generator) -> "AnnealState":
        x = as_assignment(model, x).copy()
        cache = build_delta_cache(model, x)
        return cls(x=x, cache=cache, energy=cache.energy, T=T, E_off=0.0, rng=rng)


@dataclass
class RunStats:
    seed: int
    best_energy: object
    accepted: int


@dataclass
class SolveResult:
    best_x: np.ndarray
    best_energy: object
    wall_time: float
    progress: list[tuple[float, object]]
    per_run: list[tuple[int, object, int]]
    stop_reason: str = "iterations"
    steps: int = 0
    schedule: ScheduleParams | None = None
    offset_increment: float = 0.0
    kernel: str = "exact"


# --- acceptance -----------------------------------------------------------------

def acceptance_probability(dE, T, E_off=0.0):
    """``min(1, exp(-(dE - E_off) / T))``, vectorised."""
    if np.any(np.asarray(T) <= 0):
        raise ValueError("temperature must be positive")
    z = (np.asarray(dE, dtype=np.float64) - E_off) / T
    with np.errstate(over="ignore"):
        p = np.exp(-np.maximum(z, 0.0))
    return p if p.ndim else float(p)


def accept(dE, T, E_off, u):
    """Metropolis test with offset: ``u < min(1, exp(-(dE - E_off) / T))``."""
    if E_off < 0:
        raise ValueError("E_off must be non-negative")
    p = acceptance_probability(dE, T, E_off)
    res = np.asarray(u) < p
    return res if res.ndim else bool(res)


def swap_probability(T_a: float, T_b: float, E_a, E_b) -> float:
    """Replica-exchange acceptance for the chains at ``T_a`` and ``T_b``."""
    if T_a <= 0 or T_b <= 0:
        raise ValueError("temperatures must be positive")
    z = (1.0 / T_a - 1.0 / T_b) * (float(E_a) - float(E_b))
    return 1.0 if z >= 0 else math.exp(z)


def parallel_trial_step(model: QuboModel, state: AnnealState, offset_increment: float = 0.0,
                        selection: str = UNIFORM) -> AnnealState:
    """Reference single step (pure numpy).

    Draws ``n`` uniforms in index order for the acceptance tests, then one
    more uniform for the pick. Mutates and returns ``state``.
    """
    n = model.n
    u = state.rng.random(n)
    u_pick = state.rng.random()
    if n == 0:
        return state
    p = acceptance_probability(state.cache.deltas, state.T, state.E_off)
    accepted = np.flatnonzero(u < p)
    if accepted.size == 0:
        state.E_off += offset_increment
        return state
    if selection == UNIFORM:
        k = int(accepted[min(int(u_pick * accepted.size), accepted.size - 1)])
    else:
        w = np.cumsum(p[accepted])
        k = int(accepted[min(int(np.searchsorted(w, u_pick * w[-1], side="right")), accepted.size - 1)])
    _, _, state.energy = apply_flip(model, state.x, k, state.cache)
    state.E_off = 0.0
    return state


# --- calibration ------------------------------------------------------------------

def sample_uphill(model: QuboModel, calibration_samples: int, seed: int) -> np.ndarray:
    """Positive flip deltas of ``calibration_samples`` uniform random assignments."""
    rng = np.random.default_rng([seed, 0xCA1])
    dtype = np.int64 if model.is_integer and model.int64_safe else np.float64
    out = []
    batch = max(1, min(calibration_samples, 2_000_000 // max(model.n, 1)))
    done = 0
    csr = model.csr.astype(dtype)
    diag = model.diag.astype(dtype)
    while done < calibration_samples:
        b = min(batch, calibration_samples - done)
        X = rng.integers(0, 2, size=(b, model.n)).astype(dtype)
        field_ = diag[None, :] + (csr @ X.T).T
        d = (1 - 2 * X) * field_
        out.append(d[d > 0].astype(np.float64))
        done += b
    return np.concatenate(out) if out else np.empty(0)


def _solve_temperature(d: np.ndarray, target: float) -> float:
    lo, hi = d.min(), d.max()
    c = -math.log(target)
    if lo == hi:
        return float(lo / c)

    def g(T):
        return float(np.mean(np.exp(-d / T))) - target

    return float(brentq(g, lo / c, hi / c, rtol=1e-12, xtol=1e-300))


def calibrate_schedule(model: QuboModel, calibration_samples: int = 32, seed: int = 0) -> ScheduleParams:
    """Pick ``T_start``/``T_half`` so sampled uphill moves are accepted with
    mean probability 0.99 and 0.01. Models without uphill moves get the
    fixed fallback ``(1, 0.01)``."""
    if calibration_samples < 1:
        raise ValueError("calibration_samples must be >= 1")
    d = sample_uphill(model, calibration_samples, seed)
    if d.size == 0:
        return ScheduleParams(FALLBACK_T_START, FALLBACK_T_HALF, calibration_samples)
    T_start = _solve_temperature(d, ACCEPT_START)
    T_half = _solve_temperature(d, ACCEPT_HALF)
    return ScheduleParams(T_start, T_half, calibration_samples, mean_uphill=float(d.mean()))


# --- chain engine ----------------------------------------------------------------

def _derive_seed(seed: int, *key: int) -> int:
    ss = np.random.SeedSequence(entropy=seed & ((1 << 128) - 1), spawn_key=key)
    return int(ss.generate_state(1, np.uint64)[0])


def _select_kernel(model: QuboModel, requested: str) -> str:
    integral = model.is_integer and model.int64_safe and 4 * model.row_bound < K_INT_LIMIT
    if requested == "binned":
        if not integral:
            raise ValueError("binned kernel requires an int64-safe integer model")
        return "binned"
    if requested == "exact":
        return "exact"
    if integral and model.n >= BINNED_MIN_N and 2 * model.row_bound + 1 <= BINNED_MAX_BUCKETS:
        return "binned"
    return "exact"


K_INT_LIMIT = 2 ** 62


class _Chains:
    """A block of independent chains advanced together by the kernels."""

    def __init__(self, model: QuboModel, run_seeds: list[int], kernel: str, weighted: bool,
                 offset_increment: float, workers: int):
        self.model = model
        self.kernel = kernel
        self.weighted = weighted
        self.offset_increment = float(offset_increment)
        self.workers = max(1, min(workers, len(run_seeds)))
        n = model.n
        C = len(run_seeds)
        self.integral = model.is_integer and model.int64_safe and 4 * model.row_bound < K_INT_LIMIT
        dtype = np.int64 if self.integral else np.float64
        self.dtype = dtype
        self.diag = model.diag.astype(dtype)
        self.data = model.data.astype(dtype)
        self.indptr = model.indptr
        self.indices = model.indices
        self.run_seeds = list(run_seeds)
        self.chain_seeds = np.array([_derive_seed(s, 1) for s in run_seeds], dtype=np.uint64)
        self.x = np.empty((C, n), dtype=np.int8)
        for c, s in enumerate(run_seeds):
            self.x[c] = np.random.default_rng(_derive_seed(s, 0)).integers(0, 2, n)
        self.dE = np.empty((C, n), dtype=dtype)
        self.energy = np.empty(C, dtype=dtype)
        for c in range(C):
            self.energy[c] = K._resync(self.x[c], self.dE[c], self.diag, self.indptr, self.indices, self.data)
        self.e_off = np.zeros(C)
        self.best_x = self.x.copy()
        self.best_e = self.energy.copy()
        self.dirty = np.zeros(C, dtype=np.uint8)
        self.n_acc = np.zeros(C, dtype=np.int64)
        self.chunk = 0
        if kernel == "binned":
            R = int(model.row_bound)
            self.vmin = -R
            nb = 2 * R + 1
            self.order = np.empty((C, n), dtype=np.int64)
            self.pos = np.empty((C, n), dtype=np.int64)
            self.start = np.empty((C, nb + 1), dtype=np.int64)
            for c in range(C):
                K.build_buckets(self.dE[c], self.vmin, nb, self.order[c], self.pos[c], self.start[c])
        self._pool = ThreadPoolExecutor(self.workers) if self.workers > 1 else None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()

    def _blocks(self):
        C = self.x.shape[0]
        edges = np.linspace(0, C, self.workers + 1).astype(int)
        return [(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]

    def advance(self, temps: np.ndarray, decay: float, steps: int, target: float) -> np.ndarray:
        """Advance every chain ``steps`` steps starting at ``temps``; returns the
        temperatures reached."""
        seeds = K.chunk_seeds(self.chain_seeds, self.chunk)
        self.chunk += 1
        temps = np.ascontiguousarray(temps, dtype=np.float64).copy()
        resync = not self.integral

        def run(block):
            a, b = block
            common = (self.indptr, self.indices, self.data, self.diag, self.x[a:b], self.dE[a:b],
                      self.energy[a:b], self.e_off[a:b], self.best_x[a:b], self.best_e[a:b],
                      self.dirty[a:b], self.n_acc[a:b], temps[a:b], float(decay), int(steps),
                      self.offset_increment, seeds[a:b], self.weighted, float(target))
            if self.kernel == "binned":
                K.advance_binned(*common, self.order[a:b], self.pos[a:b], self.start[a:b], self.vmin)
            else:
                K.advance_exact(*common, resync)

        blocks = self._blocks()
        if self._pool is None:
            for blk in blocks:
                run(blk)
        else:
            list(self._pool.map(run, blocks))
        return temps

    def best(self) -> tuple[int, object]:
        """Lowest best energy, ties to the lowest chain index."""
        c = int(np.argmin(self.best_e))
        return c, self.best_e[c]


def _scalar(model: QuboModel, v):
    return int(v) if model.is_integer else float(v)


def _resolve(model: QuboModel, params: AnnealParams, seed: int):
    schedule = params.schedule or calibrate_schedule(model, params.calibration_samples, seed)
    if params.offset_increment is not None:
        inc = params.offset_increment
    elif schedule.mean_uphill is not None:
        inc = schedule.mean_uphill / 100.0
    else:
        inc = schedule.T_half
    kernel = _select_kernel(model, params.kernel)
    return schedule, float(inc), kernel


class _Clock:
    def __init__(self, time_limit: float | None):
        self.t0 = time.perf_counter()
        self.time_limit = time_limit

    def elapsed(self) -> float:
        return time.perf_counter() - self.t0

    def expired(self) -> bool:
        return self.time_limit is not None and self.elapsed() >= self.time_limit


def _progress_update(progress, clock, energy):
    if not progress or energy < progress[-1][1]:
        progress.append((clock.elapsed(), energy))


def _finish(model, chains: _Chains, clock, progress, stop, steps, schedule, inc, kernel, per_run):
    c, _ = chains.best()
    best_x = chains.best_x[c].copy()
    best_energy = evaluate(model, best_x)
    if progress and best_energy != progress[-1][1]:
        # float models: replace the running value with the exact re-evaluation
        t = progress[-1][0]
        progress[-1] = (t, best_energy)
        for i in range(len(progress) - 2, -1, -1):
            if progress[i][1] < best_energy:
                progress[i] = (progress[i][0], best_energy)
    return SolveResult(best_x=best_x, best_energy=best_energy, wall_time=clock.elapsed(),
                       progress=progress, per_run=per_run, stop_reason=stop, steps=steps,
                       schedule=schedule, offset_increment=inc, kernel=kernel)


def _estimate_iterations(model, schedule, inc, kernel, weighted, chunk, seed, budget, runs, workers):
    probe = _Chains(model, [seed], kernel, weighted, inc, 1)
    probe.advance(np.array([schedule.T_start]), 1.0, 16, -np.inf)  # warm the jit
    t0 = time.perf_counter()
    probe.advance(np.array([schedule.T_start]), 1.0, chunk, -np.inf)
    rate = chunk / max(time.perf_counter() - t0, 1e-9)
    parallel = min(workers, runs)
    return max(chunk, int(0.9 * budget * rate * parallel / runs))


def _run_sa(model: QuboModel, params: AnnealParams, run_seeds: list[int], clock: _Clock,
            on_chunk: Callable | None = None) -> SolveResult:
    schedule, inc, kernel = _resolve(model, params, params.seed)
    target = -np.inf if params.target_energy is None else params.target_energy
    chunk = max(model.n, SA_MIN_CHUNK)
    iterations = params.iterations
    if iterations is None:
        remaining = params.time_limit - clock.elapsed()
        iterations = _estimate_iterations(model, schedule, inc, kernel, params.selection == WEIGHTED,
                                          chunk, run_seeds[0], remaining, len(run_seeds), params.workers)
    schedule = schedule.for_iterations(iterations)
    chains = _Chains(model, run_seeds, kernel, params.selection == WEIGHTED, inc, params.workers)
    progress: list = []
    try:
        _progress_update(progress, clock, _scalar(model, chains.best()[1]))
        temps = np.full(len(run_seeds), schedule.T_start)
        done = 0
        stop = "iterations"
        while done < iterations:
            if clock.expired():
                stop = "time_limit"
                break
            steps = min(chunk, iterations - done)
            temps = chains.advance(temps, schedule.decay, steps, target)
            done += steps
            _progress_update(progress, clock, _scalar(model, chains.best()[1]))
            if on_chunk is not None:
                on_chunk(done, chains)
            if chains.best()[1] <= target:
                stop = "target"
                break
        per_run = [(s, _scalar(model, e), int(a))
                   for s, e, a in zip(run_seeds, chains.best_e, chains.n_acc)]
        return _finish(model, chains, clock, progress, stop, done, schedule, inc, kernel, per_run)
    finally:
        chains.close()


def _run_pt(model: QuboModel, params: AnnealParams, seed: int, clock: _Clock) -> SolveResult:
    schedule, inc, kernel = _resolve(model, params, seed)
    target = -np.inf if params.target_energy is None else params.target_energy
    R = params.replica_count
    ladder = schedule.ladder(R)
    interval = params.exchange_interval or max(model.n, 1)
    replica_seeds = [_derive_seed(seed, 2, r) for r in range(R)]
    chains = _Chains(model, replica_seeds, kernel, params.selection == WEIGHTED, inc, params.workers)
    rng = np.random.default_rng(_derive_seed(seed, 3))
    at_level = np.arange(R)  # at_level[k] = chain currently at ladder temperature k
    progress: list = []
    iterations = params.iterations
    try:
        _progress_update(progress, clock, _scalar(model, chains.best()[1]))
        done = 0
        rounds = 0
        stop = "iterations"
        while iterations is None or done < iterations:
            if clock.expired():
                stop = "time_limit"
                break
            steps = interval if iterations is None else min(interval, iterations - done)
            temps = np.empty(R)
            temps[at_level] = ladder
            chains.advance(temps, 1.0, steps, target)
            done += steps
            _progress_update(progress, clock, _scalar(model, chains.best()[1]))
            if chains.best()[1] <= target:
                stop = "target"
                break
            for k in range(rounds % 2, R - 1, 2):
                a, b = at_level[k], at_level[k + 1]
                p = swap_probability(ladder[k], ladder[k + 1], chains.energy[a], chains.energy[b])
                if rng.random() < p:
                    at_level[k], at_level[k + 1] = b, a
            rounds += 1
        per_run = [(s, _scalar(model, e), int(a))
                   for s, e, a in zip(replica_seeds, chains.best_e, chains.n_acc)]
        return _finish(model, chains, clock, progress, stop, done, schedule, inc, kernel, per_run)
    finally:
        chains.close()


# --- public entry points -------------------------------------------------------------

def run_seeds_for(seed: int, runs: int) -> list[int]:
    """Per-run seeds used by :func:`solve` in SA mode."""
    return [_derive_seed(seed, 1, r) for r in range(runs)]


def anneal_run(model: QuboModel, params: AnnealParams, run_seed: int):
    """One SA chain. Returns ``(best_x, best_energy, RunStats)``.

    ``solve`` in SA mode with the same params produces, for run ``r``, exactly
    ``anneal_run(model, params, run_seeds_for(params.seed, r + 1)[r])``.
    """
    if params.mode != SA:
        raise ValueError("anneal_run requires mode SA")
    if params.iterations is None and params.time_limit is None:
        raise ValueError("need iterations or time_limit")
    if model.n == 0:
        return np.zeros(0, dtype=np.int8), _scalar(model, 0), RunStats(run_seed, _scalar(model, 0), 0)
    res = _run_sa(model, params, [run_seed], _Clock(params.time_limit))
    seed, e, acc = res.per_run[0]
    return res.best_x, res.best_energy, RunStats(seed, res.best_energy, acc)


def parallel_tempering_run(model: QuboModel, params: AnnealParams, seed: int | None = None):
    """Replica-exchange run. Returns ``(best_x, best_energy, SolveResult)``."""
    if params.replica_count < 2:
        raise ValueError("parallel tempering needs replica_count >= 2")
    if params.iterations is None and params.time_limit is None:
        raise ValueError("need iterations or time_limit")
    seed = params.seed if seed is None else seed
    if model.n == 0:
        res = _empty_result(model)
    else:
        res = _run_pt(model, params, seed, _Clock(params.time_limit))
    return res.best_x, res.best_energy, res


def _empty_result(model: QuboModel) -> SolveResult:
    z = _scalar(model, 0)
    return SolveResult(np.zeros(0, dtype=np.int8), z, 0.0, [(0.0, z)], [], "iterations", 0)


def solve(model: QuboModel, params: AnnealParams) -> SolveResult:
    """Best of ``runs`` SA chains, or one PT run, under the given budget."""
    if params.iterations is None and params.time_limit is None:
        raise ValueError("either iterations or time_limit must be given")
    if model.n == 0:
        return _empty_result(model)
    clock = _Clock(params.time_limit)
    if params.mode == PT:
        return _run_pt(model, params, params.seed, clock)
    return _run_sa(model, params, run_seeds_for(params.seed, params.runs), clock)


def warmup() -> None:
    """Compile the kernels for int64 and float64 models."""
    from .qubo import QuboModel as Q

    m_int = Q.from_dict(40, {(i, i - 1): 1 for i in range(1, 40)})
    m_flt = Q.from_dict(3, {(1, 0): 0.5, (2, 1): -0.25, (0, 0): 0.1})
    for m in (m_int, m_flt):
        for kern in ("exact", "binned") if m.is_integer else ("exact",):
            solve(m, AnnealParams(runs=1, iterations=8, kernel=kern))


__all__ = [
    "AnnealParams", "ScheduleParams", "AnnealState", "SolveResult", "RunStats", "accept",
    "acceptance_probability", "swap_probability", "parallel_trial_step", "calibrate_schedule",
    "sample_uphill", "anneal_run", "parallel_tempering_run", "solve", "run_seeds_for", "warmup",
    "SA", "PT",
]
