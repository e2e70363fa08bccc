"""QUBO models, exact and incremental energy evaluation, Ising conversion.

A model stores one coefficient per unordered pair ``(i, j)`` with ``i >= j``;
the objective is ``sum_{i>=j} q_ij x_i x_j`` over ``x`` in ``{0, 1}^n``.
Diagonal entries are the linear terms since ``x_i * x_i = x_i``.

Internally the off-diagonal part is kept twice: as a lower-triangle COO list
(used for evaluation) and as a symmetric CSR adjacency (used for per-row flip
deltas). Integer models are int64 throughout; bounds on the absolute row and
total sums are computed once so that every integer path can decide up front
whether int64 arithmetic is safe.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Integral
from typing import Mapping

import numpy as np
import scipy.sparse as sp

INT64_MAX = np.iinfo(np.int64).max
INT64_MIN = np.iinfo(np.int64).min

INTEGER = "integer"
FLOAT = "float"


def _check_int64(value: int, what: str = "result") -> int:
    if value > INT64_MAX or value < INT64_MIN:
        raise OverflowError(f"{what} {value} does not fit in a signed 64-bit integer")
    return value


def _is_integral_scalar(v) -> bool:
    return isinstance(v, (Integral, np.integer)) and not isinstance(v, bool)


class QuboModel:
    """Immutable QUBO model ``min sum_{i>=j} q_ij x_i x_j``.

    Build with :meth:`from_dict` or :meth:`from_dense`. Zero coefficients are
    dropped. ``value_kind`` is ``"integer"`` when every coefficient is an
    integer (stored as int64) and ``"float"`` otherwise.
    """

    __slots__ = (
        "n", "value_kind", "diag", "pair_i", "pair_j", "pair_v",
        "indptr", "indices", "data", "row_bound", "abs_total", "_csr",
    )

    def __init__(self, n: int, diag: np.ndarray, pair_i: np.ndarray, pair_j: np.ndarray,
                 pair_v: np.ndarray, value_kind: str):
        if n < 0:
            raise ValueError("n must be non-negative")
        self.n = int(n)
        self.value_kind = value_kind
        dtype = np.int64 if value_kind == INTEGER else np.float64
        self.diag = np.ascontiguousarray(diag, dtype=dtype)
        self.pair_i = np.ascontiguousarray(pair_i, dtype=np.int64)
        self.pair_j = np.ascontiguousarray(pair_j, dtype=np.int64)
        self.pair_v = np.ascontiguousarray(pair_v, dtype=dtype)
        if self.diag.shape != (self.n,):
            raise ValueError("diag must have length n")
        if len(self.pair_i) and not (
            np.all(self.pair_i > self.pair_j) and self.pair_j.min() >= 0 and self.pair_i.max() < self.n
        ):
            raise ValueError("pairs must satisfy 0 <= j < i < n")

        rows = np.concatenate([self.pair_i, self.pair_j])
        cols = np.concatenate([self.pair_j, self.pair_i])
        vals = np.concatenate([self.pair_v, self.pair_v])
        csr = sp.csr_array((vals, (rows, cols)), shape=(self.n, self.n), dtype=dtype)
        csr.sort_indices()
        self._csr = csr
        self.indptr = csr.indptr.astype(np.int64)
        self.indices = csr.indices.astype(np.int64)
        self.data = csr.data

        if value_kind == INTEGER:
            abs_diag = [abs(int(v)) for v in self.diag]
            row_abs = list(abs_diag)
            for i, j, v in zip(self.pair_i.tolist(), self.pair_j.tolist(), self.pair_v.tolist()):
                row_abs[i] += abs(v)
                row_abs[j] += abs(v)
            self.row_bound = max(row_abs, default=0)
            self.abs_total = sum(abs_diag) + sum(abs(v) for v in self.pair_v.tolist())
        else:
            row_abs = np.abs(self.diag) + np.asarray(abs(csr).sum(axis=1)).ravel()
            self.row_bound = float(row_abs.max(initial=0.0))
            self.abs_total = float(np.abs(self.diag).sum() + np.abs(self.pair_v).sum())

        for arr in (self.diag, self.pair_i, self.pair_j, self.pair_v, self.indptr, self.indices, self.data):
            arr.flags.writeable = False

    # construction -------------------------------------------------------
    @classmethod
    def from_dict(cls, n: int, coeffs: Mapping[tuple[int, int], float], value_kind: str | None = None
                  ) -> "QuboModel":
        """Build from ``{(i, j): q}``. Keys may be given in either order and
        repeated keys (after ordering as ``i >= j``) are summed."""
        acc: dict[tuple[int, int], object] = {}
        for (a, b), v in coeffs.items():
            a, b = int(a), int(b)
            i, j = (a, b) if a >= b else (b, a)
            if not (0 <= j <= i < n):
                raise ValueError(f"index pair {(a, b)} out of range for n={n}")
            acc[(i, j)] = acc.get((i, j), 0) + v
        if value_kind is None:
            value_kind = INTEGER if all(_is_integral_scalar(v) for v in acc.values()) else FLOAT
        if value_kind == INTEGER:
            for key, v in acc.items():
                if not _is_integral_scalar(v):
                    if float(v).is_integer():
                        v = int(v)
                    else:
                        raise ValueError(f"non-integral coefficient {v} in integer model")
                acc[key] = _check_int64(int(v), f"coefficient {key}")
        dtype = np.int64 if value_kind == INTEGER else np.float64
        diag = np.zeros(n, dtype=dtype)
        pi, pj, pv = [], [], []
        for (i, j), v in sorted(acc.items()):
            if v == 0:
                continue
            if i == j:
                diag[i] = v
            else:
                pi.append(i)
                pj.append(j)
                pv.append(v)
        return cls(n, diag, np.array(pi, dtype=np.int64), np.array(pj, dtype=np.int64),
                   np.array(pv, dtype=dtype), value_kind)

    @classmethod
    def from_dense(cls, Q, value_kind: str | None = None) -> "QuboModel":
        """Build from a square matrix with ``x^T Q x`` semantics: the pair
        coefficient is ``Q[i, j] + Q[j, i]``."""
        Q = np.asarray(Q)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be a square matrix")
        n = Q.shape[0]
        if value_kind is None:
            value_kind = INTEGER if np.issubdtype(Q.dtype, np.integer) else FLOAT
        coeffs: dict[tuple[int, int], object] = {}
        for i in range(n):
            if Q[i, i] != 0:
                coeffs[(i, i)] = Q[i, i].item()
            for j in range(i):
                v = Q[i, j].item() + Q[j, i].item()
                if v != 0:
                    coeffs[(i, j)] = v
        return cls.from_dict(n, coeffs, value_kind=value_kind)

    @classmethod
    def zeros(cls, n: int) -> "QuboModel":
        return cls.from_dict(n, {}, value_kind=INTEGER)

    # views ----------------------------------------------------------------
    @property
    def is_integer(self) -> bool:
        return self.value_kind == INTEGER

    @property
    def int64_safe(self) -> bool:
        """True when no energy or flip delta can leave the int64 range."""
        return self.is_integer and self.abs_total <= INT64_MAX

    @property
    def coeffs(self) -> dict[tuple[int, int], object]:
        out = {(i, i): v for i, v in enumerate(self.diag.tolist()) if v != 0}
        for i, j, v in zip(self.pair_i.tolist(), self.pair_j.tolist(), self.pair_v.tolist()):
            out[(i, j)] = v
        return out

    @property
    def num_interactions(self) -> int:
        return len(self.pair_v)

    @property
    def csr(self) -> sp.csr_array:
        """Symmetric off-diagonal coupling matrix."""
        return self._csr

    def neighbors(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    def to_dense(self) -> np.ndarray:
        """Lower-triangular dense matrix holding the pair coefficients."""
        M = np.zeros((self.n, self.n), dtype=self.diag.dtype)
        M[np.arange(self.n), np.arange(self.n)] = self.diag
        M[self.pair_i, self.pair_j] = self.pair_v
        return M

    def max_abs_coefficient(self):
        vals = [abs(v) for v in self.diag.tolist()] + [abs(v) for v in self.pair_v.tolist()]
        return max(vals, default=0)

    def __repr__(self) -> str:
        return f"QuboModel(n={self.n}, interactions={self.num_interactions}, kind={self.value_kind})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, QuboModel):
            return NotImplemented
        return self.n == other.n and self.value_kind == other.value_kind and self.coeffs == other.coeffs

    __hash__ = None


@dataclass
class IsingModel:
    """Spin model ``-sum h_i s_i - sum_{i>j} J_ij s_i s_j + constant``.

    ``J`` is keyed by ``(i, j)`` with ``i > j``. Integer-sourced models carry
    :class:`fractions.Fraction` values so conversions stay exact.
    """

    n: int
    h: list
    J: dict[tuple[int, int], object]
    constant: object = 0

    def __post_init__(self):
        if len(self.h) != self.n:
            raise ValueError("h must have length n")
        for (i, j) in self.J:
            if i == j:
                raise ValueError("self-coupling in Ising model")
        try:
            finite = np.isfinite(float(self.constant))
        except OverflowError:
            finite = False
        if not finite:
            raise ValueError("constant must be finite")

    def energy(self, spins) -> object:
        s = [int(v) for v in spins]
        if len(s) != self.n:
            raise ValueError("spin vector length mismatch")
        e = self.constant
        for i, hi in enumerate(self.h):
            e -= hi * s[i]
        for (i, j), jij in self.J.items():
            e -= jij * s[i] * s[j]
        return e


@dataclass
class DeltaCache:
    """Per-variable flip deltas for one assignment, plus its energy."""

    deltas: np.ndarray
    energy: object


# --- evaluation -----------------------------------------------------------

def as_assignment(model_or_n, x) -> np.ndarray:
    """Validate ``x`` as a 0/1 vector of the right length; returns int8 array."""
    n = model_or_n if isinstance(model_or_n, (int, np.integer)) else model_or_n.n
    arr = np.asarray(x)
    if arr.ndim != 1 or arr.shape[0] != n:
        raise ValueError(f"assignment length {arr.shape} does not match n={n}")
    if arr.size and not np.all((arr == 0) | (arr == 1)):
        raise ValueError("assignment entries must be 0 or 1")
    return arr.astype(np.int8, copy=False)


def evaluate(model: QuboModel, x) -> object:
    """Objective value ``sum_{i>=j} q_ij x_i x_j``.

    Integer models are evaluated exactly; an int64 overflow of the result
    raises :class:`OverflowError`.
    """
    x = as_assignment(model, x)
    if model.is_integer:
        if model.int64_safe:
            xi = x.astype(np.int64)
            lin = int(model.diag @ xi)
            quad = int(model.pair_v @ (xi[model.pair_i] * xi[model.pair_j]))
            return lin + quad
        on = x.astype(bool)
        total = sum(v for v in model.diag[on].tolist())
        mask = on[model.pair_i] & on[model.pair_j]
        total += sum(model.pair_v[mask].tolist())
        return _check_int64(total)
    xf = x.astype(np.float64)
    return float(model.diag @ xf + model.pair_v @ (xf[model.pair_i] * xf[model.pair_j]))


def _local_field(model: QuboModel, x: np.ndarray, i: int) -> object:
    idx, vals = model.neighbors(i)
    on = x[idx] == 1
    if model.is_integer:
        if model.row_bound <= INT64_MAX:
            return int(model.diag[i]) + int(vals[on].sum())
        return int(model.diag[i]) + sum(vals[on].tolist())
    return float(model.diag[i] + vals[on].sum())


def delta_energy(model: QuboModel, x, i: int) -> object:
    """``evaluate(flip_i(x)) - evaluate(x)`` using only row ``i``."""
    x = as_assignment(model, x)
    if not 0 <= i < model.n:
        raise IndexError(f"index {i} out of range for n={model.n}")
    sign = 1 - 2 * int(x[i])
    d = sign * _local_field(model, x, int(i))
    if model.is_integer:
        return _check_int64(d, "flip delta")
    return d


def build_delta_cache(model: QuboModel, x) -> DeltaCache:
    x = as_assignment(model, x)
    energy = evaluate(model, x)
    if model.is_integer:
        if model.row_bound > INT64_MAX:
            raise OverflowError("row coefficient sums exceed int64; flip deltas cannot be cached")
        field = model.diag + model.csr @ x.astype(np.int64)
        deltas = (1 - 2 * x.astype(np.int64)) * field
    else:
        field = model.diag + model.csr @ x.astype(np.float64)
        deltas = (1.0 - 2.0 * x) * field
    return DeltaCache(deltas=np.asarray(deltas), energy=energy)


def apply_flip(model: QuboModel, x: np.ndarray, i: int, cache: DeltaCache
               ) -> tuple[np.ndarray, DeltaCache, object]:
    """Flip bit ``i`` of ``x`` in place and update ``cache`` in O(deg(i))."""
    if not 0 <= i < model.n:
        raise IndexError(f"index {i} out of range for n={model.n}")
    d_i = cache.deltas[i]
    energy = cache.energy + (int(d_i) if model.is_integer else float(d_i))
    if model.is_integer:
        energy = _check_int64(energy, "energy")
    step = 1 - 2 * int(x[i])  # +1 when x_i goes 0 -> 1
    x[i] ^= 1
    idx, vals = model.neighbors(i)
    cache.deltas[idx] += (1 - 2 * x[idx].astype(cache.deltas.dtype)) * vals * step
    cache.deltas[i] = -d_i
    cache.energy = energy
    return x, cache, energy


# --- Ising conversion -------------------------------------------------------

def _exact(v, integer: bool):
    return Fraction(int(v)) if integer else float(v)


def to_ising(model: QuboModel) -> IsingModel:
    """Substitute ``x_i = (s_i + 1) / 2``."""
    integer = model.is_integer
    zero = Fraction(0) if integer else 0.0
    h = [zero] * model.n
    J: dict[tuple[int, int], object] = {}
    constant = zero
    for i, q in enumerate(model.diag.tolist()):
        q = _exact(q, integer)
        h[i] -= q / 2
        constant += q / 2
    for i, j, q in zip(model.pair_i.tolist(), model.pair_j.tolist(), model.pair_v.tolist()):
        q = _exact(q, integer)
        J[(i, j)] = -q / 4
        h[i] -= q / 4
        h[j] -= q / 4
        constant += q / 4
    if integer:
        for v in [*h, *J.values(), constant]:
            _check_int64(int(abs(v) * 4), "scaled Ising coefficient")
    return IsingModel(n=model.n, h=h, J=J, constant=constant)


def from_ising(ising: IsingModel) -> tuple[QuboModel, object]:
    """Substitute ``s_i = 2 x_i - 1``.

    Returns ``(model, constant)`` with ``ising.energy(2x - 1) ==
    evaluate(model, x) + constant`` for every ``x``.
    """
    exact = all(isinstance(v, (Fraction, Integral)) for v in [*ising.h, *ising.J.values(), ising.constant])
    conv = Fraction if exact else float
    diag = [conv(-2) * conv(hi) for hi in ising.h]
    constant = conv(ising.constant) + sum((conv(hi) for hi in ising.h), conv(0))
    pairs: dict[tuple[int, int], object] = {}
    for (a, b), jab in ising.J.items():
        i, j = (a, b) if a > b else (b, a)
        jab = conv(jab)
        pairs[(i, j)] = pairs.get((i, j), conv(0)) - 4 * jab
        diag[i] += 2 * jab
        diag[j] += 2 * jab
        constant -= jab
    coeffs: dict[tuple[int, int], object] = {(i, i): v for i, v in enumerate(diag) if v != 0}
    coeffs.update({k: v for k, v in pairs.items() if v != 0})
    if exact and all(v.denominator == 1 for v in coeffs.values()):
        model = QuboModel.from_dict(ising.n, {k: int(v) for k, v in coeffs.items()}, value_kind=INTEGER)
    else:
        model = QuboModel.from_dict(ising.n, {k: float(v) for k, v in coeffs.items()}, value_kind=FLOAT)
    return model, constant


def flip(x, i: int) -> np.ndarray:
    y = np.array(x, dtype=np.int8, copy=True)
    y[i] ^= 1
    return y


def all_assignments(n: int) -> np.ndarray:
    """All ``2**n`` assignments as rows, bit ``i`` of the row index in column ``i``."""
    idx = np.arange(2 ** n, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n)) & 1).astype(np.int8)


def energies_of(model: QuboModel, X: np.ndarray) -> np.ndarray:
    """Vectorised objective for a batch of assignments (rows of ``X``)."""
    dtype = np.int64 if model.is_integer else np.float64
    Xd = np.asarray(X).astype(dtype)
    return Xd @ model.diag + (Xd[:, model.pair_i] * Xd[:, model.pair_j]) @ model.pair_v


def random_model(n: int, rng: np.random.Generator, density: float = 1.0, low: int = -10,
                 high: int = 10, integer: bool = True) -> QuboModel:
    """Random model with mixed-sign coefficients, handy for tests and demos."""
    coeffs: dict[tuple[int, int], object] = {}
    for i in range(n):
        for j in range(i + 1):
            if i != j and rng.random() >= density:
                continue
            v = int(rng.integers(low, high + 1)) if integer else float(rng.uniform(low, high))
            if v != 0:
                coeffs[(i, j)] = v
    return QuboModel.from_dict(n, coeffs, value_kind=INTEGER if integer else FLOAT)


__all__ = [
    "QuboModel", "IsingModel", "DeltaCache", "evaluate", "delta_energy", "build_delta_cache",
    "apply_flip", "to_ising", "from_ising", "flip", "as_assignment", "all_assignments",
    "energies_of", "random_model", "INTEGER", "FLOAT", "INT64_MAX",
]

