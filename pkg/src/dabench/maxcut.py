"""Max-Cut instances, cut evaluation, reductions to and from QUBO, the
heaviest-variable preprocessing step and integer quantization."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional

import numpy as np

from .qubo import FLOAT, INT64_MAX, INTEGER, QuboModel, _check_int64, as_assignment


class WeightedGraph:
    """Undirected weighted graph with edges ``(u, v, w)``, ``u < v``.

    Self-loops and repeated vertex pairs are rejected.
    """

    __slots__ = ("n_vertices", "u", "v", "w", "value_kind")

    def __init__(self, n_vertices: int, edges: Iterable[tuple[int, int, object]],
                 value_kind: str | None = None):
        us, vs, ws = [], [], []
        seen: set[tuple[int, int]] = set()
        for a, b, w in edges:
            a, b = int(a), int(b)
            if a == b:
                raise ValueError(f"self-loop at vertex {a}")
            u, v = (a, b) if a < b else (b, a)
            if u < 0 or v >= n_vertices:
                raise ValueError(f"edge ({a}, {b}) out of range for {n_vertices} vertices")
            if (u, v) in seen:
                raise ValueError(f"duplicate edge ({u}, {v})")
            seen.add((u, v))
            us.append(u)
            vs.append(v)
            ws.append(w)
        if value_kind is None:
            value_kind = INTEGER if all(
                isinstance(w, (int, np.integer)) and not isinstance(w, bool) for w in ws
            ) else FLOAT
        self.n_vertices = int(n_vertices)
        self.value_kind = value_kind
        self.u = np.array(us, dtype=np.int64)
        self.v = np.array(vs, dtype=np.int64)
        if value_kind == INTEGER:
            self.w = np.array([_check_int64(int(w), "edge weight") for w in ws], dtype=np.int64)
        else:
            self.w = np.array(ws, dtype=np.float64)

    @classmethod
    def from_arrays(cls, n_vertices: int, u, v, w) -> "WeightedGraph":
        w = np.asarray(w)
        kind = INTEGER if np.issubdtype(w.dtype, np.integer) else FLOAT
        return cls(n_vertices, zip(np.asarray(u).tolist(), np.asarray(v).tolist(), w.tolist()), kind)

    @property
    def n_edges(self) -> int:
        return len(self.w)

    @property
    def edges(self) -> list[tuple[int, int, object]]:
        return list(zip(self.u.tolist(), self.v.tolist(), self.w.tolist()))

    def degree(self) -> np.ndarray:
        return np.bincount(np.concatenate([self.u, self.v]), minlength=self.n_vertices)

    def __repr__(self) -> str:
        return f"WeightedGraph(n={self.n_vertices}, m={self.n_edges}, kind={self.value_kind})"


@dataclass(frozen=True)
class CutCertificate:
    assignment: np.ndarray
    value: object

    @classmethod
    def of(cls, graph: WeightedGraph, x) -> "CutCertificate":
        x = as_assignment(graph.n_vertices, x)
        return cls(assignment=x.copy(), value=cut_value(graph, x))


def cut_value(graph: WeightedGraph, x) -> object:
    """Total weight of edges whose endpoints lie on different sides."""
    x = as_assignment(graph.n_vertices, x)
    crossing = x[graph.u] != x[graph.v]
    if graph.value_kind == INTEGER:
        w = graph.w[crossing]
        if np.abs(graph.w).sum(dtype=np.float64) < 2.0 ** 62:
            return int(w.sum())
        return _check_int64(sum(w.tolist()), "cut value")
    return float(graph.w[crossing].sum())


def density(graph: WeightedGraph) -> float:
    n = graph.n_vertices
    if n < 2:
        raise ValueError("density needs at least two vertices")
    return graph.n_edges / (n * (n - 1) / 2)


def maxcut_to_qubo(graph: WeightedGraph) -> QuboModel:
    """QUBO whose objective is the negated cut value of every assignment.

    ``q_ii = -sum_{j in N(i)} w_ij`` and ``q_ij = 2 w_ij``.
    """
    coeffs: dict[tuple[int, int], object] = {}
    integer = graph.value_kind == INTEGER
    for u, v, w in graph.edges:
        if w == 0:
            continue
        coeffs[(v, u)] = 2 * w
        coeffs[(u, u)] = coeffs.get((u, u), 0) - w
        coeffs[(v, v)] = coeffs.get((v, v), 0) - w
    return QuboModel.from_dict(graph.n_vertices, coeffs, value_kind=INTEGER if integer else FLOAT)


def qubo_to_maxcut(model: QuboModel) -> tuple[WeightedGraph, object]:
    """Embed a QUBO as Max-Cut on ``n + 1`` vertices.

    Vertex 0 is auxiliary and pinned to side 1; variable ``i`` becomes vertex
    ``i + 1``. For every ``x``::

        cut_value(graph, [1, *x]) == -evaluate(model, x) + constant

    Pair weights are ``q_ij / 2``; the auxiliary weights absorb the linear
    terms, ``w_0i = q_ii + sum_j q_ij / 2``, and ``constant = sum_i w_0i``.
    Odd integer couplings produce half-integer weights, stored as floats.
    """
    integer = model.is_integer
    if integer:
        half = lambda q: Fraction(int(q), 2)  # noqa: E731
    else:
        half = lambda q: float(q) / 2  # noqa: E731
    aux = [Fraction(int(q)) if integer else float(q) for q in model.diag.tolist()]
    edges = []
    for i, j, q in zip(model.pair_i.tolist(), model.pair_j.tolist(), model.pair_v.tolist()):
        w = half(q)
        edges.append((j + 1, i + 1, w))
        aux[i] += w
        aux[j] += w
    for i, w in enumerate(aux):
        if w != 0:
            edges.append((0, i + 1, w))
    constant = sum(aux, Fraction(0) if integer else 0.0)

    if integer and all(Fraction(w).denominator == 1 for _, _, w in edges):
        edges = [(a, b, int(w)) for a, b, w in edges]
        kind = INTEGER
        constant = int(constant)
    else:
        edges = [(a, b, float(w)) for a, b, w in edges]
        kind = FLOAT
        constant = float(constant)
    return WeightedGraph(model.n + 1, edges, value_kind=kind), constant


# --- preprocessing --------------------------------------------------------

@dataclass
class PreprocessReport:
    """How a reduced model maps back onto the original variables.

    ``index_map[k]`` is the original index of reduced variable ``k``.
    ``evaluate(original, reconstruct(y)) == evaluate(reduced, y) + constant``.
    """

    n_original: int
    fixed_vertex: Optional[tuple[int, int]]
    removed_vertices: list[int]
    index_map: list[int]
    constant: object = 0

    def reconstruct(self, y) -> np.ndarray:
        y = as_assignment(len(self.index_map), y)
        x = np.zeros(self.n_original, dtype=np.int8)
        x[np.asarray(self.index_map, dtype=np.int64)] = y
        if self.fixed_vertex is not None:
            idx, side = self.fixed_vertex
            x[idx] = side
        return x


def is_complement_symmetric(model: QuboModel) -> bool:
    """True iff ``evaluate(x) == evaluate(1 - x)`` for every ``x``.

    The difference is affine in ``x``; it vanishes identically exactly when
    ``2 q_ii + sum_j q_ij == 0`` for every ``i``. Max-Cut models satisfy this.
    """
    row = model.csr.sum(axis=1)
    resid = 2 * model.diag + np.asarray(row).ravel()
    if model.is_integer:
        return bool(np.all(resid == 0))
    scale = max(float(model.max_abs_coefficient()), 1.0)
    return bool(np.all(np.abs(resid) <= 1e-12 * scale * max(model.n, 1)))


def preprocess(model: QuboModel, fix: str = "auto") -> tuple[QuboModel, PreprocessReport]:
    """Fix the heaviest variable and drop variables without coefficients.

    The heaviest variable has the largest ``|q_ii|`` (lowest index on ties)
    and is fixed to 1 when ``q_ii < 0``, else 0. ``fix="auto"`` only fixes
    when the model is complement-symmetric, where fixing one variable cannot
    change the optimum; ``"always"`` fixes unconditionally and ``"never"``
    only removes empty variables.
    """
    if fix not in ("auto", "always", "never"):
        raise ValueError("fix must be 'auto', 'always' or 'never'")
    n = model.n
    integer = model.is_integer
    diag = [int(v) if integer else float(v) for v in model.diag.tolist()]
    pairs = list(zip(model.pair_i.tolist(), model.pair_j.tolist(), model.pair_v.tolist()))
    constant = 0 if integer else 0.0

    fixed = None
    do_fix = fix == "always" or (fix == "auto" and is_complement_symmetric(model))
    if do_fix and n > 0:
        mags = np.abs(model.diag)
        k = int(np.argmax(mags))
        if mags[k] != 0:
            side = 1 if diag[k] < 0 else 0
            fixed = (k, side)
            if side == 1:
                constant += diag[k]
                for i, j, q in pairs:
                    if i == k:
                        diag[j] += q
                    elif j == k:
                        diag[i] += q
            diag[k] = 0
            pairs = [(i, j, q) for i, j, q in pairs if i != k and j != k]

    active = [d != 0 for d in diag]
    for i, j, q in pairs:
        active[i] = active[j] = True
    keep = [i for i in range(n) if active[i] and (fixed is None or i != fixed[0])]
    removed = [i for i in range(n) if not active[i] and (fixed is None or i != fixed[0])]
    new_index = {old: new for new, old in enumerate(keep)}
    coeffs: dict[tuple[int, int], object] = {}
    for old in keep:
        if diag[old] != 0:
            coeffs[(new_index[old], new_index[old])] = diag[old]
    for i, j, q in pairs:
        coeffs[(new_index[i], new_index[j])] = q
    reduced = QuboModel.from_dict(len(keep), coeffs, value_kind=model.value_kind)
    return reduced, PreprocessReport(n, fixed, removed, keep, constant)


# --- quantization -----------------------------------------------------------

BIT_WIDTHS = (15, 47, 63)

# Named hardware emulation profiles: bit width as a function of model size.
EMULATION_PROFILES = {
    "dav2": lambda n: 15 if n > 4096 else 63,
    "dav3": lambda n: 47,
    "full": lambda n: 63,
}


def select_bit_width(profile: str, n: int) -> int:
    try:
        return EMULATION_PROFILES[profile](n)
    except KeyError:
        raise ValueError(f"unknown emulation profile {profile!r}") from None


@dataclass
class QuantizationSpec:
    """Scaling applied by :func:`quantize`.

    ``rescale`` maps an energy of the quantized model back to original units.
    """

    bit_width: int
    scale_factor: float
    lost_terms: int
    saturated_terms: int = 0
    max_abs: object = field(default=None, repr=False)

    def rescale(self, energy) -> float:
        return float(Fraction(energy) / (Fraction(2) ** self.bit_width / Fraction(self.max_abs)))


def quantize(model: QuboModel, bit_width: int) -> tuple[QuboModel, QuantizationSpec]:
    """Scale by ``2**bit_width / max|q|`` and round down to integers.

    Results are saturated to the signed ``b + 1``-bit range
    ``[-2**b, 2**b - 1]``: a coefficient equal to ``-max|q|`` maps exactly to
    ``-2**b`` while one equal to ``+max|q|`` is clipped one unit below ``2**b``.
    """
    if bit_width not in BIT_WIDTHS:
        raise ValueError(f"bit_width must be one of {BIT_WIDTHS}")
    max_abs = model.max_abs_coefficient()
    if max_abs == 0:
        raise ValueError("cannot quantize an all-zero model")
    hi, lo = 2 ** bit_width - 1, -(2 ** bit_width)
    lost = 0
    saturated = 0
    if model.is_integer:
        m = int(max_abs)

        def scale(q):
            return (int(q) << bit_width) // m
    else:
        m = Fraction(max_abs)
        two_b = Fraction(2) ** bit_width

        def scale(q):
            return (Fraction(q) * two_b / m).__floor__()

    out: dict[tuple[int, int], int] = {}
    for key, q in model.coeffs.items():
        v = scale(q)
        if v > hi or v < lo:
            v = hi if v > 0 else lo
            saturated += 1
        if v == 0:
            lost += 1
            continue
        out[key] = v
    qmodel = QuboModel.from_dict(model.n, out, value_kind=INTEGER)
    spec = QuantizationSpec(bit_width=bit_width, scale_factor=float(Fraction(2) ** bit_width / Fraction(max_abs)),
                            lost_terms=lost, saturated_terms=saturated, max_abs=max_abs)
    return qmodel, spec


def toroidal_grid(rows: int, cols: int, weight: int = 1) -> WeightedGraph:
    """2D torus ``rows x cols`` with uniform edge weight; vertex ``r*cols + c``."""
    edges = []
    for r in range(rows):
        for c in range(cols):
            a = r * cols + c
            edges.append((a, r * cols + (c + 1) % cols, weight))
            edges.append((a, ((r + 1) % rows) * cols + c, weight))
    return WeightedGraph(rows * cols, edges)


__all__ = [
    "WeightedGraph", "CutCertificate", "PreprocessReport", "QuantizationSpec", "cut_value", "density",
    "maxcut_to_qubo", "qubo_to_maxcut", "preprocess", "quantize", "is_complement_symmetric",
    "select_bit_width", "EMULATION_PROFILES", "toroidal_grid", "INT64_MAX",
]
