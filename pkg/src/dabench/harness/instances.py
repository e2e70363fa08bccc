"""Edge-list instances, the size/density taxonomy, and manifests."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..maxcut import WeightedGraph, density as graph_density
from ..qubo import FLOAT, INTEGER

SIZE_EDGES = (("x-small", 20, 1024), ("small", 1024, 2048), ("medium", 2048, 4096),
              ("large", 4096, 8192), ("x-large", 8192, None))
SIZE_CLASSES = tuple(s for s, _, _ in SIZE_EDGES)
DENSITY_CLASSES = ("sparse", "balanced", "dense")
MIN_TAXONOMY_N = 20
MIN_BASELINE_SECONDS = 0.25


class ParseError(ValueError):
    def __init__(self, path, line: int, msg: str):
        super().__init__(f"{path}:{line}: {msg}")
        self.path = str(path)
        self.line = line


@dataclass(frozen=True)
class CategoryLabel:
    size_class: str
    density_class: str

    def __str__(self) -> str:
        return f"{self.size_class}/{self.density_class}"


def size_class(n: int) -> str:
    if n < MIN_TAXONOMY_N:
        raise ValueError(f"n={n} is below the taxonomy minimum of {MIN_TAXONOMY_N}")
    for name, lo, hi in SIZE_EDGES:
        if n >= lo and (hi is None or n < hi):
            return name
    raise AssertionError("unreachable")


def density_class(d: float) -> str:
    if not 0.0 <= d <= 1.0:
        raise ValueError(f"density {d} outside [0, 1]")
    if d < 0.1:
        return "sparse"
    if d < 0.5:
        return "balanced"
    return "dense"


def categorize(record_or_n, d: float | None = None) -> CategoryLabel:
    """Category of an :class:`InstanceRecord`, or of ``(n, density)``."""
    if d is None:
        n, d = record_or_n.n, record_or_n.density
    else:
        n = record_or_n
    return CategoryLabel(size_class(n), density_class(d))


@dataclass
class InstanceRecord:
    id: str
    graph: WeightedGraph
    n: int
    m: int
    density: float
    value_kind: str
    category: CategoryLabel | None
    baseline_seconds: float | None = None
    path: str | None = None

    @classmethod
    def from_graph(cls, iid: str, graph: WeightedGraph, baseline_seconds: float | None = None,
                   path: str | None = None) -> "InstanceRecord":
        d = graph_density(graph) if graph.n_vertices >= 2 else 0.0
        cat = categorize(graph.n_vertices, d) if graph.n_vertices >= MIN_TAXONOMY_N else None
        return cls(iid, graph, graph.n_vertices, graph.n_edges, d, graph.value_kind, cat,
                   baseline_seconds, path)


def _number(tok: str):
    try:
        return int(tok)
    except ValueError:
        v = float(tok)
        return int(v) if v.is_integer() and "." not in tok and "e" not in tok.lower() else v


def parse_instance(path, iid: str | None = None) -> InstanceRecord:
    """Read a 1-based ``n m`` / ``i j w`` edge list.

    Weights written with a decimal point or exponent count as real-valued;
    the instance is float-typed iff some weight is non-integral.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read instance {path}: {exc}") from exc
    lines = [(k + 1, ln.split()) for k, ln in enumerate(text.splitlines())]
    lines = [(k, t) for k, t in lines if t and not t[0].startswith(("#", "%"))]
    if not lines:
        raise ParseError(path, 1, "empty file, expected header 'n m'")
    hk, header = lines[0]
    if len(header) != 2:
        raise ParseError(path, hk, "header must be 'n m'")
    try:
        n, m = int(header[0]), int(header[1])
    except ValueError:
        raise ParseError(path, hk, "header values must be integers") from None
    if n < 0 or m < 0:
        raise ParseError(path, hk, "negative n or m")
    body = lines[1:]
    if len(body) != m:
        ln = body[m][0] if len(body) > m else (body[-1][0] + 1 if body else hk + 1)
        raise ParseError(path, ln, f"header declares {m} edges, found {len(body)}")
    seen = set()
    edges = []
    floaty = False
    for ln, tok in body:
        if len(tok) != 3:
            raise ParseError(path, ln, "edge line must be 'i j w'")
        try:
            i, j = int(tok[0]), int(tok[1])
            w = _number(tok[2])
        except ValueError:
            raise ParseError(path, ln, f"malformed edge {' '.join(tok)!r}") from None
        if not (1 <= i <= n and 1 <= j <= n):
            raise ParseError(path, ln, f"vertex index out of range 1..{n}")
        if i == j:
            raise ParseError(path, ln, "self-loop")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise ParseError(path, ln, f"duplicate edge {key}")
        seen.add(key)
        if isinstance(w, float):
            if not w.is_integer():
                floaty = True
        edges.append((i - 1, j - 1, w))
    if not floaty:
        edges = [(u, v, int(w)) for u, v, w in edges]
    graph = WeightedGraph(n, edges, value_kind=FLOAT if floaty else INTEGER)
    return InstanceRecord.from_graph(iid or path.stem, graph, path=str(path))


def write_instance(graph: WeightedGraph, path) -> None:
    lines = [f"{graph.n_vertices} {graph.n_edges}"]
    for u, v, w in graph.edges:
        lines.append(f"{u + 1} {v + 1} {w!r}" if isinstance(w, float) else f"{u + 1} {v + 1} {w}")
    Path(path).write_text("\n".join(lines) + "\n")


def select_instances(records, min_baseline: float = MIN_BASELINE_SECONDS):
    """Records whose baseline limit is known and strictly above ``min_baseline``."""
    return [r for r in records if r.baseline_seconds is not None and r.baseline_seconds > min_baseline]


# --- manifests and limits ----------------------------------------------------------------

def read_manifest(path) -> list[tuple[Path, float | None]]:
    """One instance per line: ``<path> [baseline_seconds]``, paths relative to
    the manifest. ``#`` starts a comment."""
    path = Path(path)
    out = []
    for k, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        p = Path(parts[0])
        if not p.is_absolute():
            p = path.parent / p
        try:
            base = float(parts[1]) if len(parts) > 1 else None
        except ValueError:
            raise ParseError(path, k, f"bad baseline seconds {parts[1]!r}") from None
        out.append((p, base))
    return out


def load_manifest(path) -> list[InstanceRecord]:
    recs = []
    for p, base in read_manifest(path):
        r = parse_instance(p)
        r.baseline_seconds = base
        recs.append(r)
    return recs


def write_manifest(path, entries) -> None:
    lines = []
    for p, base in entries:
        lines.append(f"{p}" if base is None else f"{p} {base!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_limits(path) -> dict[str, float]:
    """Per-instance limits from JSON ``{id: seconds}`` or CSV/whitespace ``id seconds``."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        return {str(k): float(v) for k, v in json.loads(text).items()}
    out = {}
    for k, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].replace(",", " ").strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] in ("id", "instance"):
            continue
        if len(parts) != 2:
            raise ParseError(path, k, "expected 'id seconds'")
        out[parts[0]] = float(parts[1])
    return out


__all__ = [
    "ParseError", "CategoryLabel", "InstanceRecord", "parse_instance", "write_instance", "categorize",
    "size_class", "density_class", "select_instances", "read_manifest", "load_manifest",
    "write_manifest", "load_limits", "SIZE_CLASSES", "DENSITY_CLASSES",
]
