"""Win/tie/loss comparison, runtime deviation, progress traces, report export."""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from ..qubo import FLOAT, INTEGER
from .bench import BenchRecord, best_of

WIN, TIE, LOSS = "win", "tie", "loss"
FLOAT_TIE_RTOL = 1e-9
DEFAULT_ACCURACY_EDGES = tuple(round(0.99 + 0.002 * k, 3) for k in range(11))  # 0.990 .. 1.010
DEFAULT_RATIO_EDGES = tuple(float(v) for v in np.logspace(-2, 1, 16))


# --- comparison --------------------------------------------------------------------------

@dataclass
class OutcomeCounts:
    win: int = 0
    tie: int = 0
    loss: int = 0

    @property
    def total(self) -> int:
        return self.win + self.tie + self.loss

    def proportions(self) -> dict[str, float]:
        t = self.total
        if t == 0:
            return {WIN: 0.0, TIE: 0.0, LOSS: 0.0}
        return {WIN: self.win / t, TIE: self.tie / t, LOSS: self.loss / t}

    def percentages(self, ndigits: int | None = 2) -> dict[str, float]:
        p = {k: 100.0 * v for k, v in self.proportions().items()}
        return p if ndigits is None else {k: round(v, ndigits) for k, v in p.items()}

    def add(self, outcome: str) -> None:
        setattr(self, outcome, getattr(self, outcome) + 1)


@dataclass
class ComparedInstance:
    instance_id: str
    category: str
    value_kind: str
    cut_a: object
    cut_b: object
    accuracy: float
    outcome: str


@dataclass
class AccuracyBin:
    lo: float | None
    hi: float | None
    count: int = 0
    float_count: int = 0

    @property
    def label(self) -> str:
        if self.lo is None:
            return f"<{self.hi:g}"
        if self.hi is None:
            return f">={self.lo:g}"
        return f"[{self.lo:g},{self.hi:g})"


@dataclass
class ComparisonReport:
    rows: list[ComparedInstance] = field(default_factory=list)
    per_category: dict[str, OutcomeCounts] = field(default_factory=dict)
    totals: OutcomeCounts = field(default_factory=OutcomeCounts)
    float_totals: OutcomeCounts = field(default_factory=OutcomeCounts)
    bins: list[AccuracyBin] = field(default_factory=list)
    exclusions: int = 0
    excluded_ids: list[str] = field(default_factory=list)

    @property
    def float_flags(self) -> dict[str, bool]:
        return {r.instance_id: r.value_kind == FLOAT for r in self.rows}

    @classmethod
    def from_counts(cls, win: int, tie: int, loss: int, category: str = "all") -> "ComparisonReport":
        """Aggregate-only report, for feeding published counts through the same arithmetic."""
        c = OutcomeCounts(win, tie, loss)
        return cls(per_category={category: c}, totals=OutcomeCounts(win, tie, loss))


def classify(cut_a, cut_b, value_kind: str = INTEGER, rtol: float = FLOAT_TIE_RTOL) -> str:
    """Win/tie/loss of A against B; exact for integer cuts, ``rtol`` relative for float."""
    if value_kind == INTEGER:
        return WIN if cut_a > cut_b else LOSS if cut_a < cut_b else TIE
    a, b = float(cut_a), float(cut_b)
    if abs(a - b) <= rtol * max(abs(a), abs(b)):
        return TIE
    return WIN if a > b else LOSS


def accuracy_ratio(cut_a, cut_b) -> float:
    if cut_b == 0:
        return 1.0 if cut_a == 0 else math.copysign(math.inf, float(cut_a))
    return float(cut_a) / float(cut_b)


def _bins(edges: Iterable[float]) -> list[AccuracyBin]:
    edges = list(edges)
    out = [AccuracyBin(None, edges[0])]
    out += [AccuracyBin(a, b) for a, b in zip(edges[:-1], edges[1:])]
    out.append(AccuracyBin(edges[-1], None))
    return out


def _by_instance(records) -> dict[str, BenchRecord]:
    if isinstance(records, Mapping):
        return dict(records)
    groups: dict[str, list] = defaultdict(list)
    for r in records:
        groups[r.instance_id].append(r)
    out = {}
    for iid, rs in groups.items():
        b = best_of(rs)
        if b is not None:
            out[iid] = b
    return out


def compare(records_a, records_b, edges: Iterable[float] = DEFAULT_ACCURACY_EDGES) -> ComparisonReport:
    """Per-instance comparison of solver A against solver B.

    Either side may hold per-seed records; each instance is reduced to its
    best-of record first. Instances present on only one side are excluded
    and counted.
    """
    a, b = _by_instance(records_a), _by_instance(records_b)
    edges = list(edges)
    report = ComparisonReport(bins=_bins(edges))
    excluded = sorted(set(a) ^ set(b))
    report.exclusions = len(excluded)
    report.excluded_ids = excluded
    for iid in sorted(set(a) & set(b)):
        ra, rb = a[iid], b[iid]
        kind = FLOAT if FLOAT in (ra.value_kind, rb.value_kind) else INTEGER
        outcome = classify(ra.cut, rb.cut, kind)
        acc = accuracy_ratio(ra.cut, rb.cut)
        if outcome == TIE:
            acc = 1.0
        cat = ra.category or rb.category or "uncategorized"
        report.rows.append(ComparedInstance(iid, cat, kind, ra.cut, rb.cut, acc, outcome))
        report.per_category.setdefault(cat, OutcomeCounts()).add(outcome)
        report.totals.add(outcome)
        if kind == FLOAT:
            report.float_totals.add(outcome)
        k = int(np.searchsorted(edges, acc, side="right"))
        report.bins[k].count += 1
        if kind == FLOAT:
            report.bins[k].float_count += 1
    return report


# --- runtime deviation ----------------------------------------------------------------------

@dataclass
class RuntimeDeviation:
    edges: list[float]
    counts: list[int]
    violations: list[tuple[str, int, float]]
    margin: float

    @property
    def total(self) -> int:
        return sum(self.counts)


def runtime_deviation(records: Iterable[BenchRecord], margin: float = 0.10,
                      edges: Iterable[float] = DEFAULT_RATIO_EDGES) -> RuntimeDeviation:
    """Histogram of runtime/limit ratios (open-ended outer bins) and the
    records whose ratio exceeds ``1 + margin``."""
    records = [r for r in records if r.status == "ok"]
    edges = list(edges)
    counts = [0] * (len(edges) + 1)
    viol = []
    for r in records:
        counts[int(np.searchsorted(edges, r.ratio, side="right"))] += 1
        if r.ratio > 1 + margin:
            viol.append((r.instance_id, r.seed, r.ratio))
    return RuntimeDeviation(edges, counts, viol, margin)


# --- progress traces --------------------------------------------------------------------------

@dataclass
class ProgressTrace:
    instance_id: str
    points: list[tuple[float, float]]
    time_of_best: float | None


def trace_accuracy(progress, reference_cut, instance_id: str = "") -> ProgressTrace:
    """Map ``(elapsed, best-so-far)`` points to ``(elapsed, |best| / reference)``."""
    if not reference_cut > 0:
        raise ValueError("reference_cut must be positive")
    pts = [(float(t), abs(float(v)) / float(reference_cut)) for t, v in progress]
    return ProgressTrace(instance_id, pts, pts[-1][0] if pts else None)


# --- export ------------------------------------------------------------------------------

def fmt_float(v: float) -> str:
    """17 significant digits; integral values keep a trailing ``.0``."""
    s = format(v, ".17g")
    return s if any(c in s for c in ".eni") else s + ".0"


def _json(obj) -> str:
    if obj is None or isinstance(obj, bool):
        return "null" if obj is None else ("true" if obj else "false")
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return fmt_float(v) if math.isfinite(v) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, Mapping):
        return "{" + ", ".join(f"{_json(str(k))}: {_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_json(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj) -> str:
    """JSON text with every float written to 17 significant digits."""
    return _json(obj)


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return fmt_float(float(v))
    return "" if v is None else str(v)


def write_csv(rows: Iterable[Mapping], columns: Iterable[str], path=None) -> str:
    columns = list(columns)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    text = buf.getvalue()
    if path is not None:
        try:
            Path(path).write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write report {path}: {exc}") from exc
    return text


COMPARISON_COLUMNS = ("instance_id", "category", "value_kind", "cut_a", "cut_b", "accuracy", "outcome")
SUMMARY_COLUMNS = ("category", "win", "tie", "loss", "total", "win_pct", "tie_pct", "loss_pct")


def report_dict(report: ComparisonReport) -> dict:
    def counts(c: OutcomeCounts) -> dict:
        p = c.percentages(None)
        return {"win": c.win, "tie": c.tie, "loss": c.loss, "total": c.total,
                "win_pct": p[WIN], "tie_pct": p[TIE], "loss_pct": p[LOSS]}

    return {
        "totals": counts(report.totals),
        "float_totals": counts(report.float_totals),
        "per_category": {k: counts(v) for k, v in sorted(report.per_category.items())},
        "bins": [{"label": b.label, "lo": b.lo, "hi": b.hi, "count": b.count, "float_count": b.float_count}
                 for b in report.bins],
        "rows": [{c: getattr(r, c) for c in COMPARISON_COLUMNS} for r in report.rows],
        "exclusions": report.exclusions,
        "excluded_ids": list(report.excluded_ids),
    }


def export_report(report: ComparisonReport, fmt: str = "json", path=None) -> str:
    """Serialise a comparison as JSON, per-instance CSV (``csv``) or
    per-category CSV (``summary-csv``)."""
    if fmt == "json":
        text = dumps(report_dict(report)) + "\n"
        if path is not None:
            try:
                Path(path).write_text(text)
            except OSError as exc:
                raise OSError(f"cannot write report {path}: {exc}") from exc
        return text
    if fmt == "csv":
        rows = [{c: getattr(r, c) for c in COMPARISON_COLUMNS} for r in report.rows]
        return write_csv(rows, COMPARISON_COLUMNS, path)
    if fmt == "summary-csv":
        d = report_dict(report)
        rows = [{"category": k, **v} for k, v in d["per_category"].items()]
        rows.append({"category": "total", **d["totals"]})
        return write_csv(rows, SUMMARY_COLUMNS, path)
    raise ValueError(f"unknown report format {fmt!r}")


def write_records(records: Iterable[BenchRecord], path=None) -> str:
    return write_csv((r.row() for r in records), BenchRecord.COLUMNS, path)


def read_records(path) -> list[BenchRecord]:
    """Load records written by :func:`write_records`."""
    path = Path(path)
    out = []
    with path.open(newline="") as fh:
        for k, row in enumerate(csv.DictReader(fh), start=2):
            try:
                kind = row.get("value_kind") or INTEGER
                cut = int(row["cut"]) if kind == INTEGER else float(row["cut"])
                out.append(BenchRecord(
                    instance_id=row["instance_id"], solver_id=row.get("solver_id", ""),
                    seed=int(row.get("seed") or 0), cut=cut, runtime=float(row.get("runtime") or 0.0),
                    limit=float(row.get("limit") or 0.0), ratio=float(row.get("ratio") or 0.0),
                    status=row.get("status") or "ok", value_kind=kind, category=row.get("category", "")))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{k}: bad record row: {exc}") from exc
    return out


__all__ = [
    "compare", "classify", "accuracy_ratio", "ComparisonReport", "OutcomeCounts", "ComparedInstance",
    "AccuracyBin", "runtime_deviation", "RuntimeDeviation", "trace_accuracy", "ProgressTrace",
    "export_report", "report_dict", "dumps", "write_csv", "write_records", "read_records", "fmt_float",
    "DEFAULT_ACCURACY_EDGES", "WIN", "TIE", "LOSS",
]
