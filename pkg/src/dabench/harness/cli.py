"""Command-line entry point: ``dabench <command> ...``.

Exit codes: 0 success, 2 argument or input errors, 3 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .. import anneal
from ..baseline import DEFAULT_RESTARTS, DEFAULT_SEEDS, baseline_time_limit
from ..maxcut import BIT_WIDTHS, cut_value, maxcut_to_qubo, quantize
from ..runtime_model import InfeasiblePlanError, offset_sweep, plan_runs_iterations
from .analysis import compare, dumps, export_report, read_records, runtime_deviation, write_records
from .bench import (DEFAULT_LOCK, AnnealerSolver, BenchRecord, SolverConfig, archive_solutions,
                    load_solution, run_benchmark, verify_solution)
from .instances import load_limits, load_manifest, parse_instance

EXIT_OK = 0
EXIT_ARGS = 2
EXIT_VERIFY = 3


class CliError(Exception):
    def __init__(self, msg: str, code: int = EXIT_ARGS):
        super().__init__(msg)
        self.code = code


def parse_offsets(text: str) -> list[float]:
    """``"0..5"`` (integer range, inclusive) or a comma list ``"0,1.5,3"``."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            lo_i, hi_i = int(lo), int(hi)
            if hi_i < lo_i:
                raise ValueError
            return [float(v) for v in range(lo_i, hi_i + 1)]
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad offsets {text!r}; use 'a..b' or a comma list") from None
    if not vals or any(v < 0 for v in vals):
        raise argparse.ArgumentTypeError("offsets must be non-negative")
    return vals


def _emit(text: str, output) -> None:
    if output is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(output).write_text(text if text.endswith("\n") else text + "\n")


# --- commands ----------------------------------------------------------------------------------

def cmd_solve(args) -> int:
    rec = parse_instance(args.instance)
    if args.iterations is None and args.time_limit is None:
        raise CliError("solve needs --iterations or --time-limit")
    model = maxcut_to_qubo(rec.graph)
    spec = None
    if args.quantize is not None:
        model, spec = quantize(model, args.quantize)
    params = anneal.AnnealParams(mode=args.mode.upper(), runs=args.runs, iterations=args.iterations,
                                 replica_count=args.replicas, time_limit=args.time_limit, seed=args.seed,
                                 workers=args.workers)
    res = anneal.solve(model, params)
    cut = cut_value(rec.graph, res.best_x)
    out = {
        "instance": rec.id, "n": rec.n, "m": rec.m, "mode": params.mode, "seed": args.seed,
        "cut": cut, "energy": res.best_energy, "wall_time": res.wall_time, "stop_reason": res.stop_reason,
        "steps": res.steps, "kernel": res.kernel,
        "quantization": None if spec is None else {"bit_width": spec.bit_width, "lost_terms": spec.lost_terms,
                                                   "saturated_terms": spec.saturated_terms},
        "progress": [[t, e] for t, e in res.progress],
    }
    if args.solution:
        rec_out = BenchRecord(rec.id, f"dabench-{params.mode.lower()}", args.seed, cut, res.wall_time,
                              args.time_limit or 0.0, 0.0, value_kind=rec.value_kind,
                              assignment=res.best_x)
        out["solution"] = str(archive_solutions([rec_out], args.solution)[0])
    _emit(dumps(out), args.output)
    return EXIT_OK


def cmd_baseline_time(args) -> int:
    rec = parse_instance(args.instance)
    rep = baseline_time_limit(maxcut_to_qubo(rec.graph), restarts=args.restarts, seeds=args.seeds,
                              instance=rec.id)
    _emit(dumps({"instance": rep.instance, "per_seed_seconds": rep.per_seed_seconds,
                 "baseline_seconds": rep.baseline_seconds, "seeds": rep.seeds, "restarts": rep.restarts}),
          args.output)
    return EXIT_OK


def cmd_bench(args) -> int:
    instances = load_manifest(args.manifest)
    cfg = SolverConfig.from_file(args.solver) if args.solver else SolverConfig()
    limits = load_limits(args.limits)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = run_benchmark(instances, AnnealerSolver(cfg), limits, seeds=args.seeds,
                           archive_dir=out_dir / "solutions", lock_path=args.lock)
    write_records(result.records, out_dir / "records.csv")
    write_records(result.best.values(), out_dir / "best.csv")
    dev = runtime_deviation(result.records)
    summary = {"records": len(result.records), "failures": result.failures,
               "best": {k: {"cut": r.cut, "runtime": r.runtime, "seed": r.seed} for k, r in result.best.items()},
               "runtime_violations": [list(v) for v in dev.violations]}
    _emit(dumps(summary), None)
    rejected = sum(1 for r in result.records if r.status == "rejected")
    return EXIT_VERIFY if rejected else EXIT_OK


def cmd_compare(args) -> int:
    a, b = read_records(args.a), read_records(args.b)
    _emit(export_report(compare(a, b), args.format), args.output)
    return EXIT_OK


def cmd_verify(args) -> int:
    rec = parse_instance(args.instance)
    sol = load_solution(args.solution)
    if len(sol.x) != rec.n:
        raise CliError(f"solution has {len(sol.x)} bits, instance has n={rec.n}", EXIT_VERIFY)
    ok = verify_solution(rec, sol.x, sol.cut)
    _emit(dumps({"instance": rec.id, "claimed": sol.cut, "actual": cut_value(rec.graph, sol.x), "ok": ok}),
          None)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_sweep_offset(args) -> int:
    instances = load_manifest(args.manifest)
    if any(r.baseline_seconds is None for r in instances):
        raise CliError("sweep-offset needs baseline seconds for every manifest entry")
    cfg = SolverConfig.from_file(args.solver) if args.solver else SolverConfig()
    solver = AnnealerSolver(cfg)

    def run(inst, limit):
        out = solver(inst, float(limit), args.seed)
        return out.cut, out.runtime

    table = offset_sweep(instances, args.offsets, run, safety_margin=args.margin)
    _emit(table.to_csv(), args.output)
    return EXIT_OK


def cmd_plan(args) -> int:
    try:
        plan = plan_runs_iterations(args.n, args.time_limit, args.overheads)
    except InfeasiblePlanError as exc:
        raise CliError(str(exc)) from None
    _emit(dumps({"runs": plan.runs, "iterations": plan.iterations, "predicted_total": plan.predicted_total,
                 "fixed_overheads": plan.fixed_overheads, "size_class": plan.size_class}), None)
    return EXIT_OK


# --- parser -------------------------------------------------------------------------------------

def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dabench", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="anneal one Max-Cut instance")
    s.add_argument("instance")
    s.add_argument("--mode", choices=["sa", "pt", "SA", "PT"], default="pt")
    s.add_argument("--runs", type=_positive_int, default=16)
    s.add_argument("--replicas", type=_positive_int, default=16)
    s.add_argument("--iterations", type=_positive_int)
    s.add_argument("--time-limit", type=_positive_float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--quantize", type=int, choices=BIT_WIDTHS)
    s.add_argument("--workers", type=_positive_int, default=1)
    s.add_argument("--solution", metavar="DIR", help="archive the best assignment in DIR")
    s.add_argument("--output", "-o")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("baseline-time", help="greedy-restart time limit of an instance")
    s.add_argument("instance")
    s.add_argument("--restarts", type=_positive_int, default=DEFAULT_RESTARTS)
    s.add_argument("--seeds", type=int, nargs="+", default=list(DEFAULT_SEEDS))
    s.add_argument("--output", "-o")
    s.set_defaults(func=cmd_baseline_time)

    s = sub.add_parser("bench", help="seeded benchmark over a manifest")
    s.add_argument("manifest")
    s.add_argument("--solver", help="solver config JSON (fields of SolverConfig)")
    s.add_argument("--limits", required=True, help="per-instance limits (JSON or 'id seconds' lines)")
    s.add_argument("--seeds", type=_positive_int, default=5)
    s.add_argument("--out-dir", default="bench-out")
    s.add_argument("--lock", default=str(DEFAULT_LOCK), help="lock file path")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("compare", help="win/tie/loss of records A against records B")
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--format", choices=["json", "csv", "summary-csv"], default="json")
    s.add_argument("--output", "-o")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("verify", help="check an archived solution against its instance")
    s.add_argument("instance")
    s.add_argument("solution")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("sweep-offset", help="violations and accuracy per time-limit offset")
    s.add_argument("manifest")
    s.add_argument("--offsets", type=parse_offsets, default=parse_offsets("0..5"))
    s.add_argument("--solver")
    s.add_argument("--margin", type=float, default=0.10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--output", "-o")
    s.set_defaults(func=cmd_sweep_offset)

    s = sub.add_parser("plan", help="runs/iterations plan from the fitted runtime model")
    s.add_argument("n", type=_positive_int)
    s.add_argument("--time-limit", type=_positive_float, required=True)
    s.add_argument("--overheads", type=float, default=0.0)
    s.set_defaults(func=cmd_plan)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"dabench: {exc}", file=sys.stderr)
        return exc.code
    except (ValueError, OSError) as exc:
        print(f"dabench: {exc}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
