import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dabench.anneal import SA
from dabench.harness.analysis import (DEFAULT_ACCURACY_EDGES, LOSS, TIE, WIN, ComparisonReport, classify, compare,
                                      dumps, export_report, fmt_float, read_records, runtime_deviation,
                                      trace_accuracy, write_records)
from dabench.harness.bench import (AnnealerSolver, BenchRecord, SolverConfig, SolverOutcome, archive_solutions,
                                   best_of, load_solution, run_benchmark, verify_solution)
from dabench.harness.instances import (DENSITY_CLASSES, SIZE_CLASSES, InstanceRecord, ParseError, categorize,
                                       load_limits, load_manifest, parse_instance, select_instances,
                                       write_instance, write_manifest)
from dabench.harness.reference import GSET_TABLE, HEADLINE_COUNTS, best_known_cut
from dabench.maxcut import WeightedGraph, cut_value, toroidal_grid
from dabench.qubo import all_assignments
from oracles import brute_max_cut_subsets, random_edges


def k2():
    return InstanceRecord.from_graph("k2", WeightedGraph(2, [(0, 1, 1)]))


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def rec(iid, cut, runtime=1.0, seed=0, kind="integer", category="x-small/sparse", limit=1.0, status="ok"):
    return BenchRecord(iid, "s", seed, cut, runtime, limit, runtime / limit, status, kind, category)


class TestParseInstance:
    def test_k2(self, tmp_path):
        r = parse_instance(write(tmp_path, "k2.txt", "2 1\n1 2 1\n"))
        assert (r.id, r.n, r.m, r.value_kind) == ("k2", 2, 1, "integer")
        assert r.graph.edges == [(0, 1, 1)] and r.density == 1.0

    def test_comments_and_blank_lines(self, tmp_path):
        r = parse_instance(write(tmp_path, "c.txt", "# header\n3 2\n\n1 2 4\n% note\n2 3 -1\n"))
        assert r.graph.edges == [(0, 1, 4), (1, 2, -1)]

    def test_float_inference(self, tmp_path):
        assert parse_instance(write(tmp_path, "f.txt", "3 2\n1 2 0.5\n2 3 1\n")).value_kind == "float"
        assert parse_instance(write(tmp_path, "i.txt", "3 2\n1 2 2.0\n2 3 1\n")).value_kind == "integer"

    def test_gset_torus_shape(self, tmp_path):
        # G11-sized toroidal grid written and re-read in the edge-list format
        p = tmp_path / "torus.txt"
        write_instance(toroidal_grid(20, 40), p)
        r = parse_instance(p)
        assert r.n == GSET_TABLE["G11"][0] and round(r.density, 3) == GSET_TABLE["G11"][1]

    @pytest.mark.parametrize("text, line", [
        ("2 1\n1 1 1\n", 2),            # self-loop
        ("3 2\n1 2 1\n2 1 5\n", 3),     # duplicate, reversed
        ("2 1\n1 3 1\n", 2),            # out of range
        ("2 1\n0 1 1\n", 2),            # 0-based index
        ("3 2\n1 2 1\n", 3),            # too few edges
        ("3 1\n1 2 1\n2 3 1\n", 3),     # too many edges
        ("2 1\n1 2 x\n", 2),            # bad weight
        ("2 1\n1 2\n", 2),              # missing weight
        ("2\n", 1),                     # bad header
        ("", 1),                        # empty
    ])
    def test_errors_carry_line(self, tmp_path, text, line):
        with pytest.raises(ParseError) as exc:
            parse_instance(write(tmp_path, "bad.txt", text))
        assert exc.value.line == line and "bad.txt" in str(exc.value)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            parse_instance(tmp_path / "nope.txt")


class TestCategorize:
    @pytest.mark.parametrize("n, d, size, dens", [
        (2048, 0.05, "medium", "sparse"), (1024, 0.5, "small", "dense"), (8192, 0.01, "x-large", "sparse"),
        (20, 0.1, "x-small", "balanced"), (1023, 0.0999, "x-small", "sparse"), (4096, 1.0, "large", "dense"),
    ])
    def test_boundaries(self, n, d, size, dens):
        c = categorize(n, d)
        assert (c.size_class, c.density_class) == (size, dens)

    def test_below_taxonomy(self):
        with pytest.raises(ValueError):
            categorize(19, 0.5)

    @given(n=st.integers(20, 10 ** 6), d=st.floats(0, 1))
    def test_partition(self, n, d):
        c = categorize(n, d)
        size_hits = [s for s, lo, hi in [("x-small", 20, 1024), ("small", 1024, 2048), ("medium", 2048, 4096),
                                          ("large", 4096, 8192), ("x-large", 8192, math.inf)] if lo <= n < hi]
        dens_hits = [s for s, lo, hi in [("sparse", 0, 0.1), ("balanced", 0.1, 0.5), ("dense", 0.5, math.inf)]
                     if lo <= d < hi]
        assert [c.size_class] == size_hits and [c.density_class] == dens_hits
        assert c.size_class in SIZE_CLASSES and c.density_class in DENSITY_CLASSES

    def test_record_consistency(self):
        g = WeightedGraph(30, [(i, i + 1, 1) for i in range(29)])
        r = InstanceRecord.from_graph("p", g)
        assert r.density == r.m / (r.n * (r.n - 1) / 2)
        assert r.category == categorize(r.n, r.density)


class TestManifests:
    def test_filter_strictly_above(self):
        recs = [InstanceRecord.from_graph(f"i{k}", WeightedGraph(2, [(0, 1, 1)]), b)
                for k, b in enumerate([0.1, 0.25, 0.2500001, 3.0, None])]
        assert [r.id for r in select_instances(recs)] == ["i2", "i3"]

    def test_manifest_round_trip(self, tmp_path):
        write_instance(WeightedGraph(3, [(0, 1, 1)]), tmp_path / "a.txt")
        write_instance(WeightedGraph(2, [(0, 1, 2.5)]), tmp_path / "b.txt")
        write_manifest(tmp_path / "m.txt", [("a.txt", 0.5), ("b.txt", None)])
        recs = load_manifest(tmp_path / "m.txt")
        assert [(r.id, r.baseline_seconds, r.value_kind) for r in recs] == [("a", 0.5, "integer"),
                                                                             ("b", None, "float")]

    def test_limits_formats(self, tmp_path):
        assert load_limits(write(tmp_path, "l.json", '{"a": 2, "b": 1.5}')) == {"a": 2.0, "b": 1.5}
        assert load_limits(write(tmp_path, "l.txt", "id seconds\na 2\nb,1.5\n")) == {"a": 2.0, "b": 1.5}
        with pytest.raises(ParseError):
            load_limits(write(tmp_path, "bad.txt", "a 1 2\n"))


class StubSolver:
    solver_id = "stub"

    def __init__(self, cuts, runtimes, assignment):
        self.cuts, self.runtimes, self.assignment = cuts, runtimes, assignment

    def __call__(self, record, limit, seed):
        return SolverOutcome(self.assignment, self.cuts[seed], self.runtimes[seed])


class TestBench:
    def test_best_of_rule(self, tmp_path):
        # claims of 3 and 4 do not match their assignment and are rejected
        g = WeightedGraph(2, [(0, 1, 5)])
        inst = InstanceRecord.from_graph("g", g)
        cuts = [3, 5, 5, 4, 5]

        class Scripted:
            solver_id = "stub"

            def __call__(self, record, limit, seed):
                return SolverOutcome(np.array([0, 1] if cuts[seed] == 5 else [0, 0]), cuts[seed],
                                     [1, 9, 2, 1, 4][seed])

        res = run_benchmark([inst], Scripted(), {"g": 10.0}, lock_path=tmp_path / "l")
        statuses = [r.status for r in res.records]
        assert statuses == ["rejected", "ok", "ok", "rejected", "ok"]
        b = res.best["g"]
        assert (b.cut, b.runtime, b.seed) == (5, 2, 2)

    def test_best_of_pure(self):
        recs = [rec("a", c, r, seed=s) for s, (c, r) in enumerate(zip([3, 5, 5, 4, 5], [1, 9, 2, 1, 4]))]
        b = best_of(recs)
        assert (b.cut, b.runtime) == (5, 2)

    def test_tampered_assignment_rejected(self, tmp_path):
        inst = k2()
        res = run_benchmark([inst], StubSolver([1], [0.1], np.array([0, 0])), {"k2": 1.0}, seeds=1,
                            lock_path=tmp_path / "l")
        assert res.records[0].status == "rejected" and res.failures == 1 and "k2" not in res.best

    def test_crash_is_failed_and_run_continues(self, tmp_path):
        def boom(record, limit, seed):
            if seed == 1:
                raise RuntimeError("crash")
            return SolverOutcome(np.array([0, 1]), 1, 0.1)

        res = run_benchmark([k2()], boom, {"k2": 1.0}, seeds=3, lock_path=tmp_path / "l")
        assert [r.status for r in res.records] == ["ok", "failed", "ok"]

    def test_missing_limit(self, tmp_path):
        with pytest.raises(ValueError):
            run_benchmark([k2()], StubSolver([1], [1], None), {}, lock_path=tmp_path / "l")

    def test_end_to_end_real_annealer(self, tmp_path, rng):
        insts = [InstanceRecord.from_graph(f"t{k}", WeightedGraph(8, random_edges(rng, 8, p=0.5)))
                 for k in range(3)]
        solver = AnnealerSolver(SolverConfig(solver_id="sa", mode=SA, runs=2, iterations=2000))
        res = run_benchmark(insts, solver, {i.id: 5.0 for i in insts}, archive_dir=tmp_path / "arch",
                            lock_path=tmp_path / "l")
        assert res.failures == 0 and len(res.records) == 15
        for inst in insts:
            per_seed = [r.cut for r in res.records if r.instance_id == inst.id]
            assert res.best[inst.id].cut == max(per_seed)
            assert res.best[inst.id].cut == brute_max_cut_subsets(8, inst.graph.edges)
            sol = load_solution(tmp_path / "arch" / f"{inst.id}__sa.sol")
            assert verify_solution(inst, sol.x, sol.cut)

    def test_quantized_solver_reports_true_cut(self, rng):
        g = WeightedGraph(10, [(u, v, float(w) / 3) for u, v, w in random_edges(rng, 10, p=0.6)])
        inst = InstanceRecord.from_graph("q", g)
        out = AnnealerSolver(SolverConfig(mode=SA, runs=2, iterations=3000, quantize=15))(inst, 5.0, 0)
        assert out.cut == cut_value(g, out.x)
        assert verify_solution(inst, out.x, out.cut)


class TestVerify:
    def test_k2(self):
        assert verify_solution(k2(), [0, 1], 1)
        assert not verify_solution(k2(), [0, 0], 1)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            verify_solution(k2(), [0, 1, 1], 1)

    def test_float_tolerance(self):
        inst = InstanceRecord.from_graph("f", WeightedGraph(2, [(0, 1, 0.1)]))
        assert verify_solution(inst, [1, 0], 0.1 * (1 + 1e-12))
        assert not verify_solution(inst, [1, 0], 0.1 * (1 + 1e-6))

    def test_exhaustive_optimum(self, rng):
        for _ in range(5):
            g = WeightedGraph(12, random_edges(rng, 12, p=0.4))
            X = all_assignments(12)
            cuts = [cut_value(g, x) for x in X]
            k = int(np.argmax(cuts))
            assert cuts[k] == brute_max_cut_subsets(12, g.edges)
            assert verify_solution(InstanceRecord.from_graph("r", g), X[k], cuts[k])


class TestArchive:
    def test_round_trip_ten(self, tmp_path, rng):
        insts, recs = [], []
        for k in range(10):
            g = WeightedGraph(9, random_edges(rng, 9, p=0.5) if k % 2 else
                              [(u, v, w + 0.25) for u, v, w in random_edges(rng, 9, p=0.5)])
            inst = InstanceRecord.from_graph(f"i{k}", g)
            x = rng.integers(0, 2, 9).astype(np.int8)
            r = rec(inst.id, cut_value(g, x), 0.123456789012345678, kind=inst.value_kind)
            r.assignment = x
            insts.append(inst)
            recs.append(r)
        paths = archive_solutions(recs, tmp_path / "a")
        assert len(paths) == 10
        for inst, p in zip(insts, paths):
            sol = load_solution(p)
            assert sol.instance_id == inst.id and verify_solution(inst, sol.x, sol.cut)
        first = paths[0].read_text().splitlines()
        assert first[0].split()[0] == "i0" and set(first[1]) <= {"0", "1"}

    def test_malformed(self, tmp_path):
        with pytest.raises(ValueError):
            load_solution(write(tmp_path, "x.sol", "a b c\n0101\n"))
        with pytest.raises(ValueError):
            load_solution(write(tmp_path, "y.sol", "a b 1 1.0\n0121\n"))

    def test_unwritable_directory(self, tmp_path):
        blocker = write(tmp_path, "file", "")
        r = rec("a", 1)
        r.assignment = np.array([0, 1])
        with pytest.raises(OSError) as exc:
            archive_solutions([r], blocker / "sub")
        assert "sub" in str(exc.value)


class TestCompare:
    def test_identical_sets_all_ties(self):
        a = [rec(f"i{k}", k + 3) for k in range(6)]
        rep = compare(a, a)
        assert rep.totals.tie == 6 and rep.totals.win == rep.totals.loss == 0
        assert all(r.accuracy == 1.0 for r in rep.rows)

    def test_plus_one_all_wins(self):
        b = [rec(f"i{k}", k + 3) for k in range(6)]
        a = [rec(f"i{k}", k + 4) for k in range(6)]
        rep = compare(a, b)
        assert rep.totals.win == 6 and all(r.accuracy > 1 for r in rep.rows)

    def test_float_tolerance(self):
        assert classify(1.0, 1.0 + 1e-12, "float") == TIE
        assert classify(1.0 + 1e-6, 1.0, "float") == WIN
        assert classify(10, 11) == LOSS

    def test_headline_percentages(self):
        rep = ComparisonReport.from_counts(HEADLINE_COUNTS["wins"], HEADLINE_COUNTS["ties"],
                                           HEADLINE_COUNTS["total"] - 511 - 88)
        assert rep.totals.total == 738
        assert rep.totals.percentages() == {WIN: 69.24, TIE: 11.92, LOSS: 18.83}

    def test_exclusions(self):
        rep = compare([rec("a", 1), rec("b", 2)], [rec("b", 2), rec("c", 3)])
        assert rep.exclusions == 2 and rep.excluded_ids == ["a", "c"] and rep.totals.total == 1

    def test_reduces_to_best_of(self):
        a = [rec("x", 5, 3.0, seed=0), rec("x", 7, 9.0, seed=1), rec("x", 9, 1.0, seed=2, status="failed")]
        rep = compare(a, [rec("x", 7)])
        assert rep.rows[0].outcome == TIE and rep.rows[0].cut_a == 7

    def test_bins_and_float_flags(self):
        a = [rec("i", 995), rec("j", 1000), rec("k", 1.5, kind="float"), rec("l", 2000)]
        b = [rec("i", 1000), rec("j", 1000), rec("k", 1.0, kind="float"), rec("l", 1000)]
        rep = compare(a, b)
        counts = {bn.label: bn.count for bn in rep.bins if bn.count}
        assert counts == {"[0.994,0.996)": 1, "[1,1.002)": 1, ">=1.01": 2}
        assert rep.float_flags == {"i": False, "j": False, "k": True, "l": False}
        assert rep.float_totals.win == 1
        assert [b.float_count for b in rep.bins][-1] == 1
        assert len(rep.bins) == len(DEFAULT_ACCURACY_EDGES) + 1

    @given(pairs=st.lists(st.tuples(st.integers(1, 50), st.integers(1, 50)), min_size=1, max_size=20))
    def test_antisymmetry(self, pairs):
        a = [rec(f"i{k}", x) for k, (x, _) in enumerate(pairs)]
        b = [rec(f"i{k}", y) for k, (_, y) in enumerate(pairs)]
        ab, ba = compare(a, b), compare(b, a)
        assert (ab.totals.win, ab.totals.tie, ab.totals.loss) == (ba.totals.loss, ba.totals.tie, ba.totals.win)
        for r1, r2 in zip(ab.rows, ba.rows):
            assert r1.accuracy == pytest.approx(1 / r2.accuracy, rel=1e-12)

    def test_totals_conserved(self, rng):
        cats = ["x-small/sparse", "small/dense", "medium/balanced"]
        a = [rec(f"i{k}", int(rng.integers(1, 5)), category=cats[k % 3]) for k in range(40)]
        b = [rec(f"i{k}", int(rng.integers(1, 5)), category=cats[k % 3]) for k in range(40)]
        rep = compare(a, b)
        for attr in ("win", "tie", "loss"):
            assert getattr(rep.totals, attr) == sum(getattr(c, attr) for c in rep.per_category.values())
        assert sum(bn.count for bn in rep.bins) == rep.totals.total == 40

    def test_empty_report(self):
        rep = compare([], [])
        d = json.loads(export_report(rep, "json"))
        assert d["totals"]["total"] == 0 and d["rows"] == []
        assert export_report(rep, "csv").splitlines() == ["instance_id,category,value_kind,cut_a,cut_b,accuracy,outcome"]

    def test_export_formats(self, tmp_path):
        rep = compare([rec("a", 3), rec("b", 1, category="small/dense")], [rec("a", 2), rec("b", 1)])
        text = export_report(rep, "summary-csv", tmp_path / "s.csv")
        rows = list(csv.DictReader(io.StringIO(text)))
        assert rows[-1]["category"] == "total" and rows[-1]["win"] == "1" and rows[-1]["tie"] == "1"
        assert (tmp_path / "s.csv").read_text() == text
        d = json.loads(export_report(rep, "json"))
        assert d["rows"][0]["accuracy"] == 1.5
        with pytest.raises(ValueError):
            export_report(rep, "xml")

    def test_unwritable_report(self, tmp_path):
        with pytest.raises(OSError) as exc:
            export_report(compare([], []), "json", tmp_path / "missing" / "r.json")
        assert "r.json" in str(exc.value)


class TestSerialisation:
    def test_seventeen_digits(self):
        assert fmt_float(0.1) == "0.10000000000000001"
        assert fmt_float(2.0) == "2.0" and fmt_float(0.0) == "0.0"
        assert dumps({"a": [1, 0.5, None, True]}) == '{"a": [1, 0.5, null, true]}'

    def test_records_round_trip(self, tmp_path):
        rs = [rec("a", 5, 0.3), rec("b", 2.75, 1.0 / 3, kind="float")]
        write_records(rs, tmp_path / "r.csv")
        back = read_records(tmp_path / "r.csv")
        assert [(r.instance_id, r.cut, r.runtime, r.value_kind) for r in back] == \
               [("a", 5, 0.3, "integer"), ("b", 2.75, 1.0 / 3, "float")]

    def test_bad_record_row(self, tmp_path):
        p = write(tmp_path, "r.csv", "instance_id,cut\na,notanumber\n")
        with pytest.raises(ValueError) as exc:
            read_records(p)
        assert ":2:" in str(exc.value)


class TestRuntimeDeviation:
    def test_all_on_limit(self):
        dev = runtime_deviation([rec(f"i{k}", 1, 2.0, limit=2.0) for k in range(5)])
        assert dev.violations == [] and dev.total == 5

    def test_scripted_ratios(self):
        rs = [rec("a", 1, 0.5), rec("b", 1, 1.05), rec("c", 1, 1.2)]
        dev = runtime_deviation(rs)
        assert [v[0] for v in dev.violations] == ["c"]
        assert sum(dev.counts) == 3

    def test_conservation_with_extremes(self):
        rs = [rec(f"i{k}", 1, r) for k, r in enumerate([1e-4, 0.5, 1.0, 50.0])]
        dev = runtime_deviation(rs)
        assert sum(dev.counts) == 4 and dev.counts[0] == 1 and dev.counts[-1] == 1


class TestTrace:
    def test_single_point(self):
        tr = trace_accuracy([(0.5, 100)], 100, "x")
        assert tr.points == [(0.5, 1.0)] and tr.time_of_best == 0.5

    def test_energies_map_through_abs(self):
        tr = trace_accuracy([(0.1, -50), (0.2, -80)], 100)
        assert [p[1] for p in tr.points] == [0.5, 0.8]

    def test_reference_positive(self):
        with pytest.raises(ValueError):
            trace_accuracy([(0.0, 1)], 0)

    def test_final_matches_compare(self, rng):
        g = WeightedGraph(30, random_edges(rng, 30, p=0.3))
        inst = InstanceRecord.from_graph("t", g)
        out = AnnealerSolver(SolverConfig(mode=SA, runs=2, iterations=3000))(inst, 5.0, 0)
        ref = out.cut + 3
        tr = trace_accuracy(out.progress, ref, "t")
        ratios = [p[1] for p in tr.points]
        assert all(b >= a for a, b in zip(ratios, ratios[1:]))
        a = rec("t", out.cut)
        rep = compare([a], [rec("t", ref)])
        assert tr.points[-1][1] == pytest.approx(rep.rows[0].accuracy, rel=1e-15)


class TestReference:
    def test_targets(self):
        assert best_known_cut("G11") == 564 and best_known_cut("G14") == 3064
        assert best_known_cut("G43") == 6660 and best_known_cut("G48") == 6000
        assert best_known_cut("G66") == 6288
