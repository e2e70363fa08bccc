import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dabench.baseline import (DEFAULT_SEEDS, TimeLimitReport, adjusted_limit, baseline_time_limit,
                              greedy_local_search, time_restarts)
from dabench.qubo import QuboModel, delta_energy, evaluate, random_model


class TestGreedyLocalSearch:
    def test_zero_model_keeps_start(self, rng):
        x0 = rng.integers(0, 2, 7)
        x, e = greedy_local_search(QuboModel.zeros(7), 0, initial=x0)
        assert np.array_equal(x, x0) and e == 0

    def test_single_variable(self):
        x, e = greedy_local_search(QuboModel.from_dict(1, {(0, 0): 5}), 0, initial=[1])
        assert x.tolist() == [0] and e == 0

    def test_first_improvement_order(self):
        # from (0, 0) both flips improve by 2; the lower index goes first, after
        # which flipping variable 1 would cost +1
        m = QuboModel.from_dict(2, {(0, 0): -2, (1, 1): -2, (1, 0): 3})
        x, e = greedy_local_search(m, 0, initial=[0, 0])
        assert x.tolist() == [1, 0] and e == -2

    def test_local_optimality(self, rng):
        for _ in range(50):
            m = random_model(10, rng, density=0.6)
            x, e = greedy_local_search(m, int(rng.integers(1 << 31)))
            assert e == evaluate(m, x)
            assert all(delta_energy(m, x, i) >= 0 for i in range(10))

    def test_float_model(self, rng):
        m = random_model(15, rng, integer=False)
        x, _ = greedy_local_search(m, 3)
        assert all(delta_energy(m, x, i) >= -1e-12 for i in range(15))

    def test_deterministic(self, rng):
        m = random_model(40, rng, density=0.3)
        a, b = greedy_local_search(m, 11), greedy_local_search(m, 11)
        assert np.array_equal(a[0], b[0]) and a[1] == b[1]


class TestBaselineTimeLimit:
    def test_floor_on_tiny_model(self):
        rep = baseline_time_limit(QuboModel.from_dict(2, {(1, 0): -1}))
        assert rep.baseline_seconds == 0.001
        assert rep.seeds == list(DEFAULT_SEEDS) and len(rep.per_seed_seconds) == 5

    def test_mean_definition(self, rng):
        m = random_model(400, rng, density=0.05)
        rep = baseline_time_limit(m, restarts=100, seeds=[0, 1, 2])
        assert rep.baseline_seconds == max(0.001, sum(rep.per_seed_seconds) / 3)
        assert rep.baseline_seconds >= 0.001

    def test_rejects_zero_restarts(self):
        with pytest.raises(ValueError):
            baseline_time_limit(QuboModel.zeros(2), restarts=0)

    def test_report_json(self):
        rep = TimeLimitReport([0.5, 0.7], 0.6, [0, 1], 1500, "g1")
        assert json.loads(rep.to_json()) == {"per_seed_seconds": [0.5, 0.7], "baseline_seconds": 0.6,
                                             "seeds": [0, 1], "restarts": 1500, "instance": "g1"}

    @pytest.mark.slow
    def test_doubling_restarts_doubles_time(self):
        m = random_model(1000, np.random.default_rng(1), density=0.01)
        t1 = min(time_restarts(m, 200, 0) for _ in range(3))
        t2 = min(time_restarts(m, 400, 0) for _ in range(3))
        assert 1.6 <= t2 / t1 <= 2.4


class TestAdjustedLimit:
    @pytest.mark.parametrize("T, offset, want", [(10, 3, 8), (0.5, 3, 1), (100, 3, 100)])
    def test_examples(self, T, offset, want):
        assert adjusted_limit(T, offset) == want

    @pytest.mark.parametrize("T, offset, want", [(4.0, 0.4, 4), (6.0, 1.6, 5), (7.0, 5.7, 2), (2.0, 0.2, 2)])
    def test_decimal_boundaries(self, T, offset, want):
        # 1.1 T - offset lands exactly on an integer in decimal arithmetic
        assert adjusted_limit(T, offset) == want

    def test_errors(self):
        with pytest.raises(ValueError):
            adjusted_limit(0, 1)
        with pytest.raises(ValueError):
            adjusted_limit(5, -1)

    @given(T=st.floats(1e-3, 1e5), a=st.floats(0, 100), b=st.floats(0, 100))
    def test_properties(self, T, a, b):
        lo, hi = sorted((a, b))
        assert adjusted_limit(T, hi) <= adjusted_limit(T, lo)
        assert adjusted_limit(T, lo) >= 1
        assert adjusted_limit(T, 0) <= max(1, math.floor(T * 1.1))
        assert isinstance(adjusted_limit(T, lo), int)
