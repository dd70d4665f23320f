from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqkit import lp
from eqkit.lp import FEAS_TOL, LinearSystem, LPError, feasible

from .oracles import vertex_feasible


def random_system(rng, max_vars=2, max_cons=4, free_prob=0.5):
    d = int(rng.integers(1, max_vars + 1))
    c = int(rng.integers(1, max_cons + 1))
    G = rng.integers(-3, 4, size=(c, d)).astype(float)
    h = rng.integers(-3, 4, size=c).astype(float)
    lb = np.where(rng.random(d) < free_prob, -np.inf, rng.integers(-2, 3, size=d).astype(float))
    return G, h, lb


class TestExamples:
    def test_interval(self):
        res = feasible(LinearSystem([[1.0], [-1.0]], [1.0, 0.0]))
        assert res.feasible and 0.0 - FEAS_TOL <= res.point[0] <= 1.0 + FEAS_TOL

    def test_empty_interval(self):
        assert not feasible(LinearSystem([[1.0], [-1.0]], [0.0, -1.0]))

    def test_lower_bound_conflict(self):
        assert not feasible(LinearSystem([[1.0, 1.0]], [1.0], [1.0, 1.0]))

    def test_no_constraints(self):
        res = feasible(LinearSystem(np.zeros((0, 2)), np.zeros(0), [3.0, -np.inf]))
        assert res.feasible and res.point[0] >= 3.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="rows"):
            LinearSystem(np.ones((2, 2)), np.ones(3))
        with pytest.raises(ValueError, match="columns"):
            LinearSystem(np.ones((2, 2)), np.ones(2), [0.0])

    def test_pivot_cap_is_reported(self):
        G = -np.eye(3)
        with pytest.raises(LPError):
            feasible(LinearSystem(G, -np.ones(3)), max_pivots=1)


class TestOracleAgreement:
    def test_two_variable_systems(self):
        rng = np.random.default_rng(20)
        for _ in range(1000):
            G, h, lb = random_system(rng)
            res = feasible(LinearSystem(G, h, lb))
            assert res.feasible == vertex_feasible(G, h, lb), (G, h, lb)

    @settings(max_examples=300, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_points_satisfy_constraints(self, seed):
        G, h, lb = random_system(np.random.default_rng(seed), 3, 5)
        system = LinearSystem(G, h, lb)
        res = feasible(system)
        if res.feasible:
            assert system.max_violation(res.point) <= FEAS_TOL


class TestInvariance:
    @settings(max_examples=300, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
    def test_row_scaling(self, seed, c):
        rng = np.random.default_rng(seed)
        G, h, lb = random_system(rng, 3, 5)
        row = int(rng.integers(len(h)))
        G2, h2 = G.copy(), h.copy()
        G2[row] *= c
        h2[row] *= c
        assert feasible(LinearSystem(G, h, lb)).feasible == feasible(LinearSystem(G2, h2, lb)).feasible

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            G, h, lb = random_system(rng, 3, 5)
            a = feasible(LinearSystem(G, h, lb))
            b = feasible(LinearSystem(G.copy(), h.copy(), lb.copy()))
            assert a.feasible == b.feasible
            if a.feasible:
                assert np.array_equal(a.point, b.point)

    def test_degenerate_system_terminates(self):
        # many redundant constraints through one vertex
        angles = np.linspace(0, np.pi / 2, 40)
        G = np.column_stack([np.cos(angles), np.sin(angles)])
        res = feasible(LinearSystem(G, np.zeros(40), [0.0, 0.0]))
        assert res.feasible
        np.testing.assert_allclose(res.point, 0.0, atol=1e-7)


class TestDegeneracy:
    def test_recorded_system_that_used_to_cycle(self):
        # a slackened multi-agent system whose phase one stalled at one vertex forever
        data = np.load(Path(__file__).parent / "data" / "degenerate_potential_system.npz")
        system = LinearSystem(data["G"], data["h"], data["lower_bounds"])
        res = feasible(system, max_pivots=10_000)
        assert res.feasible
        assert system.max_violation(res.point) <= FEAS_TOL

    @pytest.mark.parametrize("streak", [1, lp._DEGENERATE_STREAK])
    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_many_tight_rows_at_a_planted_point(self, streak, seed):
        # every row is tight at x*, and many share the same most-violated value at x = 0
        rng = np.random.default_rng(seed)
        d, c = int(rng.integers(2, 8)), int(rng.integers(10, 60))
        x_star = rng.integers(1, 4, size=d).astype(float)
        G = rng.integers(-2, 3, size=(c, d)).astype(float)
        G[: c // 2] = -np.abs(G[: c // 2])
        G[: c // 2, 0] -= 1.0
        h = G @ x_star
        h[: c // 2] = h[: c // 2].min()
        G[: c // 2, 0] += (h[: c // 2] - G[: c // 2] @ x_star) / x_star[0]
        system = LinearSystem(G, h, np.zeros(d))
        with pytest.MonkeyPatch.context() as mp:
            mp.setattr(lp, "_DEGENERATE_STREAK", streak)
            res = feasible(system, max_pivots=20_000)
        assert res.feasible
        assert system.max_violation(res.point) <= FEAS_TOL

    def test_lexicographic_ties_match_the_vertex_oracle(self, monkeypatch):
        # switch to lexicographic ties on the first degenerate pivot
        monkeypatch.setattr(lp, "_DEGENERATE_STREAK", 1)
        rng = np.random.default_rng(2)
        for _ in range(500):
            G, h, lb = random_system(rng, 3, 6)
            res = feasible(LinearSystem(G, h, lb))
            assert res.feasible == vertex_feasible(G, h, lb)
            if res.feasible:
                assert LinearSystem(G, h, lb).max_violation(res.point) <= FEAS_TOL
