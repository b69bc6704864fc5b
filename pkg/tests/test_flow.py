import math

import numpy as np
import pytest

from stochflow import flow, integrate, wiener
from stochflow.families import build_family
from stochflow.flow import FlowGrid, homeomorphism_report, near_pairs, uniform_ball_grid


def _path(n_max=10, dim=1, seed=7, index=0):
    return wiener.sample_path(n_max, dim, seed, index)


class TestGrid:
    def test_points_inside_ball_enforced(self):
        with pytest.raises(ValueError):
            FlowGrid(initial_points=np.array([[3.0, 0.0]]), radius=2.0)

    def test_duplicates_rejected(self):
        with pytest.raises(ValueError):
            FlowGrid(initial_points=np.array([[1.0], [1.0]]), radius=2.0)

    def test_uniform_ball_grid_deterministic_and_inside(self):
        a = uniform_ball_grid(2, 4.0, 50, seed=3)
        b = uniform_ball_grid(2, 4.0, 50, seed=3)
        assert np.array_equal(a.initial_points, b.initial_points)
        assert np.max(np.linalg.norm(a.initial_points, axis=-1)) <= 4.0
        assert len(a.initial_points) == 50


class TestSimulateFlow:
    def test_single_point_matches_solver(self):
        sys_ = build_family("geometric", {"sigma": 1.0})
        path = _path()
        grid = FlowGrid(initial_points=np.array([[1.5]]), radius=2.0)
        result = flow.simulate_flow(sys_, path, 6, grid)
        direct = integrate.solve_regularized(sys_, path, 6, [1.5])
        assert np.array_equal(result[(1.5,)].states, direct.states)

    def test_linear_flow_preserves_midpoints(self):
        sys_ = build_family("linear", {
            "drift_matrix": [[0.0, 0.1], [-0.1, 0.0]],
            "diffusion_matrices": [[[0.0, -0.5], [0.5, 0.0]]],
        })
        path = _path(dim=1, seed=5)
        pts = np.array([[1.0, 0.0], [2.0, 1.0], [3.0, 2.0]])  # collinear, equispaced
        grid = FlowGrid(initial_points=pts, radius=4.0)
        result = flow.simulate_flow(sys_, path, 8, grid)
        a = result[tuple(pts[0])].states
        b = result[tuple(pts[1])].states
        c = result[tuple(pts[2])].states
        assert b == pytest.approx((a + c) / 2.0, abs=1e-9)

    def test_geometric_flow_order_preserved(self):
        sys_ = build_family("geometric", {"sigma": 1.0})
        path = _path(seed=9)
        pts = np.array([[-1.0], [0.5], [2.0]])
        result = flow.simulate_flow(sys_, path, 8, FlowGrid(pts, radius=3.0))
        stacked = np.stack([result[tuple(p)].states[:, 0] for p in pts])
        assert np.all(np.diff(stacked, axis=0) > 0)

    def test_grid_order_does_not_change_trajectories(self):
        sys_ = build_family("log_growth")
        path = _path(dim=2, seed=13)
        pts = np.array([[0.5, 0.0], [0.0, 1.0], [-1.0, 0.5]])
        fwd = flow.simulate_flow(sys_, path, 6, FlowGrid(pts, radius=2.0))
        rev = flow.simulate_flow(sys_, path, 6, FlowGrid(pts[::-1], radius=2.0))
        for key, traj in fwd.items():
            assert np.array_equal(traj.states, rev[key].states)


class TestSupProcess:
    def test_starts_at_initial_norm_and_monotone(self):
        sys_ = build_family("trig")
        traj = integrate.solve_regularized(sys_, _path(), 6, [-0.75])
        sup = flow.sup_process(traj)
        assert sup[0] == pytest.approx(0.75)
        assert np.all(np.diff(sup) >= 0.0)

    def test_geometric_sup_is_exp_of_max(self):
        sys_ = build_family("geometric", {"sigma": 1.0})
        path = _path(seed=21)
        n = 8
        traj = integrate.solve_regularized(sys_, path, n, [2.0])
        sup = flow.sup_process(traj)
        grid_max = max(
            wiener.interpolant_value(path, n, float(t))[0] for t in traj.times
        )
        assert sup[-1] == pytest.approx(2.0 * math.exp(grid_max), rel=1e-6)


class TestTwoPoint:
    def test_equal_points_zero_distance(self):
        sys_ = build_family("log_growth")
        rec = flow.two_point(sys_, _path(dim=2), 6, [0.5, 0.5], [0.5, 0.5])
        assert np.all(rec.distances == 0.0)

    def test_geometric_two_point_linear_in_gap(self):
        sys_ = build_family("geometric", {"sigma": 1.0})
        path = _path(seed=23)
        n = 8
        rec = flow.two_point(sys_, path, n, [1.0], [1.001])
        grid_max = max(
            wiener.interpolant_value(path, n, float(t))[0] for t in rec.times
        )
        assert rec.sup_distance == pytest.approx(0.001 * math.exp(grid_max), rel=1e-6)
        assert rec.sup_distance >= np.max(rec.distances) - 1e-15

    def test_near_pairs_shapes(self):
        pairs = near_pairs([1.0, 0.0], ks=range(1, 11))
        assert len(pairs) == 10
        for k, (x, y) in zip(range(1, 11), pairs):
            assert np.linalg.norm(y - x) == pytest.approx(2.0**-k)


class TestHomeomorphismReport:
    def test_identity_at_time_zero(self):
        sys_ = build_family("trig")
        pts = np.array([[-1.0], [0.0], [0.7]])
        result = flow.simulate_flow(sys_, _path(), 6, FlowGrid(pts, radius=2.0))
        rep = homeomorphism_report(result, 0.0)
        assert rep.injectivity_margin == pytest.approx(0.7)
        assert rep.order_preserved is True
        assert rep.explosion_count == 0
        assert rep.violations == ()

    def test_geometric_margin_is_scaled_min_gap(self):
        sys_ = build_family("geometric", {"sigma": 1.0})
        path = _path(seed=29)
        pts = np.array([[0.5], [1.0], [2.0]])
        result = flow.simulate_flow(sys_, path, 8, FlowGrid(pts, radius=3.0))
        t = 1.0
        rep = homeomorphism_report(result, t)
        w1 = path.values[-1, 0]
        assert rep.injectivity_margin == pytest.approx(0.5 * math.exp(w1), rel=1e-6)
        assert rep.order_preserved is True

    def test_explosive_counterexample_reported(self):
        sys_ = build_family("explosive")
        path = _path(n_max=8)
        pts = np.array([[0.1], [2.0]])
        result = flow.simulate_flow(sys_, path, 8, FlowGrid(pts, radius=3.0))
        rep = homeomorphism_report(result, 0.75)
        assert rep.explosion_count >= 1
        assert any("explosion" in v for v in rep.violations)


def test_flow_snapshot_csv(tmp_path):
    sys_ = build_family("geometric", {"sigma": 1.0})
    pts = np.array([[1.0], [2.0]])
    result = flow.simulate_flow(sys_, _path(), 6, FlowGrid(pts, radius=3.0))
    out = tmp_path / "snap.csv"
    with out.open("w") as fh:
        flow.dump_flow_snapshot_csv(result, 0.5, fh)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "x1,y1,exploded"
    assert len(lines) == 3
    x, y, flag = lines[1].split(",")
    assert float(x) == 1.0 and flag == "0"
