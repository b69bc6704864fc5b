import math

import numpy as np
import pytest

from stochflow import integrate, wiener
from stochflow.families import build_family
from stochflow.fields import truncate_system
from stochflow.integrate import SolverConfig


def _path(n_max=12, dim=1, seed=7, index=0):
    return wiener.sample_path(n_max, dim, seed, index)


class TestRegularized:
    def test_zero_fields_stationary(self):
        sys_ = build_family("constant", {"drift": [0.0, 0.0], "diffusions": [[0.0, 0.0]]})
        path = _path(dim=1)
        for n in (2, 6):
            traj = integrate.solve_regularized(sys_, path, n, [1.0, -2.0])
            assert np.allclose(traj.states, [1.0, -2.0])

    def test_constant_fields_linear_quadrature(self):
        a0, a1 = 0.3, 1.7
        sys_ = build_family("constant", {"drift": [a0], "diffusions": [[a1]]})
        path = _path()
        terminals = []
        for n in (3, 7, 11):
            traj = integrate.solve_regularized(sys_, path, n, [0.5])
            for t, state in zip(traj.times, traj.states):
                wn = wiener.interpolant_value(path, n, float(t))[0]
                assert state[0] == pytest.approx(0.5 + a1 * wn + a0 * t, abs=1e-9)
            terminals.append(traj.terminal[0])
        # w^n at t=1 equals w_1 for every n, so the terminal is level-free
        assert np.ptp(terminals) <= 1e-9

    def test_geometric_separable_exactness(self):
        sys_ = build_family("geometric", {"sigma": 1.0})
        path = _path(seed=3)
        for n in (4, 8, 12):
            traj = integrate.solve_regularized(sys_, path, n, [2.0])
            for t, state in zip(traj.times, traj.states):
                wn = wiener.interpolant_value(path, n, float(t))[0]
                exact = 2.0 * math.exp(wn)
                assert abs(state[0] - exact) / exact <= 1e-7

    def test_substep_refinement_fourth_order(self):
        sys_ = build_family("geometric", {"sigma": 1.0})
        path = _path(n_max=6, seed=5)
        terminals = []
        for sub in (1, 2, 4, 8):
            cfg = SolverConfig(substeps_per_interval=sub)
            terminals.append(integrate.solve_regularized(sys_, path, 4, [1.0], cfg).terminal[0])
        change1 = abs(terminals[1] - terminals[0])
        change2 = abs(terminals[2] - terminals[1])
        change3 = abs(terminals[3] - terminals[2])
        assert change2 <= change1 / 16.0 * 1.5
        assert change3 <= change2 / 16.0 * 1.5

    def test_truncation_identity_inside_ball(self):
        sys_ = build_family("log_growth", {"sigma": [0.3, 0.3], "kappa": 0.2})
        path = _path(n_max=10, dim=2, seed=11)
        full = integrate.solve_regularized(sys_, path, 8, [0.5, 0.5])
        radius = np.max(np.linalg.norm(full.states, axis=-1))
        m = max(2.0, math.ceil(radius) + 1.0)
        trunc = integrate.solve_regularized(truncate_system(sys_, m), path, 8, [0.5, 0.5])
        scale = np.max(np.abs(full.states))
        assert np.max(np.abs(full.states - trunc.states)) / scale <= 1e-10


class TestReference:
    def test_additive_noise_quadrature(self):
        sys_ = build_family("constant", {"drift": [0.0], "diffusions": [[1.0]]})
        path = _path(n_max=10)
        traj = integrate.solve_reference(sys_, path, [0.25])
        out_level = SolverConfig().resolve_output_level(10)
        stride = 2 ** (10 - out_level)
        nodes = path.values[::stride, 0]
        assert traj.states[:, 0] == pytest.approx(0.25 + nodes, abs=1e-12)

    def test_geometric_pathwise_and_mean(self):
        sys_ = build_family("geometric", {"sigma": 1.0})
        cfg = SolverConfig(substeps_per_interval=2)
        n = 10
        values = wiener.sample_path_values(n, 1, seed=17, indices=range(300))
        slopes = wiener.slopes_from_values(values, n, n)
        res = integrate.integrate_slopes(
            sys_, slopes, np.array([[1.0]]), n, cfg, mode="terminal"
        )
        terminals = res.terminal[:, 0, 0]
        w1s = values[:, -1, 0]
        assert terminals == pytest.approx(np.exp(w1s), rel=1e-7)
        stderr = terminals.std(ddof=1) / math.sqrt(len(terminals))
        assert abs(terminals.mean() - math.exp(0.5)) <= 3 * stderr

    def test_cross_check_gap_small(self):
        sys_ = build_family("geometric", {"sigma": 1.0})
        path = _path(n_max=12, seed=19)
        primary, check, gap = integrate.reference_with_cross_check(sys_, path, [1.0])
        assert gap <= 1e-4 * np.max(np.abs(primary.states))
        assert len(check.times) == len(primary.times)


class TestIto:
    def test_zero_diffusion_reduces_to_drift_flow(self):
        sys_ = build_family("constant", {"drift": [2.0], "diffusions": [[0.0]]})
        path = _path(n_max=8)
        traj = integrate.solve_ito_corrected(sys_, path, [0.0])
        assert traj.terminal[0] == pytest.approx(2.0, abs=1e-12)

    def test_constant_diffusion_matches_reference(self):
        sys_ = build_family("constant", {"drift": [0.5], "diffusions": [[1.5]]})
        path = _path(n_max=10, seed=23)
        em = integrate.solve_ito_corrected(sys_, path, [0.0])
        ref = integrate.solve_reference(sys_, path, [0.0])
        assert np.max(np.abs(em.states - ref.states)) <= 1e-9


class TestExplosion:
    def test_bounded_fields_no_explosion(self):
        sys_ = build_family("trig")
        traj = integrate.solve_regularized(sys_, _path(n_max=8), 8, [0.0])
        assert integrate.detect_explosion(traj) is None

    def test_quadratic_drift_blowup_time(self):
        sys_ = build_family("explosive")
        path = _path(n_max=8)
        traj = integrate.solve_regularized(sys_, path, 8, [2.0])
        tau = integrate.detect_explosion(traj)
        assert tau is not None
        assert 0.48 <= tau <= 0.52
        assert np.all(traj.times < tau)

    def test_threshold_semantics(self):
        sys_ = build_family("constant", {"drift": [1e7], "diffusions": [[0.0]]})
        traj = integrate.solve_regularized(sys_, _path(n_max=4), 4, [0.0])
        assert integrate.detect_explosion(traj) is None
        sys_hot = build_family("constant", {"drift": [1e9], "diffusions": [[0.0]]})
        traj = integrate.solve_regularized(sys_hot, _path(n_max=4), 4, [0.0])
        assert integrate.detect_explosion(traj) is not None


class TestConfigAndDump:
    def test_config_validation(self):
        with pytest.raises(ValueError):
            SolverConfig(substeps_per_interval=0)
        with pytest.raises(ValueError):
            SolverConfig(explosion_threshold=0.0)

    def test_output_level_capped(self):
        assert SolverConfig().resolve_output_level(14) == 10
        assert SolverConfig().resolve_output_level(6) == 6
        assert SolverConfig(output_level=4).resolve_output_level(8) == 4

    def test_trajectory_csv(self, tmp_path):
        sys_ = build_family("geometric", {"sigma": 1.0})
        traj = integrate.solve_regularized(sys_, _path(n_max=4), 4, [1.0])
        out = tmp_path / "traj.csv"
        with out.open("w") as fh:
            integrate.dump_trajectory_csv(traj, fh)
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "t,x1,exploded"
        assert len(lines) == len(traj.times) + 1
        t0, x0, flag = lines[1].split(",")
        assert float(t0) == 0.0 and float(x0) == 1.0 and flag == ""
