import math

import numpy as np
import pytest
from scipy import integrate as scipy_integrate

from stochflow import wiener


def test_value_at_time_zero_is_zero():
    path = wiener.sample_path(6, 3, seed=1)
    assert np.all(path.values[0] == 0.0)


def test_fixed_seed_paths_bit_identical():
    a = wiener.sample_path(10, 2, seed=123, path_index=7)
    b = wiener.sample_path(10, 2, seed=123, path_index=7)
    assert np.array_equal(a.values, b.values)


def test_distinct_seeds_differ():
    a = wiener.sample_path(8, 1, seed=1)
    b = wiener.sample_path(8, 1, seed=2)
    assert not np.array_equal(a.values, b.values)


def test_level_out_of_range():
    with pytest.raises(ValueError):
        wiener.sample_path(0, 1, seed=1)
    with pytest.raises(ValueError):
        wiener.sample_path(wiener.MAX_LEVEL + 1, 1, seed=1)


def test_increment_variance_matches_level():
    n = 8
    values = wiener.sample_path_values(n, 1, seed=5, indices=range(400))
    incs = np.diff(values[:, :, 0], axis=1).ravel()
    var = incs.var(ddof=1)
    target = 2.0**-n
    stderr = target * math.sqrt(2.0 / (incs.size - 1))
    assert abs(var - target) <= 3 * stderr


def test_interpolant_slope_zero_increment():
    values = np.array([[0.0], [1.0], [1.0]])
    path = wiener.DyadicPath(n_max=1, seed=0, path_index=0, values=values)
    assert wiener.interpolant_slope(path, 1, 0.75) == pytest.approx(0.0)


def test_interpolant_slope_finest_level():
    path = wiener.sample_path(5, 2, seed=3)
    k = 11
    t = (k + 0.5) * 2.0**-5
    expected = (path.values[k + 1] - path.values[k]) * 2**5
    assert wiener.interpolant_slope(path, 5, t) == pytest.approx(expected)


def test_interpolant_fixes_dyadic_nodes():
    path = wiener.sample_path(8, 1, seed=9)
    for n in (2, 5, 8):
        for k in range(2**n + 1):
            t = k * 2.0**-n
            node = wiener.level_values(path, n)[k]
            assert wiener.interpolant_value(path, n, t) == pytest.approx(node)


def test_levels_agree_at_common_nodes():
    path = wiener.sample_path(10, 2, seed=11)
    coarse = wiener.level_values(path, 4)
    fine = wiener.level_values(path, 9)
    assert np.array_equal(coarse, fine[::32])


def test_slope_level_exceeding_resolution_rejected():
    path = wiener.sample_path(4, 1, seed=0)
    with pytest.raises(ValueError):
        wiener.interpolant_slope(path, 5, 0.5)


def test_gamma_unit_increment():
    n = 3
    values = np.zeros((2**n + 1, 1))
    values[5] = 2.0 ** (-n / 2.0)
    values[6:] = 2.0 ** (-n / 2.0)
    path = wiener.DyadicPath(n_max=n, seed=0, path_index=0, values=values)
    s = 4.5 * 2.0**-n
    assert wiener.gamma_n(path, n, s) == pytest.approx(1.0)


def test_gamma_mean_matches_folded_gaussian():
    n, dim, count = 4, 2, 3000
    samples = np.array(
        [wiener.gamma_n(wiener.sample_path(n, dim, 21, i), n, 0.3) for i in range(count)]
    )
    target = dim * math.sqrt(2.0 / math.pi)
    stderr = samples.std(ddof=1) / math.sqrt(count)
    assert abs(samples.mean() - target) <= 3 * stderr


def test_gamma_two_norm_single_component():
    n, count = 5, 3000
    samples = np.array(
        [wiener.gamma_n(wiener.sample_path(n, 1, 31, i), n, 0.6) for i in range(count)]
    )
    sq = samples**2
    stderr = sq.std(ddof=1) / math.sqrt(count)
    assert abs(sq.mean() - 1.0) <= 3 * stderr


def test_gamma_scales_linearly():
    path = wiener.sample_path(6, 2, seed=13)
    scaled = wiener.DyadicPath(
        n_max=6, seed=13, path_index=0, values=2.5 * path.values
    )
    assert wiener.gamma_n(scaled, 4, 0.3) == pytest.approx(
        2.5 * wiener.gamma_n(path, 4, 0.3)
    )


def test_gaussian_abs_moment_known_values():
    assert wiener.gaussian_abs_moment(2) == pytest.approx(1.0)
    assert wiener.gaussian_abs_moment(4) == pytest.approx(3.0)


def test_gaussian_abs_moment_q1_quadrature_oracle():
    integral, _ = scipy_integrate.quad(
        lambda s: s * math.exp(-(s**2) / 2.0), 0.0, np.inf
    )
    oracle = 2.0 * integral / math.sqrt(2.0 * math.pi)
    assert wiener.gaussian_abs_moment(1) == pytest.approx(oracle, rel=1e-10)
    assert wiener.gaussian_abs_moment(1) == pytest.approx(math.sqrt(2.0 / math.pi))


def test_gaussian_abs_moment_rejects_small_order():
    with pytest.raises(ValueError):
        wiener.gaussian_abs_moment(0.5)


def test_path_values_immutable():
    path = wiener.sample_path(5, 1, seed=2)
    with pytest.raises(ValueError):
        path.values[0] = 1.0


def test_dump_path_csv(tmp_path):
    path = wiener.sample_path(3, 2, seed=4)
    out = tmp_path / "path.csv"
    with out.open("w") as fh:
        wiener.dump_path_csv(path, fh)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "t,w1,w2"
    assert len(lines) == 2**3 + 2
    first = lines[1].split(",")
    assert float(first[0]) == 0.0
    assert float(first[1]) == 0.0
