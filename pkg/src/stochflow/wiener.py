"""Dyadic Brownian sample paths and their piecewise-linear interpolants.

A path is sampled once on the finest dyadic grid of level ``n_max``; every
coarser interpolant reads dyadic subsamples of the same array, so all levels
live on one common probability space.  Randomness comes from a counter-based
generator keyed by (seed, path index), which makes path generation a pure
function independent of scheduling.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

MAX_LEVEL = 24

_U64 = (1 << 64) - 1


def _uniforms(seed: int, path_index: int, count: int) -> np.ndarray:
    bitgen = np.random.Philox(key=[seed & _U64, path_index & _U64])
    u = np.random.Generator(bitgen).random(count)
    # guard the inverse-CDF endpoints
    return np.clip(u, 1e-16, 1.0 - 1e-16)


@dataclass(frozen=True)
class DyadicPath:
    """One Brownian sample on the finest dyadic grid of [0, 1].

    ``values[k]`` is the sample at time ``k * 2**-n_max``; ``values[0]`` is the
    zero vector.  Immutable; safe to share read-only across workers.
    """

    n_max: int
    seed: int
    path_index: int
    values: np.ndarray  # (2**n_max + 1, noise_dim)

    @property
    def noise_dim(self) -> int:
        return self.values.shape[1]

    @property
    def n_steps(self) -> int:
        return self.values.shape[0] - 1


def sample_path(n_max: int, noise_dim: int, seed: int, path_index: int = 0) -> DyadicPath:
    """Sample a Brownian path at dyadic level ``n_max``.

    Identical (n_max, noise_dim, seed, path_index) give bit-identical paths.
    """
    if not 1 <= n_max <= MAX_LEVEL:
        raise ValueError(f"dyadic level must be in [1, {MAX_LEVEL}], got {n_max}")
    if noise_dim < 1:
        raise ValueError("noise_dim must be >= 1")
    k = 1 << n_max
    z = ndtri(_uniforms(seed, path_index, k * noise_dim)).reshape(k, noise_dim)
    values = np.empty((k + 1, noise_dim))
    values[0] = 0.0
    np.cumsum(z * 2.0 ** (-n_max / 2.0), axis=0, out=values[1:])
    values.flags.writeable = False
    return DyadicPath(n_max=n_max, seed=seed, path_index=path_index, values=values)


def sample_path_values(n_max: int, noise_dim: int, seed: int, indices) -> np.ndarray:
    """Stack finest-grid values of several paths: (len(indices), 2**n_max + 1, N)."""
    return np.stack([sample_path(n_max, noise_dim, seed, i).values for i in indices])


def level_values(path: DyadicPath, n: int) -> np.ndarray:
    """Nodes of the level-n interpolant, read off the stored finest grid."""
    if n > path.n_max:
        raise ValueError(f"level {n} exceeds path resolution {path.n_max}")
    stride = 1 << (path.n_max - n)
    return path.values[::stride]


def subsample_values(values: np.ndarray, n_max: int, n: int) -> np.ndarray:
    """Batch form of :func:`level_values` for stacked path arrays (..., K+1, N)."""
    if n > n_max:
        raise ValueError(f"level {n} exceeds path resolution {n_max}")
    stride = 1 << (n_max - n)
    return values[..., ::stride, :]


def slopes_from_values(values: np.ndarray, n_max: int, n: int) -> np.ndarray:
    """Piecewise-constant slopes of the level-n interpolant, (..., 2**n, N)."""
    w = subsample_values(values, n_max, n)
    return np.diff(w, axis=-2) * float(1 << n)


def interpolant_slopes(path: DyadicPath, n: int) -> np.ndarray:
    return slopes_from_values(path.values, path.n_max, n)


def _interval_index(n: int, t: float) -> int:
    if not 0.0 <= t < 1.0:
        raise ValueError("time must lie in [0, 1)")
    return min(int(t * (1 << n)), (1 << n) - 1)


def interpolant_slope(path: DyadicPath, n: int, t: float) -> np.ndarray:
    """Constant slope of the level-n interpolant on the interval containing t."""
    w = level_values(path, n)
    k = _interval_index(n, t)
    return (w[k + 1] - w[k]) * float(1 << n)


def interpolant_value(path: DyadicPath, n: int, t: float) -> np.ndarray:
    """Value of the piecewise-linear level-n interpolant at time t in [0, 1]."""
    if t == 1.0:
        return level_values(path, n)[-1]
    w = level_values(path, n)
    k = _interval_index(n, t)
    frac = t * (1 << n) - k
    return w[k] + frac * (w[k + 1] - w[k])


def gamma_n(path: DyadicPath, n: int, s: float) -> float:
    """Scaled sum of absolute level-n increments bracketing time s."""
    w = level_values(path, n)
    k = _interval_index(n, s)
    return float(2.0 ** (n / 2.0) * np.abs(w[k + 1] - w[k]).sum())


def gaussian_abs_moment(q: float) -> float:
    """E|Z|^q for standard Gaussian Z, valid for q >= 1 (closed Gamma form)."""
    if q < 1:
        raise ValueError("order must be >= 1")
    return 2.0 ** (q / 2.0) * math.gamma((q + 1.0) / 2.0) / math.sqrt(math.pi)


def dump_path_csv(path: DyadicPath, fileobj) -> None:
    """Write the finest-grid samples as CSV with header ``t,w1..wN``."""
    writer = csv.writer(fileobj)
    writer.writerow(["t"] + [f"w{i + 1}" for i in range(path.noise_dim)])
    dt = 2.0 ** (-path.n_max)
    for k, row in enumerate(path.values):
        writer.writerow([repr(k * dt)] + [repr(float(v)) for v in row])
