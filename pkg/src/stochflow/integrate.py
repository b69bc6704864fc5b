"""ODE/SDE integration on dyadic driving paths.

Within each dyadic interval the regularized equation has a smooth autonomous
right-hand side, so a classical fixed-step 4th-order one-step scheme with a
configurable substep count is used; there is no adaptivity.  All solvers run
on batches of shape (paths, points, dim) internally; the single-path API wraps
the batch core.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import wiener
from .fields import VectorFieldSystem, corrected_drift

DEFAULT_OUTPUT_CAP = 10  # trajectory grids never exceed dyadic level 10


@dataclass(frozen=True)
class SolverConfig:
    substeps_per_interval: int = 8
    explosion_threshold: float = 1e8
    output_level: Optional[int] = None  # None: min(n, 10)

    def __post_init__(self):
        if self.substeps_per_interval < 1:
            raise ValueError("substeps_per_interval must be >= 1")
        if self.explosion_threshold <= 0:
            raise ValueError("explosion_threshold must be positive")

    def resolve_output_level(self, n: int) -> int:
        if self.output_level is None:
            return min(n, DEFAULT_OUTPUT_CAP)
        return min(self.output_level, n)


@dataclass(frozen=True)
class Trajectory:
    """A sampled solution path; states are recorded only for t < explosion time."""

    times: np.ndarray
    states: np.ndarray
    exploded: Optional[float] = None

    @property
    def terminal(self) -> np.ndarray:
        return self.states[-1]


@dataclass(frozen=True)
class BatchResult:
    """Batched integration output over shape (paths, points).

    ``explosion_times`` is +inf where no explosion occurred; recorded states
    are NaN from the explosion time onward.
    """

    times: np.ndarray
    explosion_times: np.ndarray
    states: Optional[np.ndarray] = None  # (P, B, T+1, d) in "full" mode
    terminal: Optional[np.ndarray] = None  # (P, B, d)
    sup: Optional[np.ndarray] = None  # (P, B) running max of |z| in "sup" mode


def _drive(system: VectorFieldSystem, z: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Right-hand side A_0(z) + sum_i c_i A_i(z); coeffs has shape (P, N)."""
    out = np.asarray(system.drift(z), dtype=float) + 0.0
    for i, a in enumerate(system.diffusions):
        out += coeffs[:, i, None, None] * a(z)
    return out


def _step_rk4(system, z, coeffs, h):
    k1 = _drive(system, z, coeffs)
    k2 = _drive(system, z + 0.5 * h * k1, coeffs)
    k3 = _drive(system, z + 0.5 * h * k2, coeffs)
    k4 = _drive(system, z + h * k3, coeffs)
    return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _step_trapezoid(system, z, coeffs, h):
    f0 = _drive(system, z, coeffs)
    predictor = z + h * f0
    return z + 0.5 * h * (f0 + _drive(system, predictor, coeffs))


def integrate_slopes(
    system: VectorFieldSystem,
    slopes: np.ndarray,
    x0: np.ndarray,
    level: int,
    cfg: SolverConfig,
    mode: str = "full",
    stepper=_step_rk4,
) -> BatchResult:
    """Integrate the piecewise-constant-slope ODE over a path batch.

    slopes: (P, 2**level, N); x0: (B, d) shared across paths or (P, B, d).
    mode is one of "full", "sup", "terminal".
    """
    slopes = np.asarray(slopes, dtype=float)
    p_count, k_count, _ = slopes.shape
    if k_count != 1 << level:
        raise ValueError("slope count does not match the dyadic level")
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 2:
        x0 = np.broadcast_to(x0, (p_count,) + x0.shape)
    z = np.array(x0, dtype=float, copy=True)
    d = z.shape[-1]
    b_count = z.shape[1]

    h_interval = 2.0 ** (-level)
    substeps = cfg.substeps_per_interval
    h = h_interval / substeps
    out_level = cfg.resolve_output_level(level)
    t_count = 1 << out_level
    stride = k_count // t_count
    times = np.arange(t_count + 1) / t_count

    dead = np.zeros((p_count, b_count), dtype=bool)
    tau = np.full((p_count, b_count), np.inf)
    states = None
    sup = None
    if mode == "full":
        states = np.empty((p_count, b_count, t_count + 1, d))
        states[:, :, 0] = z
    elif mode == "sup":
        sup = np.linalg.norm(z, axis=-1)
    elif mode != "terminal":
        raise ValueError(f"unknown mode {mode!r}")

    with np.errstate(all="ignore"):
        for k in range(k_count):
            coeffs = slopes[:, k]
            for _ in range(substeps):
                z = stepper(system, z, coeffs, h)
            if (k + 1) % stride == 0:
                j = (k + 1) // stride
                radius = np.linalg.norm(z, axis=-1)
                alive_ok = np.isfinite(radius) & (radius <= cfg.explosion_threshold)
                newly_dead = ~dead & ~alive_ok
                if newly_dead.any():
                    tau[newly_dead] = times[j]
                    dead |= newly_dead
                    z[dead] = np.nan
                if mode == "full":
                    states[:, :, j] = z
                elif mode == "sup":
                    keep = ~dead
                    sup = np.where(keep, np.fmax(sup, radius), sup)
    return BatchResult(
        times=times,
        explosion_times=tau,
        states=states,
        terminal=z if mode == "terminal" else (states[:, :, -1] if mode == "full" else None),
        sup=sup,
    )


def integrate_increments_em(
    system: VectorFieldSystem,
    increments: np.ndarray,
    x0: np.ndarray,
    level: int,
    cfg: SolverConfig,
) -> BatchResult:
    """Euler scheme with Ito-corrected drift on the finest increments.

    increments: (P, 2**level, N) Brownian increments over the finest intervals.
    """
    increments = np.asarray(increments, dtype=float)
    p_count, k_count, _ = increments.shape
    if k_count != 1 << level:
        raise ValueError("increment count does not match the dyadic level")
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 2:
        x0 = np.broadcast_to(x0, (p_count,) + x0.shape)
    z = np.array(x0, dtype=float, copy=True)
    d = z.shape[-1]
    b_count = z.shape[1]
    drift_fn = corrected_drift(system)

    h = 2.0 ** (-level)
    out_level = cfg.resolve_output_level(level)
    t_count = 1 << out_level
    stride = k_count // t_count
    times = np.arange(t_count + 1) / t_count

    dead = np.zeros((p_count, b_count), dtype=bool)
    tau = np.full((p_count, b_count), np.inf)
    states = np.empty((p_count, b_count, t_count + 1, d))
    states[:, :, 0] = z

    with np.errstate(all="ignore"):
        for k in range(k_count):
            dw = increments[:, k]
            step = h * drift_fn(z)
            for i, a in enumerate(system.diffusions):
                step += dw[:, i, None, None] * a(z)
            z = z + step
            if (k + 1) % stride == 0:
                j = (k + 1) // stride
                radius = np.linalg.norm(z, axis=-1)
                alive_ok = np.isfinite(radius) & (radius <= cfg.explosion_threshold)
                newly_dead = ~dead & ~alive_ok
                if newly_dead.any():
                    tau[newly_dead] = times[j]
                    dead |= newly_dead
                    z[dead] = np.nan
                states[:, :, j] = z
    return BatchResult(
        times=times, explosion_times=tau, states=states, terminal=states[:, :, -1]
    )


def _as_trajectory(result: BatchResult) -> Trajectory:
    tau = float(result.explosion_times[0, 0])
    states = result.states[0, 0]
    times = result.times
    if np.isinf(tau):
        return Trajectory(times=times, states=states, exploded=None)
    keep = times < tau
    return Trajectory(times=times[keep], states=states[keep], exploded=tau)


def _single_x0(x0, d):
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (d,):
        raise ValueError(f"initial point must have dimension {d}")
    return x0[None, :]


def solve_regularized(
    system: VectorFieldSystem,
    path: wiener.DyadicPath,
    n: int,
    x0,
    cfg: SolverConfig = SolverConfig(),
) -> Trajectory:
    """Solve the level-n regularized ODE driven by the path's interpolant slopes.

    Uses the uncorrected drift: the smooth-path limit targets the Stratonovich
    solution.
    """
    slopes = wiener.interpolant_slopes(path, n)[None]
    result = integrate_slopes(
        system, slopes, _single_x0(x0, system.dim_state)[None], n, cfg, mode="full"
    )
    return _as_trajectory(result)


def solve_reference(
    system: VectorFieldSystem,
    path: wiener.DyadicPath,
    x0,
    cfg: SolverConfig = SolverConfig(),
) -> Trajectory:
    """Finest-level regularized solution: the smooth-approximation limit proxy."""
    return solve_regularized(system, path, path.n_max, x0, cfg)


def solve_heun(
    system: VectorFieldSystem,
    path: wiener.DyadicPath,
    x0,
    cfg: SolverConfig = SolverConfig(),
) -> Trajectory:
    """Stratonovich predictor-corrector on the finest grid (reference cross-check)."""
    slopes = wiener.interpolant_slopes(path, path.n_max)[None]
    one_step = replace(cfg, substeps_per_interval=1)
    result = integrate_slopes(
        system,
        slopes,
        _single_x0(x0, system.dim_state)[None],
        path.n_max,
        one_step,
        mode="full",
        stepper=_step_trapezoid,
    )
    return _as_trajectory(result)


def reference_with_cross_check(
    system: VectorFieldSystem,
    path: wiener.DyadicPath,
    x0,
    cfg: SolverConfig = SolverConfig(),
):
    """Both reference schemes and their maximal disagreement on the output grid.

    The disagreement is diagnostic, not fatal; the first trajectory (smooth
    approximation at the finest level) is the primary reference.
    """
    primary = solve_reference(system, path, x0, cfg)
    check = solve_heun(system, path, x0, cfg)
    k = min(len(primary.times), len(check.times))
    gap = float(
        np.max(np.linalg.norm(primary.states[:k] - check.states[:k], axis=-1))
    ) if k else float("nan")
    return primary, check, gap


def solve_ito_corrected(
    system: VectorFieldSystem,
    path: wiener.DyadicPath,
    x0,
    cfg: SolverConfig = SolverConfig(),
) -> Trajectory:
    """Euler scheme for the Ito form (corrected drift) on the finest increments."""
    increments = np.diff(path.values, axis=0)[None]
    result = integrate_increments_em(
        system, increments, _single_x0(x0, system.dim_state)[None], path.n_max, cfg
    )
    return _as_trajectory(result)


def detect_explosion(traj: Trajectory) -> Optional[float]:
    """First output time at which the threshold was crossed, if any."""
    return traj.exploded


def dump_trajectory_csv(traj: Trajectory, fileobj) -> None:
    """CSV dump with header ``t,x1..xd,exploded``."""
    d = traj.states.shape[-1]
    writer = csv.writer(fileobj)
    writer.writerow(["t"] + [f"x{i + 1}" for i in range(d)] + ["exploded"])
    flag = "" if traj.exploded is None else repr(traj.exploded)
    for t, row in zip(traj.times, traj.states):
        writer.writerow([repr(float(t))] + [repr(float(v)) for v in row] + [flag])
