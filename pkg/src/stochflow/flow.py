"""One-point and two-point motions over spatial grids on shared noise.

Every initial point of a grid is integrated against the SAME driving path, so
coupling comes from the noise, never from scheduling.  Reports are pure
reductions (min/max/count) and merge deterministically.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import integrate, wiener
from .fields import VectorFieldSystem
from .integrate import SolverConfig, Trajectory


@dataclass(frozen=True)
class FlowGrid:
    """Finite set of initial conditions inside the ball of a given radius."""

    initial_points: np.ndarray  # (B, d)
    radius: float
    time_level: int = 10

    def __post_init__(self):
        pts = np.asarray(self.initial_points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("grid needs a nonempty (B, d) point array")
        if np.max(np.linalg.norm(pts, axis=-1)) > self.radius + 1e-12:
            raise ValueError("all grid points must lie inside the ball")
        if len(np.unique(pts, axis=0)) != len(pts):
            raise ValueError("grid points must be distinct")
        object.__setattr__(self, "initial_points", pts)


def uniform_ball_grid(dim: int, radius: float, count: int, seed: int) -> FlowGrid:
    """Deterministic seeded grid of points uniform in the ball."""
    rng = np.random.Generator(np.random.Philox(key=[seed, 0x6E1D]))
    pts = []
    while len(pts) < count:
        cand = rng.uniform(-radius, radius, size=dim)
        if np.linalg.norm(cand) <= radius:
            pts.append(cand)
    return FlowGrid(initial_points=np.array(pts), radius=radius)


@dataclass(frozen=True)
class TwoPointRecord:
    """Coupled distances of two initial points on shared noise."""

    x: np.ndarray
    y: np.ndarray
    times: np.ndarray
    distances: np.ndarray
    exploded: bool

    @property
    def sup_distance(self) -> float:
        return float(np.max(self.distances))


def simulate_flow(
    system: VectorFieldSystem,
    path: wiener.DyadicPath,
    n: int,
    grid: FlowGrid,
    cfg: SolverConfig = SolverConfig(),
) -> dict:
    """Integrate every grid point on the same path; map initial point -> Trajectory."""
    slopes = wiener.interpolant_slopes(path, n)[None]
    result = integrate.integrate_slopes(
        system, slopes, grid.initial_points[None], n, cfg, mode="full"
    )
    out = {}
    for b, x0 in enumerate(grid.initial_points):
        tau = float(result.explosion_times[0, b])
        states = result.states[0, b]
        if np.isinf(tau):
            traj = Trajectory(times=result.times, states=states, exploded=None)
        else:
            keep = result.times < tau
            traj = Trajectory(times=result.times[keep], states=states[keep], exploded=tau)
        out[tuple(x0.tolist())] = traj
    return out


def sup_process(traj: Trajectory) -> np.ndarray:
    """Running maximum of |states| over the trajectory's output grid."""
    return np.maximum.accumulate(np.linalg.norm(traj.states, axis=-1))


def two_point(
    system: VectorFieldSystem,
    path: wiener.DyadicPath,
    n: int,
    x,
    y,
    cfg: SolverConfig = SolverConfig(),
) -> TwoPointRecord:
    """Coupled pair of motions from x and y on shared noise, with sup distance."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    slopes = wiener.interpolant_slopes(path, n)[None]
    result = integrate.integrate_slopes(
        system, slopes, np.stack([x, y])[None], n, cfg, mode="full"
    )
    exploded = bool(np.isfinite(result.explosion_times).any())
    if exploded:
        tau = float(np.min(result.explosion_times))
        keep = result.times < tau
    else:
        keep = slice(None)
    distances = np.linalg.norm(
        result.states[0, 0][keep] - result.states[0, 1][keep], axis=-1
    )
    return TwoPointRecord(
        x=x, y=y, times=result.times[keep], distances=distances, exploded=exploded
    )


def near_pairs(base, ks, direction=None) -> list:
    """Dyadic shrinking pairs (x, x + 2**-k e) along a fixed unit direction."""
    base = np.atleast_1d(np.asarray(base, dtype=float))
    if direction is None:
        direction = np.zeros_like(base)
        direction[0] = 1.0
    else:
        direction = np.atleast_1d(np.asarray(direction, dtype=float))
        direction = direction / np.linalg.norm(direction)
    return [(base, base + 2.0 ** (-k) * direction) for k in ks]


@dataclass(frozen=True)
class HomeomorphismReport:
    """Numerical diagnostics of the flow map being a homeomorphism at one time."""

    time: float
    injectivity_margin: float
    order_preserved: Optional[bool]  # d = 1 only
    holder_alpha: float
    holder_constant: float
    explosion_count: int
    violations: tuple = ()


def homeomorphism_report(
    flow_result: dict, t: float, holder_alpha: float = 0.5
) -> HomeomorphismReport:
    """Injectivity margin, 1-d order preservation, continuity modulus, explosions.

    Violations are reported, never raised; surjectivity is not checkable on a
    finite grid and is excluded.
    """
    initials = []
    finals = []
    explosions = 0
    for x0, traj in flow_result.items():
        if traj.exploded is not None and traj.exploded <= t:
            explosions += 1
            continue
        idx = int(np.argmin(np.abs(traj.times - t)))
        initials.append(np.asarray(x0, dtype=float))
        finals.append(traj.states[idx])
    if len(initials) < 2:
        violations = ["too few surviving points"]
        if explosions:
            violations.insert(0, f"{explosions} explosions by t={t:g}")
        return HomeomorphismReport(
            time=t,
            injectivity_margin=float("nan"),
            order_preserved=None,
            holder_alpha=holder_alpha,
            holder_constant=float("nan"),
            explosion_count=explosions,
            violations=tuple(violations),
        )
    x0s = np.array(initials)
    xts = np.array(finals)
    d = x0s.shape[1]

    diff0 = np.linalg.norm(x0s[:, None] - x0s[None, :], axis=-1)
    difft = np.linalg.norm(xts[:, None] - xts[None, :], axis=-1)
    mask = ~np.eye(len(x0s), dtype=bool)
    margin = float(np.min(difft[mask]))
    with np.errstate(divide="ignore"):
        holder = float(np.max(difft[mask] / diff0[mask] ** holder_alpha))

    order = None
    if d == 1:
        perm0 = np.argsort(x0s[:, 0])
        order = bool(np.all(np.diff(xts[perm0, 0]) > 0.0))

    violations = []
    if explosions:
        violations.append(f"{explosions} explosions by t={t:g}")
    if margin <= 0.0:
        violations.append("injectivity margin not positive")
    if order is False:
        violations.append("order not preserved")
    return HomeomorphismReport(
        time=t,
        injectivity_margin=margin,
        order_preserved=order,
        holder_alpha=holder_alpha,
        holder_constant=holder,
        explosion_count=explosions,
        violations=tuple(violations),
    )


def dump_flow_snapshot_csv(flow_result: dict, t: float, fileobj) -> None:
    """CSV dump ``x1..xd(initial),y1..yd(at t),exploded`` for one requested time."""
    some = next(iter(flow_result))
    d = len(some)
    writer = csv.writer(fileobj)
    writer.writerow(
        [f"x{i + 1}" for i in range(d)] + [f"y{i + 1}" for i in range(d)] + ["exploded"]
    )
    for x0, traj in flow_result.items():
        if traj.exploded is not None and traj.exploded <= t:
            writer.writerow([repr(float(v)) for v in x0] + [""] * d + ["1"])
            continue
        idx = int(np.argmin(np.abs(traj.times - t)))
        row = [repr(float(v)) for v in x0]
        row += [repr(float(v)) for v in traj.states[idx]]
        writer.writerow(row + ["0"])
