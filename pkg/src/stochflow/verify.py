"""Monte Carlo estimators, closed-form bound evaluators and inequality checks.

Estimates carry mergeable sufficient statistics so that sharded runs reduce
deterministically.  Bounds with an unpinned universal constant are labelled
shape checks; absolute pass/fail verdicts apply only to constant-free bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import integrate, wiener
from .fields import VectorFieldSystem
from .integrate import SolverConfig

Z_99 = 2.5758293035489004  # two-sided 99% normal quantile
KURTOSIS_GUARD = 100.0


# ---------------------------------------------------------------------------
# Moment estimation


@dataclass(frozen=True)
class MomentEstimate:
    """p-th moment estimate with mergeable sufficient statistics.

    The statistics are raw power sums of the transformed samples y = x**p,
    so shards merge associatively (counts bit-exact, sums to round-off).
    """

    order: float
    count: int
    s1: float = 0.0
    s2: float = 0.0
    s3: float = 0.0
    s4: float = 0.0
    sample_min: float = math.inf
    sample_max: float = -math.inf
    n_failed: int = 0

    @classmethod
    def from_samples(cls, values, p: float, pre_powered: bool = False) -> "MomentEstimate":
        values = np.asarray(values, dtype=float).ravel()
        finite = np.isfinite(values)
        y = values[finite] if pre_powered else values[finite] ** p
        if y.size == 0:
            return cls(order=p, count=0, n_failed=int((~finite).sum()))
        return cls(
            order=p,
            count=int(y.size),
            s1=float(y.sum()),
            s2=float((y**2).sum()),
            s3=float((y**3).sum()),
            s4=float((y**4).sum()),
            sample_min=float(y.min()),
            sample_max=float(y.max()),
            n_failed=int((~finite).sum()),
        )

    def merge(self, other: "MomentEstimate") -> "MomentEstimate":
        if other.order != self.order:
            raise ValueError("cannot merge estimates of different orders")
        return MomentEstimate(
            order=self.order,
            count=self.count + other.count,
            s1=self.s1 + other.s1,
            s2=self.s2 + other.s2,
            s3=self.s3 + other.s3,
            s4=self.s4 + other.s4,
            sample_min=min(self.sample_min, other.sample_min),
            sample_max=max(self.sample_max, other.sample_max),
            n_failed=self.n_failed + other.n_failed,
        )

    @property
    def estimate(self) -> float:
        return self.s1 / self.count if self.count else math.nan

    @property
    def variance(self) -> float:
        if self.count < 2:
            return math.nan
        return max((self.s2 - self.s1**2 / self.count) / (self.count - 1), 0.0)

    @property
    def half_width(self) -> float:
        """99% confidence half-width from the normal approximation."""
        if self.count < 2:
            return math.inf
        return Z_99 * math.sqrt(self.variance / self.count)

    @property
    def kurtosis(self) -> float:
        if self.count < 4:
            return math.nan
        n = self.count
        mean = self.s1 / n
        m2 = self.s2 / n - mean**2
        m4 = (
            self.s4 / n
            - 4 * mean * self.s3 / n
            + 6 * mean**2 * self.s2 / n
            - 3 * mean**4
        )
        return m4 / m2**2 if m2 > 0 else math.nan

    @property
    def ci_unreliable(self) -> bool:
        k = self.kurtosis
        return bool(np.isfinite(k) and k > KURTOSIS_GUARD)

    def norm_estimate(self) -> float:
        """(E x^p)^(1/p), the p-norm point estimate."""
        return self.estimate ** (1.0 / self.order)

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "count": self.count,
            "estimate": self.estimate,
            "half_width": self.half_width,
            "min": self.sample_min,
            "max": self.sample_max,
            "failed": self.n_failed,
            "ci_unreliable": self.ci_unreliable,
        }


def estimate_moment(
    sampler: Callable[[int, int], float], p: float, count: int, seed: int
) -> MomentEstimate:
    """Estimate E[sampler^p] from `count` path-indexed draws.

    ``sampler(seed, index)`` must be a pure function of its arguments so the
    estimate is independent of scheduling.  Non-finite samples are excluded
    and counted separately.
    """
    if p < 1:
        raise ValueError("moment order must be >= 1")
    if count < 100:
        raise ValueError("need at least 100 samples")
    values = np.array([sampler(seed, i) for i in range(count)], dtype=float)
    return MomentEstimate.from_samples(values, p)


# ---------------------------------------------------------------------------
# Closed-form bound evaluators


@dataclass(frozen=True)
class BoundConstants:
    """Growth/Lipschitz constants entering the theoretical right-hand sides.

    ``C`` is the universal martingale-inequality constant; it is never pinned
    by the theory, so bounds depending on it are shape checks (default 1).
    """

    C1: float = 0.0
    C2: float = 0.0
    C3: float = 0.0
    C4: float = 0.0
    L1: float = 0.0
    L2: float = 0.0
    K1: float = 0.0
    K2: float = 0.0
    delta0: Optional[float] = None
    p: float = 2.0
    n: int = 1
    N: int = 1
    C: float = 1.0

    def __post_init__(self):
        for name in ("C1", "C2", "C3", "C4", "L1", "L2", "K1", "K2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


def _norm(x) -> float:
    return float(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=float))))


def bound_one_point_H1(consts: BoundConstants, p: float, x) -> float:
    """Sup-process p-norm bound under bounded diffusions and linear drift growth."""
    if p <= 1:
        raise ValueError("order must exceed 1")
    return (1.0 + consts.C * consts.C1 * math.sqrt(p)) * math.exp(consts.C2) * (
        1.0 + _norm(x)
    )


def bound_one_point_H2(consts: BoundConstants, p: float, x) -> float:
    """Sup-process p-norm bound under linear-growth diffusions.

    The Gronwall conclusion gives beta1 = sqrt(3) e^{3 C2^2} and
    beta2 = (3/2) C^2 C1^2 as the fitted exponential constants.
    """
    beta1, beta2 = h2_fitted_constants(consts)
    return beta1 * math.exp(beta2 * p) * (1.0 + _norm(x))


def h2_fitted_constants(consts: BoundConstants) -> tuple:
    beta1 = math.sqrt(3.0) * math.exp(3.0 * consts.C2**2)
    beta2 = 1.5 * consts.C**2 * consts.C1**2
    return beta1, beta2


def bound_two_point_fixed_t(consts: BoundConstants, p: float, dist: float) -> float:
    """Constant-free 2p-moment bound for the two-point distance at a fixed time."""
    if p < 2:
        raise ValueError("order must be >= 2")
    return dist ** (2 * p) * math.exp(2 * p**2 * consts.L1**2 + 2 * p * consts.L2)


def bound_two_point_sup(consts: BoundConstants, p: float, dist: float) -> float:
    """Sup-over-time p-moment bound for the two-point distance (C-dependent)."""
    if p <= 1:
        raise ValueError("order must exceed 1")
    return 2.0**p * dist**p * math.exp(
        consts.C * consts.L1**2 * p**2 + consts.L2**2 * p
    )


def bound_two_point_L(consts: BoundConstants, p: float, dist: float, t: float = 1.0) -> dict:
    """Both two-point bound variants; callers select sup vs fixed-t."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("time must lie in [0, 1]")
    return {
        "fixed_t": bound_two_point_fixed_t(consts, p, dist),
        "sup": bound_two_point_sup(consts, p, dist),
    }


def alpha_n(consts: BoundConstants) -> float:
    """Discretization constant of the regularized two-point moment bound.

    Evaluates the explicit two-term formula; nonincreasing in the level and
    vanishing when all Lipschitz constants do.
    """
    p, n, nn, c = consts.p, consts.n, consts.N, consts.C
    if p < 2:
        raise ValueError("order must be >= 2")
    if n < 1:
        raise ValueError("level must be >= 1")
    l1, l2, k1, k2 = consts.L1, consts.L2, consts.K1, consts.K2
    with np.errstate(over="ignore"):
        common = np.exp(8 * p**2 * nn * 2.0 ** (-n) * l1**2) * np.exp(
            2 * p * 2.0 ** (-n) * l2
        )
        term1 = 2 * p * ((2 * p - 1) * l1**2 + k1) * 4 * c**2 * nn**2 * 2**nn * common
        term2 = (
            2.0 ** (-n / 2.0)
            * 2 * p * ((2 * p - 1) * l1 * l2 + k2)
            * 2 * c * nn * 2**nn
            * common
        )
    return float(term1 + term2)


def bound_two_point_regularized(consts: BoundConstants, dist: float) -> float:
    """Two-point 2p-moment bound for the level-n regularized flow."""
    return dist ** (2 * consts.p) * math.exp(2 * consts.p * consts.L2 + alpha_n(consts))


def delta0_fitted(beta: float, radius: float) -> float:
    """Exponential-moment threshold implied by a fitted sub-Gaussian constant."""
    return 1.0 / (2.0 * beta**2 * math.e * (1.0 + radius) ** 2)


def fit_sub_gaussian_beta(p_values, p_norms, x) -> float:
    """Least-squares fit of ||Y||_p against sqrt(p)(1+|x|) through the origin."""
    b = np.sqrt(np.asarray(p_values, dtype=float)) * (1.0 + _norm(x))
    a = np.asarray(p_norms, dtype=float)
    return float(np.dot(a, b) / np.dot(b, b))


# ---------------------------------------------------------------------------
# Batched path samplers


def _shards(count: int, shard_size: int):
    for start in range(0, count, shard_size):
        yield start, min(start + shard_size, count)


def sup_samples(
    system: VectorFieldSystem,
    level: int,
    x0,
    count: int,
    seed: int,
    cfg: SolverConfig = SolverConfig(),
    n_max: Optional[int] = None,
    shard_size: int = 512,
    start_index: int = 0,
) -> np.ndarray:
    """Per-path sup of |z| over the output grid; NaN where the path exploded."""
    n_max = level if n_max is None else n_max
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))[None, :]
    out = np.empty(count)
    for lo, hi in _shards(count, shard_size):
        values = wiener.sample_path_values(
            n_max, system.dim_noise, seed, range(start_index + lo, start_index + hi)
        )
        slopes = wiener.slopes_from_values(values, n_max, level)
        res = integrate.integrate_slopes(system, slopes, x0, level, cfg, mode="sup")
        sup = res.sup[:, 0].copy()
        sup[np.isfinite(res.explosion_times[:, 0])] = np.nan
        out[lo:hi] = sup
    return out


def terminal_samples(
    system: VectorFieldSystem,
    level: int,
    x0s: np.ndarray,
    count: int,
    seed: int,
    cfg: SolverConfig = SolverConfig(),
    n_max: Optional[int] = None,
    shard_size: int = 512,
    start_index: int = 0,
):
    """Terminal states for a batch of initial points on shared per-path noise.

    Returns (terminal (count, B, d), explosion_times (count, B)).
    """
    n_max = level if n_max is None else n_max
    x0s = np.asarray(x0s, dtype=float)
    out = np.empty((count,) + x0s.shape)
    taus = np.empty((count, x0s.shape[0]))
    for lo, hi in _shards(count, shard_size):
        values = wiener.sample_path_values(
            n_max, system.dim_noise, seed, range(start_index + lo, start_index + hi)
        )
        slopes = wiener.slopes_from_values(values, n_max, level)
        res = integrate.integrate_slopes(system, slopes, x0s, level, cfg, mode="terminal")
        out[lo:hi] = res.terminal
        taus[lo:hi] = res.explosion_times
    return out, taus


def states_samples(
    system: VectorFieldSystem,
    level: int,
    x0s: np.ndarray,
    count: int,
    seed: int,
    cfg: SolverConfig = SolverConfig(),
    n_max: Optional[int] = None,
    shard_size: int = 256,
    start_index: int = 0,
):
    """Full recorded states (count, B, T+1, d) plus times and explosion times."""
    n_max = level if n_max is None else n_max
    x0s = np.asarray(x0s, dtype=float)
    chunks = []
    tau_chunks = []
    times = None
    for lo, hi in _shards(count, shard_size):
        values = wiener.sample_path_values(
            n_max, system.dim_noise, seed, range(start_index + lo, start_index + hi)
        )
        slopes = wiener.slopes_from_values(values, n_max, level)
        res = integrate.integrate_slopes(system, slopes, x0s, level, cfg, mode="full")
        chunks.append(res.states)
        tau_chunks.append(res.explosion_times)
        times = res.times
    return np.concatenate(chunks), times, np.concatenate(tau_chunks)


# ---------------------------------------------------------------------------
# Inequality reports


@dataclass(frozen=True)
class InequalityReport:
    """Pairing of an estimated left-hand side with a theoretical right-hand side.

    ``margin`` is the slack of the claimed inequality including the confidence
    half-width; the verdict passes iff the margin is nonnegative.  Bounds
    depending on the unpinned universal constant are flagged as shape checks.
    """

    name: str
    lhs: float
    ci: float
    rhs: float
    margin: float
    verdict: bool
    params: dict = field(default_factory=dict)
    seed: int = 0
    samples: int = 0
    explosions: int = 0
    shape_check: bool = False
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "ci": self.ci,
            "rhs": self.rhs,
            "margin": self.margin,
            "verdict": bool(self.verdict),
            "params": self.params,
            "seed": self.seed,
            "samples": self.samples,
            "explosions": self.explosions,
            "shape_check": self.shape_check,
            "details": self.details,
        }


def _one_point_norm_report(
    name, system, consts, params, seed, bound_fn, cfg
) -> InequalityReport:
    p = float(params.get("p", 2))
    x0 = params.get("x0", np.zeros(system.dim_state))
    level = int(params.get("level", 8))
    count = int(params.get("count", 2000))
    sups = sup_samples(system, level, x0, count, seed, cfg)
    est = MomentEstimate.from_samples(sups[np.isfinite(sups)], p)
    lhs = est.norm_estimate()
    upper = (est.estimate + est.half_width) ** (1.0 / p)
    rhs = bound_fn(consts, p, x0)
    return InequalityReport(
        name=name,
        lhs=lhs,
        ci=upper - lhs,
        rhs=rhs,
        margin=rhs - upper,
        verdict=rhs - upper >= 0,
        params={"p": p, "level": level, "count": count, "x0": np.asarray(x0).tolist()},
        seed=seed,
        samples=est.count,
        explosions=int(np.sum(~np.isfinite(sups))),
        shape_check=True,
        details=est.to_dict(),
    )


def _run_11(system, consts, params, seed, cfg):
    return _one_point_norm_report("(1.1)", system, consts, params, seed, bound_one_point_H1, cfg)


def _run_13(system, consts, params, seed, cfg):
    return _one_point_norm_report("(1.3)", system, consts, params, seed, bound_one_point_H2, cfg)


def _run_12(system, consts, params, seed, cfg):
    """Exponential-moment stability dichotomy for the sup process."""
    x0 = params.get("x0", np.zeros(system.dim_state))
    level = int(params.get("level", 6))
    sizes = [int(s) for s in params.get("sizes", (1000, 10000, 100000))]
    p_fit = [2.0, 4.0, 8.0, 16.0]
    fit_count = int(params.get("fit_count", 2000))
    sups = sup_samples(system, level, x0, fit_count, seed, cfg)
    finite = sups[np.isfinite(sups)]
    norms = [MomentEstimate.from_samples(finite, q).norm_estimate() for q in p_fit]
    beta = fit_sub_gaussian_beta(p_fit, norms, x0)
    radius = float(params.get("radius", _norm(x0)))
    delta_trial = float(params.get("delta", 0.5 * delta0_fitted(beta, radius)))

    all_sups = sup_samples(system, level, x0, max(sizes), seed + 1, cfg)
    finite_all = np.isfinite(all_sups)

    def running(delta):
        return [
            float(np.mean(np.exp(delta * all_sups[:size][finite_all[:size]] ** 2)))
            for size in sizes
        ]

    stable = running(delta_trial)
    divergent = running(10.0 * delta_trial)
    rel_change = abs(stable[-1] - stable[-2]) / stable[-2]
    div_change = abs(divergent[-1] - divergent[-2]) / max(divergent[-2], 1e-300)
    verdict = rel_change < 0.10 and div_change > 0.5
    return InequalityReport(
        name="(1.2)",
        lhs=rel_change,
        ci=0.0,
        rhs=0.10,
        margin=0.10 - rel_change,
        verdict=verdict,
        params={"delta": delta_trial, "sizes": sizes, "level": level, "beta": beta},
        seed=seed,
        samples=max(sizes),
        explosions=int(np.sum(~finite_all)),
        shape_check=False,
        details={
            "running_estimates": stable,
            "running_estimates_10x_delta": divergent,
            "divergence_change": div_change,
            "delta0_fitted": delta0_fitted(beta, radius),
        },
    )


def _time_increment_report(name, system, consts, params, seed, cfg):
    """Log-log slope of time-increment 2p-moments; Hoelder exponent check."""
    p = float(params.get("p", 2))
    x0 = np.atleast_1d(np.asarray(params.get("x0", np.zeros(system.dim_state)), dtype=float))
    level = int(params.get("level", 10))
    count = int(params.get("count", 2000))
    ks = [int(k) for k in params.get("ks", range(2, 8))]
    out_level = cfg.resolve_output_level(level)
    states, times, taus = states_samples(system, level, x0[None, :], count, seed, cfg)
    ok = ~np.isfinite(taus[:, 0])
    base_idx = (1 << out_level) // 4  # s = 0.25
    lags = [(1 << out_level) >> k if k <= out_level else 0 for k in ks]
    moments = []
    gaps = []
    for k, lag in zip(ks, lags):
        if lag < 1:
            continue
        diff = np.linalg.norm(
            states[ok, 0, base_idx + lag] - states[ok, 0, base_idx], axis=-1
        )
        moments.append(float(np.mean(diff ** (2 * p))))
        gaps.append(lag * 2.0 ** (-out_level))
    slope = float(np.polyfit(np.log(gaps), np.log(moments), 1)[0])
    target = p - 0.25
    return InequalityReport(
        name=name,
        lhs=target,
        ci=0.0,
        rhs=slope,
        margin=slope - target,
        verdict=slope >= target,
        params={"p": p, "level": level, "count": count, "ks": ks},
        seed=seed,
        samples=count,
        explosions=int(np.sum(~ok)),
        shape_check=False,
        details={"gaps": gaps, "moments": moments, "slope": slope},
    )


def _run_15(system, consts, params, seed, cfg):
    return _time_increment_report("(1.5)", system, consts, params, seed, cfg)


def _run_218(system, consts, params, seed, cfg):
    return _time_increment_report("(2.18)", system, consts, params, seed, cfg)


def _run_316(system, consts, params, seed, cfg):
    return _time_increment_report("(3.16)", system, consts, params, seed, cfg)


def _pair_points(system, params):
    x = np.atleast_1d(
        np.asarray(params.get("x0", np.zeros(system.dim_state)), dtype=float)
    )
    dist = float(params.get("dist", 1e-3))
    direction = np.zeros_like(x)
    direction[0] = 1.0
    return x, x + dist * direction, dist


def _run_18(system, consts, params, seed, cfg):
    """Constant-free fixed-time two-point moment bound."""
    p = float(params.get("p", 2))
    level = int(params.get("level", 12))
    count = int(params.get("count", 10000))
    x, y, dist = _pair_points(system, params)
    terminal, taus = terminal_samples(system, level, np.stack([x, y]), count, seed, cfg)
    ok = ~np.isfinite(taus).any(axis=1)
    diff = np.linalg.norm(terminal[ok, 0] - terminal[ok, 1], axis=-1)
    est = MomentEstimate.from_samples(diff, 2 * p)
    rhs = bound_two_point_fixed_t(consts, p, dist)
    upper = est.estimate + est.half_width
    return InequalityReport(
        name="(1.8)",
        lhs=est.estimate,
        ci=est.half_width,
        rhs=rhs,
        margin=rhs - upper,
        verdict=rhs - upper >= 0,
        params={"p": p, "level": level, "count": count, "dist": dist},
        seed=seed,
        samples=est.count,
        explosions=int(np.sum(~ok)),
        shape_check=False,
        details=est.to_dict(),
    )


def _run_16(system, consts, params, seed, cfg):
    """Sup-over-time two-point moment bound (shape check: universal constant)."""
    p = float(params.get("p", 2))
    level = int(params.get("level", 10))
    count = int(params.get("count", 2000))
    x, y, dist = _pair_points(system, params)
    states, times, taus = states_samples(system, level, np.stack([x, y]), count, seed, cfg)
    ok = ~np.isfinite(taus).any(axis=1)
    sup_dist = np.max(
        np.linalg.norm(states[ok, 0] - states[ok, 1], axis=-1), axis=-1
    )
    est = MomentEstimate.from_samples(sup_dist, p)
    rhs = bound_two_point_sup(consts, p, dist)
    upper = est.estimate + est.half_width
    return InequalityReport(
        name="(1.6)",
        lhs=est.estimate,
        ci=est.half_width,
        rhs=rhs,
        margin=rhs - upper,
        verdict=rhs - upper >= 0,
        params={"p": p, "level": level, "count": count, "dist": dist},
        seed=seed,
        samples=est.count,
        explosions=int(np.sum(~ok)),
        shape_check=True,
        details=est.to_dict(),
    )


def _near_pair_ratio_report(name, system, consts, params, seed, cfg):
    """Boundedness of E|dx|^p / |x-y|^p over dyadic shrinking pairs."""
    p = float(params.get("p", 2))
    level = int(params.get("level", 10))
    count = int(params.get("count", 2000))
    ks = [int(k) for k in params.get("ks", range(1, 11))]
    tol = float(params.get("ratio_tol", 5.0))
    base = np.atleast_1d(
        np.asarray(params.get("x0", np.zeros(system.dim_state)), dtype=float)
    )
    direction = np.zeros_like(base)
    direction[0] = 1.0
    points = np.concatenate(
        [base[None, :], np.stack([base + 2.0 ** (-k) * direction for k in ks])]
    )
    terminal, taus = terminal_samples(system, level, points, count, seed, cfg)
    ok = ~np.isfinite(taus).any(axis=1)
    ratios = []
    for j, k in enumerate(ks):
        diff = np.linalg.norm(terminal[ok, j + 1] - terminal[ok, 0], axis=-1)
        ratios.append(float(np.mean(diff**p)) / 2.0 ** (-k * p))
    spread = max(ratios) / min(ratios)
    return InequalityReport(
        name=name,
        lhs=spread,
        ci=0.0,
        rhs=tol,
        margin=tol - spread,
        verdict=spread <= tol,
        params={"p": p, "level": level, "count": count, "ks": ks},
        seed=seed,
        samples=int(np.sum(ok)),
        explosions=int(np.sum(~ok)),
        shape_check=False,
        details={"ratios": ratios},
    )


def _run_116(system, consts, params, seed, cfg):
    return _near_pair_ratio_report("(1.16)", system, consts, params, seed, cfg)


def _run_118(system, consts, params, seed, cfg):
    return _near_pair_ratio_report("(1.18)", system, consts, params, seed, cfg)


def _run_315(system, consts, params, seed, cfg):
    return _near_pair_ratio_report("(3.15)", system, consts, params, seed, cfg)


def _uniform_level_report(name, system, consts, params, seed, cfg, use_sup):
    """Uniformity of one-point moments across discretization levels, shared noise."""
    p = float(params.get("p", 4))
    levels = [int(n) for n in params.get("levels", (4, 6, 8, 10))]
    count = int(params.get("count", 1000))
    tol = float(params.get("ratio_tol", 1.5))
    x0 = np.atleast_1d(
        np.asarray(params.get("x0", np.zeros(system.dim_state)), dtype=float)
    )
    n_max = max(levels)
    estimates = {}
    explosions = 0
    for n in levels:
        if use_sup:
            samples = sup_samples(system, n, x0, count, seed, cfg, n_max=n_max)
            finite = samples[np.isfinite(samples)]
            explosions += int(np.sum(~np.isfinite(samples)))
            estimates[n] = float(np.mean(finite**p))
        else:
            states, times, taus = states_samples(system, n, x0[None, :], count, seed, cfg, n_max=n_max)
            ok = ~np.isfinite(taus[:, 0])
            explosions += int(np.sum(~ok))
            norms = np.linalg.norm(states[ok, 0], axis=-1)
            estimates[n] = float(np.max(np.mean(norms**p, axis=0)))
    vals = list(estimates.values())
    spread = max(vals) / min(vals)
    return InequalityReport(
        name=name,
        lhs=spread,
        ci=0.0,
        rhs=tol,
        margin=tol - spread,
        verdict=spread <= tol,
        params={"p": p, "levels": levels, "count": count},
        seed=seed,
        samples=count * len(levels),
        explosions=explosions,
        shape_check=False,
        details={"per_level": {str(k): v for k, v in estimates.items()}},
    )


def _run_219(system, consts, params, seed, cfg):
    return _uniform_level_report("(2.19)", system, consts, params, seed, cfg, use_sup=True)


def _run_216(system, consts, params, seed, cfg):
    return _uniform_level_report("(2.16)", system, consts, params, seed, cfg, use_sup=False)


def _run_26(system, consts, params, seed, cfg):
    """One-point sup moment at a single level against the fitted exponential bound."""
    p = float(params.get("p", 4))
    level = int(params.get("level", 8))
    count = int(params.get("count", 2000))
    alpha1 = float(params.get("alpha1", 2.0))
    alpha2 = float(params.get("alpha2", 1.0))
    x0 = np.atleast_1d(
        np.asarray(params.get("x0", np.zeros(system.dim_state)), dtype=float)
    )
    sups = sup_samples(system, level, x0, count, seed, cfg)
    est = MomentEstimate.from_samples(sups[np.isfinite(sups)], p)
    rhs = (1.0 + _norm(x0)) ** p * alpha1**p * math.exp(alpha2 * p**2)
    upper = est.estimate + est.half_width
    return InequalityReport(
        name="(2.6)",
        lhs=est.estimate,
        ci=est.half_width,
        rhs=rhs,
        margin=rhs - upper,
        verdict=rhs - upper >= 0,
        params={"p": p, "level": level, "count": count, "alpha1": alpha1, "alpha2": alpha2},
        seed=seed,
        samples=est.count,
        explosions=int(np.sum(~np.isfinite(sups))),
        shape_check=True,
        details=est.to_dict(),
    )


def _run_thm26(system, consts, params, seed, cfg):
    """Regularized two-point moment against the explicit discretization bound."""
    p = float(params.get("p", 2))
    level = int(params.get("level", consts.n))
    count = int(params.get("count", 4000))
    hard = bool(params.get("hard", False))
    x, y, dist = _pair_points(system, params)
    terminal, taus = terminal_samples(system, level, np.stack([x, y]), count, seed, cfg)
    ok = ~np.isfinite(taus).any(axis=1)
    diff = np.linalg.norm(terminal[ok, 0] - terminal[ok, 1], axis=-1)
    est = MomentEstimate.from_samples(diff, 2 * p)
    consts_n = replace(consts, p=p, n=level)
    rhs = bound_two_point_regularized(consts_n, dist)
    upper = est.estimate + est.half_width
    return InequalityReport(
        name="Thm2.6",
        lhs=est.estimate,
        ci=est.half_width,
        rhs=rhs,
        margin=rhs - upper,
        verdict=rhs - upper >= 0,
        params={"p": p, "level": level, "count": count, "dist": dist},
        seed=seed,
        samples=est.count,
        explosions=int(np.sum(~ok)),
        shape_check=not hard,
        details={"alpha_n": alpha_n(consts_n), **est.to_dict()},
    )


INEQUALITIES = {
    "(1.1)": _run_11,
    "(1.2)": _run_12,
    "(1.3)": _run_13,
    "(1.5)": _run_15,
    "(1.6)": _run_16,
    "(1.8)": _run_18,
    "(1.16)": _run_116,
    "(1.18)": _run_118,
    "(2.6)": _run_26,
    "(2.16)": _run_216,
    "(2.18)": _run_218,
    "(2.19)": _run_219,
    "(3.15)": _run_315,
    "(3.16)": _run_316,
    "Thm2.6": _run_thm26,
}


def verify_inequality(
    name: str,
    system: VectorFieldSystem,
    consts: BoundConstants,
    params: dict,
    seed: int,
    cfg: SolverConfig = SolverConfig(),
) -> InequalityReport:
    """Run a registered inequality check by name."""
    try:
        runner = INEQUALITIES[name]
    except KeyError:
        raise KeyError(
            f"unregistered inequality {name!r}; known: {sorted(INEQUALITIES)}"
        ) from None
    return runner(system, consts, params, seed, cfg)


# ---------------------------------------------------------------------------
# Convergence measurement


@dataclass(frozen=True)
class ConvergenceResult:
    levels: tuple
    reference_level: int
    per_level: dict  # level -> stats dict
    slope: float
    cross_check_median: float
    discarded_paths: int

    def to_dict(self) -> dict:
        return {
            "levels": list(self.levels),
            "reference_level": self.reference_level,
            "per_level": {str(k): v for k, v in self.per_level.items()},
            "slope": self.slope,
            "cross_check_median": self.cross_check_median,
            "discarded_paths": self.discarded_paths,
        }


def convergence_curve(
    system: VectorFieldSystem,
    grid_points: np.ndarray,
    levels,
    paths: int,
    seed: int,
    cfg: SolverConfig = SolverConfig(),
    n_ref: Optional[int] = None,
    p: float = 2.0,
    shard_size: int = 64,
    start_index: int = 0,
):
    """Sup-over-(time, space) error of each level against the finest reference.

    Also returns the per-path shard data needed for deterministic merging:
    use :func:`convergence_shard` + :func:`merge_convergence_shards` directly
    when fanning out to workers.
    """
    shards = [
        convergence_shard(
            system, grid_points, levels, seed, lo + start_index, hi + start_index,
            cfg, n_ref=n_ref,
        )
        for lo, hi in _shards(paths, shard_size)
    ]
    return merge_convergence_shards(shards, levels, n_ref or (max(levels) + 4), p)


def convergence_shard(
    system: VectorFieldSystem,
    grid_points: np.ndarray,
    levels,
    seed: int,
    lo: int,
    hi: int,
    cfg: SolverConfig = SolverConfig(),
    n_ref: Optional[int] = None,
) -> dict:
    """Per-path sup errors for one contiguous block of path indices."""
    levels = [int(n) for n in levels]
    n_ref = max(levels) + 4 if n_ref is None else n_ref
    if n_ref <= max(levels):
        raise ValueError("reference level must exceed every studied level")
    grid_points = np.asarray(grid_points, dtype=float)
    values = wiener.sample_path_values(n_ref, system.dim_noise, seed, range(lo, hi))

    out_cap = cfg.resolve_output_level(n_ref)
    ref_cfg = SolverConfig(
        substeps_per_interval=cfg.substeps_per_interval,
        explosion_threshold=cfg.explosion_threshold,
        output_level=out_cap,
    )
    ref = integrate.integrate_slopes(
        system,
        wiener.slopes_from_values(values, n_ref, n_ref),
        grid_points,
        n_ref,
        ref_cfg,
        mode="full",
    )
    heun = integrate.integrate_slopes(
        system,
        wiener.slopes_from_values(values, n_ref, n_ref),
        grid_points,
        n_ref,
        SolverConfig(1, cfg.explosion_threshold, out_cap),
        mode="full",
        stepper=integrate._step_trapezoid,
    )
    good = ~(
        np.isfinite(ref.explosion_times).any(axis=1)
        | np.isfinite(heun.explosion_times).any(axis=1)
    )
    cross = np.max(
        np.linalg.norm(ref.states - heun.states, axis=-1), axis=(1, 2)
    )

    errors = {}
    for n in levels:
        out_level = cfg.resolve_output_level(n)
        res = integrate.integrate_slopes(
            system,
            wiener.slopes_from_values(values, n_ref, n),
            grid_points,
            n,
            cfg,
            mode="full",
        )
        good &= ~np.isfinite(res.explosion_times).any(axis=1)
        stride = (1 << out_cap) >> out_level
        ref_sub = ref.states[:, :, ::stride]
        errors[n] = np.max(
            np.linalg.norm(res.states - ref_sub, axis=-1), axis=(1, 2)
        )
    return {
        "good": good,
        "cross": cross,
        "errors": errors,
        "count": hi - lo,
    }


def merge_convergence_shards(shards, levels, n_ref: int, p: float) -> ConvergenceResult:
    levels = [int(n) for n in levels]
    good = np.concatenate([s["good"] for s in shards])
    cross = np.concatenate([s["cross"] for s in shards])[good]
    per_level = {}
    medians = []
    for n in levels:
        err = np.concatenate([s["errors"][n] for s in shards])[good]
        per_level[n] = {
            "mean": float(np.mean(err)),
            "median": float(np.median(err)),
            f"moment_p{p:g}": float(np.mean(err**p)),
            "q25": float(np.percentile(err, 25)),
            "q75": float(np.percentile(err, 75)),
        }
        medians.append(float(np.median(err)))
    # floor protects the fit when a level is exact to round-off
    slope = float(np.polyfit(levels, np.log2(np.maximum(medians, 1e-300)), 1)[0])
    return ConvergenceResult(
        levels=tuple(levels),
        reference_level=n_ref,
        per_level=per_level,
        slope=slope,
        cross_check_median=float(np.median(cross)),
        discarded_paths=int(np.sum(~good)),
    )


# ---------------------------------------------------------------------------
# Hoelder field fitting


def fit_holder_field(snapshots: dict, alpha: float = 0.5) -> dict:
    """Empirical Hoelder constants of flow snapshots, per discretization level.

    ``snapshots`` maps a label (level or "reference") to a tuple
    (initial_points (B, d), times (T+1,), states (P, B, T+1, d)).  The
    constant is the max ratio |dz| / (|dx|^alpha + |dt|^alpha) over spatial
    pairs at common times and over time pairs at common points.
    """
    out = {}
    for label, (x0s, times, states) in snapshots.items():
        x0s = np.asarray(x0s, dtype=float)
        states = np.asarray(states, dtype=float)
        b = x0s.shape[0]
        t = len(times)
        if b * (b - 1) // 2 < 20 or t < 21:
            raise ValueError("need at least 20 near pairs and 20 time pairs")
        best = 0.0
        # spatial pairs at every recorded time
        for i in range(b):
            for j in range(i + 1, b):
                dz = np.linalg.norm(states[:, i] - states[:, j], axis=-1)
                dx = np.linalg.norm(x0s[i] - x0s[j])
                best = max(best, float(np.nanmax(dz)) / dx**alpha)
        # dyadic time lags at every point
        lag = 1
        while lag < t:
            dz = np.linalg.norm(states[:, :, lag:] - states[:, :, :-lag], axis=-1)
            dt = times[lag] - times[0]
            best = max(best, float(np.nanmax(dz)) / dt**alpha)
            lag *= 2
        out[label] = best
    return out


def holder_family_bounded(constants: dict, tol: float = 5.0) -> bool:
    vals = [v for v in constants.values() if np.isfinite(v)]
    return bool(vals) and max(vals) / min(vals) <= tol
