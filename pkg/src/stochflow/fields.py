"""Coefficient vector fields: brackets, drift correction, truncation, profiling.

All field callables are vectorized: they map arrays of shape (..., d) to
(..., d), and Jacobians map (..., d) to (..., d, d) with J[..., a, b] being
the derivative of component a with respect to coordinate b.  Systems are
immutable and evaluation is pure, so they may be shared across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np


class FieldDomainError(ValueError):
    """A field evaluation produced a non-finite value."""

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point


FD_STEP_BASE = 1e-5  # relative step for central-difference Jacobians


@dataclass(frozen=True)
class VectorFieldSystem:
    """Drift and diffusion fields of a Stratonovich system.

    ``drift`` is the uncorrected Stratonovich drift; ``diffusions`` holds the
    noise fields.  Analytic Jacobians are optional; central finite differences
    with a relative step are the fallback.
    """

    dim_state: int
    dim_noise: int
    drift: Callable[[np.ndarray], np.ndarray]
    diffusions: tuple
    drift_jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    diffusion_jacobians: Optional[tuple] = None
    name: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dim_state < 1 or self.dim_noise < 1:
            raise ValueError("dimensions must be positive")
        if len(self.diffusions) != self.dim_noise:
            raise ValueError("need one diffusion field per noise component")
        if self.diffusion_jacobians is not None and len(self.diffusion_jacobians) != self.dim_noise:
            raise ValueError("need one Jacobian per diffusion field")

    def field_fn(self, i: int) -> Callable[[np.ndarray], np.ndarray]:
        """Field by index: 0 is the drift, 1..N the diffusions."""
        return self.drift if i == 0 else self.diffusions[i - 1]

    def jacobian(self, i: int, x: np.ndarray) -> np.ndarray:
        """Jacobian of field i at x, analytic if available else finite-difference."""
        if i == 0 and self.drift_jacobian is not None:
            return self.drift_jacobian(x)
        if i > 0 and self.diffusion_jacobians is not None:
            return self.diffusion_jacobians[i - 1](x)
        return finite_difference_jacobian(self.field_fn(i), x)


def finite_difference_jacobian(fn, x: np.ndarray) -> np.ndarray:
    """Central differences with step ``1e-5 * (1 + |x|)`` per probe point."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    h = FD_STEP_BASE * (1.0 + np.linalg.norm(x, axis=-1))
    cols = []
    for b in range(d):
        e = np.zeros(d)
        e[b] = 1.0
        step = h[..., None] * e
        cols.append((fn(x + step) - fn(x - step)) / (2.0 * h[..., None]))
    return np.stack(cols, axis=-1)


def _check_finite(value: np.ndarray, x: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(value)):
        bad = np.argwhere(~np.isfinite(value).all(axis=-1))
        point = np.asarray(x)[tuple(bad[0])] if bad.size else None
        raise FieldDomainError(f"non-finite {what} evaluation", point=point)
    return value


def evaluate_bracket(sys: VectorFieldSystem, i: int, k: int, x: np.ndarray) -> np.ndarray:
    """Jacobian of diffusion i applied to field k: the interaction field B_{i,k}."""
    if not 1 <= i <= sys.dim_noise:
        raise ValueError("first index must point at a diffusion field")
    if not 0 <= k <= sys.dim_noise:
        raise ValueError("second index out of range")
    x = np.asarray(x, dtype=float)
    jac = sys.jacobian(i, x)
    val = np.einsum("...ab,...b->...a", jac, sys.field_fn(k)(x))
    return _check_finite(val, x, f"bracket({i},{k})")


def stratonovich_correction(sys: VectorFieldSystem, x: np.ndarray) -> np.ndarray:
    """Ito drift of the system: drift plus half the sum of self-brackets."""
    x = np.asarray(x, dtype=float)
    out = np.array(sys.drift(x), dtype=float, copy=True)
    for i in range(1, sys.dim_noise + 1):
        out += 0.5 * evaluate_bracket(sys, i, i, x)
    return _check_finite(out, x, "corrected drift")


def corrected_drift(sys: VectorFieldSystem) -> Callable[[np.ndarray], np.ndarray]:
    """The Ito-corrected drift as a standalone vectorized callable."""

    def fn(x):
        return stratonovich_correction(sys, x)

    return fn


@dataclass(frozen=True)
class CutoffFunction:
    """Radial quintic smoothstep: 1 inside |x| <= m, 0 outside |x| >= m + 2.

    With s = (r - m)/2 clamped to [0, 1] the profile is 1 - (10 s^3 - 15 s^4
    + 6 s^5); its radial derivative is bounded by 15/16 and its second
    derivative by 2.
    """

    inner_radius: float

    def __post_init__(self):
        if self.inner_radius < 1.0:
            raise ValueError("cutoff radius must be >= 1")

    @property
    def outer_radius(self) -> float:
        return self.inner_radius + 2.0

    def profile(self, r):
        s = np.clip((np.asarray(r, dtype=float) - self.inner_radius) / 2.0, 0.0, 1.0)
        return 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s**2)

    def profile_derivative(self, r):
        s = np.clip((np.asarray(r, dtype=float) - self.inner_radius) / 2.0, 0.0, 1.0)
        return -15.0 * s**2 * (1.0 - s) ** 2

    def profile_second_derivative(self, r):
        s = np.clip((np.asarray(r, dtype=float) - self.inner_radius) / 2.0, 0.0, 1.0)
        return -15.0 * s * (1.0 - s) * (1.0 - 2.0 * s)

    def value(self, x) -> np.ndarray:
        return self.profile(np.linalg.norm(np.asarray(x, dtype=float), axis=-1))

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(r[..., None] > 0.0, x / np.maximum(r, 1e-300)[..., None], 0.0)
        return self.profile_derivative(r)[..., None] * unit


def truncate_system(sys: VectorFieldSystem, m: float) -> VectorFieldSystem:
    """Multiply every field by the radial cutoff at radius m (product-rule Jacobians)."""
    if m < 1.0:
        raise ValueError("truncation radius must be >= 1")
    phi = CutoffFunction(float(m))

    def wrap(f):
        def g(x):
            return phi.value(x)[..., None] * f(x)

        return g

    def wrap_jac(f, jac_fn):
        def g(x):
            x = np.asarray(x, dtype=float)
            jac = jac_fn(x) if jac_fn is not None else finite_difference_jacobian(f, x)
            return phi.value(x)[..., None, None] * jac + np.einsum(
                "...a,...b->...ab", f(x), phi.gradient(x)
            )

        return g

    diff_jacs = sys.diffusion_jacobians or (None,) * sys.dim_noise
    return VectorFieldSystem(
        dim_state=sys.dim_state,
        dim_noise=sys.dim_noise,
        drift=wrap(sys.drift),
        diffusions=tuple(wrap(a) for a in sys.diffusions),
        drift_jacobian=wrap_jac(sys.drift, sys.drift_jacobian),
        diffusion_jacobians=tuple(
            wrap_jac(a, j) for a, j in zip(sys.diffusions, diff_jacs)
        ),
        name=f"{sys.name}|cutoff(m={m:g})" if sys.name else f"cutoff(m={m:g})",
        metadata=dict(sys.metadata, cutoff_radius=float(m)),
    )


@dataclass(frozen=True)
class LipschitzProfile:
    """Suprema of field magnitudes and derivative norms over the ball of a radius.

    ``bracket_lip_offdiag`` is the squared derivative-norm supremum of the
    diffusion-diffusion interaction fields; ``bracket_lip_offdiag_unsquared``
    is its square root, which is what the log-growth hypothesis check uses.
    """

    radius: float
    sup_diffusion_sq: float
    sup_drift: float
    lip_diffusion_sq: float
    lip_drift: float
    bracket_lip_offdiag: float
    bracket_lip_drift: float

    @property
    def bracket_lip_offdiag_unsquared(self) -> float:
        return math.sqrt(self.bracket_lip_offdiag)

    def entries(self) -> dict:
        return {
            "sup_diffusion_sq": self.sup_diffusion_sq,
            "sup_drift": self.sup_drift,
            "lip_diffusion_sq": self.lip_diffusion_sq,
            "lip_drift": self.lip_drift,
            "bracket_lip_offdiag": self.bracket_lip_offdiag,
            "bracket_lip_drift": self.bracket_lip_drift,
        }


def ball_probe_points(dim: int, radius: float, grid_density: int, seed: int = 0) -> np.ndarray:
    """Radial-shell sampling of the closed ball, boundary shell included."""
    if grid_density < 8:
        raise ValueError("grid_density must be >= 8")
    radii = np.linspace(0.0, radius, grid_density + 1)[1:]
    if dim == 1:
        dirs = np.array([[1.0], [-1.0]])
    elif dim == 2:
        ang = np.linspace(0.0, 2.0 * np.pi, 4 * grid_density, endpoint=False)
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    else:
        rng = np.random.Generator(np.random.Philox(key=[seed, 0x5EED]))
        raw = rng.standard_normal((grid_density ** (dim - 1), dim))
        dirs = raw / np.linalg.norm(raw, axis=-1, keepdims=True)
    pts = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, dim)
    return np.concatenate([np.zeros((1, dim)), pts], axis=0)


def _matrix_norms(jacs: np.ndarray) -> np.ndarray:
    return np.linalg.norm(jacs, ord=2, axis=(-2, -1))


def profile_lipschitz(
    sys: VectorFieldSystem,
    m: float,
    grid_density: int = 8,
    use_overrides: bool = True,
) -> LipschitzProfile:
    """Sampled suprema of field magnitudes and derivative norms over the m-ball.

    Sampling only lower-bounds the true suprema; built-in families may carry
    closed-form radial suprema in ``metadata['profile_overrides']`` which take
    precedence when ``use_overrides`` is set.
    """
    pts = ball_probe_points(sys.dim_state, m, grid_density)
    try:
        sup_diff_sq = 0.0
        lip_diff_sq = 0.0
        for i in range(1, sys.dim_noise + 1):
            vals = _check_finite(sys.field_fn(i)(pts), pts, f"field {i}")
            sup_diff_sq += float(np.max(np.sum(vals**2, axis=-1)))
            lip_diff_sq += float(np.max(_matrix_norms(sys.jacobian(i, pts)) ** 2))
        drift_vals = _check_finite(sys.drift(pts), pts, "drift")
        sup_drift = float(np.max(np.linalg.norm(drift_vals, axis=-1)))
        corrected = corrected_drift(sys)
        lip_drift = float(np.max(_matrix_norms(finite_difference_jacobian(corrected, pts))))
        j_offdiag = 0.0
        j_drift = 0.0
        for i in range(1, sys.dim_noise + 1):
            for k in range(0, sys.dim_noise + 1):
                bracket = lambda x, _i=i, _k=k: evaluate_bracket(sys, _i, _k, x)
                norms = _matrix_norms(finite_difference_jacobian(bracket, pts))
                if k == 0:
                    j_drift = max(j_drift, float(np.max(norms)))
                else:
                    j_offdiag = max(j_offdiag, float(np.max(norms)) ** 2)
    except FieldDomainError as err:
        raise FieldDomainError(
            f"field explosion inside ball of radius {m:g}: {err}", point=err.point
        ) from err

    values = {
        "sup_diffusion_sq": sup_diff_sq,
        "sup_drift": sup_drift,
        "lip_diffusion_sq": lip_diff_sq,
        "lip_drift": lip_drift,
        "bracket_lip_offdiag": j_offdiag,
        "bracket_lip_drift": j_drift,
    }
    if use_overrides:
        for key, fn in sys.metadata.get("profile_overrides", {}).items():
            values[key] = float(fn(m))
    return LipschitzProfile(radius=float(m), **values)


@dataclass(frozen=True)
class HypothesisConstants:
    """Fitted log-growth constants and per-line verdicts of the growth hypothesis."""

    gamma1: float
    gamma2: float
    beta1: float
    beta2: float
    delta1: float
    delta2: float
    verdicts: dict
    diagnostics: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())


# (line label, profile accessor, exponent of log m in the admissible growth)
_H_LINES = (
    ("gamma1", lambda p: p.sup_diffusion_sq, 1.0),
    ("gamma2", lambda p: p.sup_drift, 1.0),
    ("beta1", lambda p: p.lip_diffusion_sq, 1.0),
    ("beta2", lambda p: p.lip_drift, 1.0),
    ("delta1", lambda p: p.bracket_lip_offdiag_unsquared, 1.0),
    ("delta2", lambda p: p.bracket_lip_drift, 1.5),
)


def check_hypothesis_H(
    sys: VectorFieldSystem,
    radii: Sequence[float],
    grid_density: int = 8,
    slack: float = 1.5,
) -> HypothesisConstants:
    """Fit each profile entry against powers of log m and test ratio boundedness.

    A line passes when its ratio sequence entry / (log m)^k is finite and the
    last-to-first ratio growth stays below ``slack``.  The interaction-field
    line uses the unsquared derivative-norm supremum, matching what the
    truncated-system constants require.
    """
    radii = sorted(float(m) for m in radii)
    if len(radii) < 4:
        raise ValueError("need at least 4 radii")
    if radii[0] < 2.0:
        raise ValueError("radii must be >= 2 so that log m > 0")

    profiles = [profile_lipschitz(sys, m, grid_density=grid_density) for m in radii]
    constants = {}
    verdicts = {}
    diagnostics = {"radii": radii, "ratios": {}}
    for name, accessor, power in _H_LINES:
        ratios = np.array(
            [accessor(p) / math.log(m) ** power for p, m in zip(profiles, radii)]
        )
        diagnostics["ratios"][name] = ratios.tolist()
        constants[name] = float(np.max(ratios))
        if not np.all(np.isfinite(ratios)):
            verdicts[name] = False
        elif ratios[0] <= 1e-12:
            verdicts[name] = bool(ratios[-1] <= 1e-9)
        else:
            verdicts[name] = bool(ratios[-1] / ratios[0] <= slack)
    return HypothesisConstants(verdicts=verdicts, diagnostics=diagnostics, **constants)
