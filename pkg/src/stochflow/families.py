"""Built-in coefficient families, selectable by name + parameter map.

Each builder returns an immutable :class:`VectorFieldSystem` with analytic
Jacobians.  The log-growth family satisfies the growth hypothesis that makes
the flow global; the explosive family deliberately violates it.
"""

from __future__ import annotations

import math

import numpy as np

from .fields import VectorFieldSystem


class UnknownFamilyError(ValueError):
    pass


def _const_field(vec):
    vec = np.asarray(vec, dtype=float)

    def f(x):
        return np.broadcast_to(vec, np.asarray(x).shape).copy()

    return f


def _zero_jacobian(d):
    def j(x):
        shape = np.asarray(x).shape[:-1] + (d, d)
        return np.zeros(shape)

    return j


def _const_jacobian(mat):
    mat = np.asarray(mat, dtype=float)

    def j(x):
        shape = np.asarray(x).shape[:-1] + mat.shape
        return np.broadcast_to(mat, shape).copy()

    return j


def make_constant(drift, diffusions) -> VectorFieldSystem:
    """All fields constant vectors; brackets vanish identically."""
    drift = np.asarray(drift, dtype=float)
    d = drift.shape[0]
    diffs = [np.asarray(a, dtype=float) for a in diffusions]
    return VectorFieldSystem(
        dim_state=d,
        dim_noise=len(diffs),
        drift=_const_field(drift),
        diffusions=tuple(_const_field(a) for a in diffs),
        drift_jacobian=_zero_jacobian(d),
        diffusion_jacobians=tuple(_zero_jacobian(d) for _ in diffs),
        name="constant",
    )


def make_linear(drift_matrix, diffusion_matrices) -> VectorFieldSystem:
    """Fields x -> M x; the flow map is linear in the initial point."""
    a0 = np.asarray(drift_matrix, dtype=float)
    mats = [np.asarray(m, dtype=float) for m in diffusion_matrices]
    d = a0.shape[0]

    def lin(mat):
        def f(x):
            return np.einsum("ab,...b->...a", mat, np.asarray(x, dtype=float))

        return f

    return VectorFieldSystem(
        dim_state=d,
        dim_noise=len(mats),
        drift=lin(a0),
        diffusions=tuple(lin(m) for m in mats),
        drift_jacobian=_const_jacobian(a0),
        diffusion_jacobians=tuple(_const_jacobian(m) for m in mats),
        name="linear",
    )


def make_geometric(sigma: float = 1.0, mu: float = 0.0) -> VectorFieldSystem:
    """Scalar system with diffusion sigma*x and drift mu*x (closed-form flow)."""
    sys = make_linear([[mu]], [[[sigma]]])
    return VectorFieldSystem(
        dim_state=1,
        dim_noise=1,
        drift=sys.drift,
        diffusions=sys.diffusions,
        drift_jacobian=sys.drift_jacobian,
        diffusion_jacobians=sys.diffusion_jacobians,
        name="geometric",
        metadata={"sigma": sigma, "mu": mu},
    )


def make_trig(a: float = 1.0, b: float = 1.0) -> VectorFieldSystem:
    """Scalar bounded trigonometric fields: diffusion a*sin x, drift b*cos x."""

    def diffusion(x):
        return a * np.sin(x)

    def drift(x):
        return b * np.cos(x)

    def diffusion_jac(x):
        return (a * np.cos(x))[..., None]

    def drift_jac(x):
        return (-b * np.sin(x))[..., None]

    return VectorFieldSystem(
        dim_state=1,
        dim_noise=1,
        drift=drift,
        diffusions=(diffusion,),
        drift_jacobian=drift_jac,
        diffusion_jacobians=(diffusion_jac,),
        name="trig",
    )


def make_rotation(drift_scale: float = 0.0) -> VectorFieldSystem:
    """Planar rotation diffusion (-x2, x1) with optional linear drift."""
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    return VectorFieldSystem(
        dim_state=2,
        dim_noise=1,
        drift=make_linear(drift_scale * np.eye(2), [rot]).drift,
        diffusions=(make_linear(np.zeros((2, 2)), [rot]).diffusions[0],),
        drift_jacobian=_const_jacobian(drift_scale * np.eye(2)),
        diffusion_jacobians=(_const_jacobian(rot),),
        name="rotation",
    )


def _log_envelope(x):
    """log(e + |x|^2) and its gradient factor 2/(e + |x|^2)."""
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x**2, axis=-1)
    base = math.e + r2
    return np.log(base), 2.0 / base


def make_log_growth(sigma=(0.5, 0.5), kappa: float = 0.3, dim: int = 2) -> VectorFieldSystem:
    """Diffusions sigma_i * sqrt(log(e + |x|^2)) * u_i(x) with bounded smooth u_i,
    drift kappa * log(e + |x|^2) * v(x): the log-growth showcase family.

    Supports dim 1 and 2.  Closed-form radial suprema of the field magnitudes
    are attached as profile overrides.
    """
    sigma = tuple(float(s) for s in np.atleast_1d(sigma))
    n_noise = len(sigma)
    if dim == 1:

        def unit(i):
            phase = 0.7 * i

            def u(x):
                return np.cos(x + phase)

            def du(x):
                return (-np.sin(x + phase))[..., None]

            return u, du

        def v(x):
            return np.sin(x)

        def dv(x):
            return np.cos(x)[..., None]

    elif dim == 2:
        inv_sqrt2 = 1.0 / math.sqrt(2.0)  # keeps |u|, |v| <= 1

        def unit(i):
            phase = 0.6 * i

            def u(x):
                return inv_sqrt2 * np.stack(
                    [np.cos(x[..., 1] + phase), np.sin(x[..., 0] - phase)], axis=-1
                )

            def du(x):
                z = np.zeros(x.shape[:-1])
                row0 = np.stack([z, -np.sin(x[..., 1] + phase)], axis=-1)
                row1 = np.stack([np.cos(x[..., 0] - phase), z], axis=-1)
                return inv_sqrt2 * np.stack([row0, row1], axis=-2)

            return u, du

        def v(x):
            return inv_sqrt2 * np.stack([np.sin(x[..., 1]), np.cos(x[..., 0])], axis=-1)

        def dv(x):
            z = np.zeros(x.shape[:-1])
            row0 = np.stack([z, np.cos(x[..., 1])], axis=-1)
            row1 = np.stack([-np.sin(x[..., 0]), z], axis=-1)
            return inv_sqrt2 * np.stack([row0, row1], axis=-2)

    else:
        raise ValueError("log-growth family supports dim 1 or 2")

    units = [unit(i) for i in range(n_noise)]

    def diffusion(i):
        u, _ = units[i]
        s = sigma[i]

        def f(x):
            x = np.asarray(x, dtype=float)
            logv, _ = _log_envelope(x)
            return s * np.sqrt(logv)[..., None] * np.atleast_1d(u(x)).reshape(x.shape)

        return f

    def diffusion_jac(i):
        u, du = units[i]
        s = sigma[i]

        def j(x):
            x = np.asarray(x, dtype=float)
            logv, grad_fac = _log_envelope(x)
            g = np.sqrt(logv)
            # grad of sqrt(log(e+|x|^2)) = x * grad_fac / (2 g)
            grad_g = (grad_fac / (2.0 * g))[..., None] * x
            uval = np.atleast_1d(u(x)).reshape(x.shape)
            return s * (
                np.einsum("...a,...b->...ab", uval, grad_g)
                + g[..., None, None] * du(x)
            )

        return j

    def drift(x):
        x = np.asarray(x, dtype=float)
        logv, _ = _log_envelope(x)
        return kappa * logv[..., None] * np.atleast_1d(v(x)).reshape(x.shape)

    def drift_jac(x):
        x = np.asarray(x, dtype=float)
        logv, grad_fac = _log_envelope(x)
        grad_log = grad_fac[..., None] * x
        vval = np.atleast_1d(v(x)).reshape(x.shape)
        return kappa * (
            np.einsum("...a,...b->...ab", vval, grad_log)
            + logv[..., None, None] * dv(x)
        )

    sig_sq = sum(s**2 for s in sigma)
    overrides = {
        "sup_diffusion_sq": lambda m: sig_sq * math.log(math.e + m**2),
        "sup_drift": lambda m: abs(kappa) * math.log(math.e + m**2),
    }
    return VectorFieldSystem(
        dim_state=dim,
        dim_noise=n_noise,
        drift=drift,
        diffusions=tuple(diffusion(i) for i in range(n_noise)),
        drift_jacobian=drift_jac,
        diffusion_jacobians=tuple(diffusion_jac(i) for i in range(n_noise)),
        name="log_growth",
        metadata={"sigma": sigma, "kappa": kappa, "profile_overrides": overrides},
    )


def make_explosive(noise_scale: float = 0.0) -> VectorFieldSystem:
    """Scalar drift x^2: deterministic blow-up at 1/x0, violates the growth hypothesis."""

    def drift(x):
        return np.asarray(x, dtype=float) ** 2

    def drift_jac(x):
        return (2.0 * np.asarray(x, dtype=float))[..., None]

    def diffusion(x):
        return noise_scale * np.asarray(x, dtype=float)

    def diffusion_jac(x):
        shape = np.asarray(x).shape[:-1] + (1, 1)
        return np.full(shape, noise_scale)

    return VectorFieldSystem(
        dim_state=1,
        dim_noise=1,
        drift=drift,
        diffusions=(diffusion,),
        drift_jacobian=drift_jac,
        diffusion_jacobians=(diffusion_jac,),
        name="explosive",
    )


_BUILDERS = {
    "constant": make_constant,
    "linear": make_linear,
    "geometric": make_geometric,
    "trig": make_trig,
    "rotation": make_rotation,
    "log_growth": make_log_growth,
    "explosive": make_explosive,
}


def family_names():
    return sorted(_BUILDERS)


def build_family(name: str, params: dict | None = None) -> VectorFieldSystem:
    """Construct a built-in family by name with keyword parameters."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise UnknownFamilyError(
            f"unknown family {name!r}; available: {', '.join(family_names())}"
        ) from None
    return builder(**(params or {}))
