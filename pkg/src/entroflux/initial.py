"""Initial conditions on a 1D grid."""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .rng import SplitMix64

PERTURBATION_MARGIN = 1e-6
IC_KINDS = ("constant", "step", "gaussian_bump", "perturbed_constant", "cosine")


def _vec(params, key, n, default=None):
    v = params.get(key, default)
    if v is None:
        raise ConfigurationError(f"initial condition needs {key!r}")
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.size == 1:
        v = np.full(n, v[0])
    if v.size != n:
        raise ConfigurationError(f"{key!r} needs {n} entries, got {v.size}")
    return v


def build_initial(kind, params, grid, domain, seed=0):
    """Cell values of shape ``(n, M)``.

    ``perturbed_constant`` adds ``amplitude * (2U - 1)`` with ``U`` drawn
    from SplitMix64 (species-major, then cell order) and clamps the result
    into the interior with margin ``1e-6``.
    """
    n, x, L = domain.n, grid.centers, grid.L
    if kind == "constant":
        return np.repeat(_vec(params, "value", n)[:, None], grid.M, axis=1)
    if kind == "step":
        left, right = _vec(params, "left", n), _vec(params, "right", n)
        x0 = float(params.get("x0", 0.5 * L))
        return np.where(x[None, :] < x0, left[:, None], right[:, None])
    if kind == "gaussian_bump":
        base, amp = _vec(params, "base", n), _vec(params, "amplitude", n)
        c = float(params.get("center", 0.5 * L))
        wdt = float(params.get("width", 0.1 * L))
        if not wdt > 0:
            raise ConfigurationError("gaussian_bump width must be positive")
        return base[:, None] + amp[:, None] * np.exp(-((x - c) / wdt) ** 2)[None, :]
    if kind == "cosine":
        base, amp = _vec(params, "base", n), _vec(params, "amplitude", n)
        modes = _vec(params, "mode", n, 1.0)
        return base[:, None] + amp[:, None] * np.cos(modes[:, None] * np.pi * x[None, :] / L)
    if kind == "perturbed_constant":
        base = _vec(params, "value", n)
        amp = float(params.get("amplitude", 0.01))
        rng = SplitMix64(seed)
        noise = rng.uniforms(n * grid.M).reshape(n, grid.M)
        u = base[:, None] + amp * (2.0 * noise - 1.0)
        return domain.clamp_interior(u, PERTURBATION_MARGIN)
    raise ConfigurationError(f"unknown initial condition kind {kind!r}")
