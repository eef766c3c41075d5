"""Catalog of two- and n-species cross-diffusion systems.

Every model is a frozen :class:`CrossDiffusionModel` whose evaluators are
vectorized over trailing axes: ``eval_A(u)`` takes ``u`` of shape
``(n, ...)`` and returns ``(n, n, ...)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy import integrate
from scipy.special import xlogy
from scipy.stats import qmc

from .errors import ConfigurationError


# ---------------------------------------------------------------------------
# Admissible sets


@dataclass(frozen=True)
class StateDomain:
    """Open admissible set of states.

    ``kind`` is one of ``"simplex"`` (``u_i > 0``, ``sum(u) < 1``),
    ``"orthant"`` (``u_i > 0``) or ``"box"`` (``lower < u_i < upper``).
    ``sample_extent`` bounds quasi-random sampling of the unbounded orthant.
    """

    kind: str
    n: int
    margin: float = 0.0
    lower: float = 0.0
    upper: float = 1.0
    sample_extent: float = 5.0

    def __post_init__(self):
        if self.kind not in ("simplex", "orthant", "box"):
            raise ConfigurationError(f"unknown domain kind {self.kind!r}")
        if self.n < 1:
            raise ConfigurationError("domain needs at least one species")
        if self.margin < 0:
            raise ConfigurationError("margin must be nonnegative")
        if self.kind == "box" and not self.lower < self.upper:
            raise ConfigurationError("box needs lower < upper")

    @property
    def bounds(self):
        """Interval ``(a, b)`` with ``D`` contained in ``(a, b)^n``."""
        if self.kind == "simplex":
            return 0.0, 1.0
        if self.kind == "orthant":
            return 0.0, math.inf
        return self.lower, self.upper

    def margin_to_boundary(self, u):
        """Distance-like margin of each state to the boundary.

        For the simplex this is ``min(u_1, ..., u_n, 1 - sum(u))``.
        """
        u = np.asarray(u, dtype=float)
        if self.kind == "simplex":
            rest = 1.0 - u.sum(axis=0)
            return np.minimum(u.min(axis=0), rest)
        if self.kind == "orthant":
            return u.min(axis=0)
        return np.minimum((u - self.lower).min(axis=0), (self.upper - u).min(axis=0))

    def contains(self, u, margin=None):
        """Strict membership test, vectorized over trailing axes."""
        m = self.margin if margin is None else margin
        u = np.asarray(u, dtype=float)
        ok = np.all(np.isfinite(u), axis=0)
        return ok & (self.margin_to_boundary(u) > m)

    def in_closure(self, u, tol=0.0):
        u = np.asarray(u, dtype=float)
        return np.all(np.isfinite(u), axis=0) & (self.margin_to_boundary(u) >= -tol)

    def clamp_interior(self, u, margin):
        """Project states into the interior with the given margin.

        Only used for Newton seeds and random initial data, never for
        accepted solver states.
        """
        u = np.array(u, dtype=float, copy=True)
        if self.kind == "box":
            return np.clip(u, self.lower + margin, self.upper - margin)
        u = np.maximum(u, margin)
        if self.kind == "simplex":
            total = u.sum(axis=0)
            cap = 1.0 - margin
            over = total > cap
            if np.any(over):
                # shrink the excess proportionally above the floor
                excess = (total - cap) / np.maximum(total - self.n * margin, 1e-300)
                u = np.where(over, u - (u - margin) * excess, u)
        return u

    def sample(self, count, margin=1e-4, seed=0):
        """Quasi-random interior points, shape ``(n, count)``."""
        n = self.n
        if self.kind == "simplex":
            # uniform spacings of n sorted coordinates fill the simplex
            x = qmc.Halton(d=n, scramble=True, seed=seed).random(count)
            x = np.sort(x, axis=1)
            v = np.diff(np.concatenate([np.zeros((count, 1)), x], axis=1), axis=1)
            u = margin + (1.0 - (n + 1) * margin) * v
        else:
            x = qmc.Halton(d=n, scramble=True, seed=seed).random(count)
            a, b = self.bounds
            if self.kind == "orthant":
                b = self.sample_extent
            u = a + margin + (b - a - 2 * margin) * x
        return np.ascontiguousarray(u.T)


def simplex(n, margin=0.0):
    return StateDomain("simplex", n, margin)


def orthant(n, margin=0.0):
    return StateDomain("orthant", n, margin)


# ---------------------------------------------------------------------------
# Scalar transition functions q(y)


@dataclass(frozen=True)
class PowerLaw:
    """``q(y) = scale * y**s`` on ``[0, 1]``."""

    s: float
    scale: float = 1.0

    def __call__(self, y):
        return self.scale * np.power(y, self.s)

    def derivative(self, y):
        if self.s == 0:
            return np.zeros_like(np.asarray(y, dtype=float))
        return self.scale * self.s * np.power(y, self.s - 1.0)

    def log_integral(self, c, y):
        """Antiderivative ``int_c^y log q``; ``0 log 0`` is taken as ``0``."""
        y = np.asarray(y, dtype=float)

        def prim(t):
            return t * math.log(self.scale) + self.s * (xlogy(t, t) - t)

        return prim(y) - prim(c)

    @property
    def name(self):
        return f"y^{self.s:g}" if self.scale == 1.0 else f"{self.scale:g}*y^{self.s:g}"


@dataclass(frozen=True)
class ScalarFunction:
    """User-supplied ``q`` with its analytic derivative."""

    fn: Callable
    dfn: Callable
    name: str = "custom"

    def __call__(self, y):
        return self.fn(np.asarray(y, dtype=float))

    def derivative(self, y):
        return self.dfn(np.asarray(y, dtype=float))

    def log_integral(self, c, y):
        y = np.asarray(y, dtype=float)

        def one(b):
            return integrate.quad(lambda t: math.log(float(self.fn(np.float64(t)))), c, b)[0]

        return np.vectorize(one)(y)


def check_derivative(q, points=None, rtol=1e-6):
    """Compare ``q.derivative`` with centered differences; return max relative error."""
    if points is None:
        points = np.linspace(0.05, 0.95, 19)
    step = 1e-6
    fd = (q(points + step) - q(points - step)) / (2 * step)
    exact = q.derivative(points)
    return float(np.max(np.abs(fd - exact) / np.maximum(np.abs(exact), 1.0)))


# ---------------------------------------------------------------------------
# Models


@dataclass(frozen=True)
class H2Meta:
    """Per-species data for the quadratic-form lower bound.

    The bound uses ``alpha_i(u_i) = alpha_star * (u_i - anchor)**(m - 1)``
    (``side="lower"``) or ``alpha_star * (anchor - u_i)**(m - 1)``
    (``side="upper"``). ``anchor`` defaults to the matching domain bound.
    """

    alpha_star: float
    m: float
    side: str = "lower"
    anchor: float | None = None


@dataclass(frozen=True)
class CrossDiffusionModel:
    name: str
    n: int
    params: Mapping[str, object]
    A: Callable
    domain: StateDomain
    f: Callable | None = None
    h2prime_meta: tuple | None = None
    h3_constant: float | None = 0.0
    entropy_known: bool = True
    extras: Mapping[str, object] = field(default_factory=dict)

    def eval_A(self, u):
        u = as_float(u)
        return self.A(u)

    def eval_f(self, u):
        u = as_float(u)
        if self.f is None:
            return np.zeros_like(u)
        return self.f(u)

    @property
    def has_reaction(self):
        return self.f is not None


def _require_positive(**kw):
    bad = [k for k, v in kw.items() if not (np.isfinite(v) and v > 0)]
    if bad:
        raise ConfigurationError(f"parameters must be positive: {', '.join(bad)}")


def as_float(x):
    """Array view that keeps any floating dtype (extended precision included)."""
    x = np.asarray(x)
    return x if x.dtype.kind == "f" else x.astype(float)


def _stack2(a11, a12, a21, a22):
    a11, a12, a21, a22 = np.broadcast_arrays(a11, a12, a21, a22)
    return np.array([[a11, a12], [a21, a22]])


def make_maxwell_stefan(d0, d1, d2):
    """Three-component ideal-gas mixture reduced to two mass fractions."""
    _require_positive(d0=d0, d1=d1, d2=d2)

    def A(u):
        u1, u2 = u[0], u[1]
        delta = d1 * d2 * (1.0 - u1 - u2) + d0 * (d1 * u1 + d2 * u2)
        return _stack2(d2 + (d0 - d2) * u1, (d0 - d1) * u1,
                       (d0 - d2) * u2, d1 + (d0 - d1) * u2) / delta

    # uniform lower bound of the quadratic form on the simplex, see catalog tests
    meta = (H2Meta(0.5, 0.0, "lower", -1.0), H2Meta(0.5, 0.0, "lower", -1.0))
    return CrossDiffusionModel("maxwell_stefan", 2, {"d0": d0, "d1": d1, "d2": d2},
                               A, simplex(2), h2prime_meta=meta)


def make_volume_filling(q, beta):
    """Two species with volume filling, ``q`` evaluated at the free fraction."""
    _require_positive(beta=beta)
    q0 = float(np.asarray(q(np.array(0.0))))
    if q0 != 0.0:
        raise ConfigurationError(f"volume filling requires q(0) = 0, got {q0}")
    err = check_derivative(q)
    if err > 1e-5:
        raise ConfigurationError(f"derivative of q disagrees with finite differences ({err:.2e})")
    grid = np.linspace(0.0, 1.0, 201)
    if np.any(np.diff(q(grid)) < -1e-14):
        warnings.warn("q is not nondecreasing on (0, 1)", stacklevel=2)

    def A(u):
        u1, u2 = u[0], u[1]
        u3 = 1.0 - u1 - u2
        qv, dq = q(u3), q.derivative(u3)
        return _stack2(qv + u1 * dq, u1 * dq, beta * u2 * dq, beta * (qv + u2 * dq))

    return CrossDiffusionModel("volume_filling", 2, {"q": q, "beta": beta}, A, simplex(2),
                               h2prime_meta=(H2Meta(0.1, 1.0), H2Meta(0.1, 1.0)))


def _alpha_table(alpha):
    a = np.asarray(alpha, dtype=float)
    if a.shape != (2, 3):
        raise ConfigurationError("alpha must be a 2x3 table (alpha_i0, alpha_i1, alpha_i2)")
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise ConfigurationError("alpha coefficients must be nonnegative")
    return a


def make_skt(alpha):
    """Population model with transition rates linear in the densities.

    ``alpha[i] = (alpha_i0, alpha_i1, alpha_i2)`` with
    ``p_i = alpha_i0 + alpha_i1 u_1 + alpha_i2 u_2``.
    """
    a = _alpha_table(alpha)
    (a10, a11, a12), (a20, a21, a22) = a

    def A(u):
        u1, u2 = u[0], u[1]
        return _stack2(a10 + 2 * a11 * u1 + a12 * u2, a12 * u1,
                       a21 * u2, a20 + a21 * u1 + 2 * a22 * u2)

    meta = None
    if min(a11, a22, a12, a21) > 0:
        meta = (H2Meta(math.sqrt(2 * a11 / a12), 1.0), H2Meta(math.sqrt(2 * a22 / a21), 1.0))
    return CrossDiffusionModel("skt", 2, {"alpha": a}, A, orthant(2), h2prime_meta=meta,
                               entropy_known=bool(a12 > 0 and a21 > 0))


def make_power_population(alpha, s, eps=0.0):
    """Population model with ``p_i = alpha_i0 + alpha_i1 u_1^s + alpha_i2 u_2^s``.

    With ``eps > 0`` the matrix carries the regularization
    ``eps * diag(u_2, u_1)`` that pairs with the regularized entropy.
    """
    a = _alpha_table(alpha)
    if not 1.0 < s < 4.0:
        raise ConfigurationError(f"power population needs 1 < s < 4, got {s}")
    if eps < 0:
        raise ConfigurationError("eps must be nonnegative")
    (a10, a11, a12), (a20, a21, a22) = a
    if (1.0 - 1.0 / s) * a12 * a21 > a11 * a22:
        warnings.warn("(1 - 1/s) a12 a21 > a11 a22: the positive-definiteness lemma "
                      "does not apply", stacklevel=2)

    def A(u):
        u1, u2 = u[0], u[1]
        p1 = a10 + a11 * u1**s + a12 * u2**s
        p2 = a20 + a21 * u1**s + a22 * u2**s
        d1p1 = s * a11 * u1 ** (s - 1)
        d2p1 = s * a12 * u2 ** (s - 1)
        d1p2 = s * a21 * u1 ** (s - 1)
        d2p2 = s * a22 * u2 ** (s - 1)
        return _stack2(p1 + u1 * d1p1 + eps * u2, u1 * d2p1,
                       u2 * d1p2, p2 + u2 * d2p2 + eps * u1)

    meta = None
    if a11 > 0 and a22 > 0 and a12 > 0 and a21 > 0:
        meta = (H2Meta(math.sqrt(s * a11 * a21), s), H2Meta(math.sqrt(s * a22 * a12), s))
    return CrossDiffusionModel("power_population", 2, {"alpha": a, "s": s, "eps": eps}, A,
                               orthant(2), h2prime_meta=meta,
                               entropy_known=bool(a12 > 0 and a21 > 0))


def make_tumor():
    """Avascular tumor growth: tumor cells, extracellular matrix, water."""

    def A(u):
        u1, u2 = u[0], u[1]
        return _stack2(u1 * (1 - u1) - u1 * u2**2, -u1 * u2 * (1 + u1),
                       -u1 * u2 + u2**2 * (1 - u2), u2 * (1 - u2) * (1 + u1))

    meta = (H2Meta(math.sqrt(0.5), 1.0), H2Meta(math.sqrt(0.5), 1.0))
    return CrossDiffusionModel("tumor", 2, {}, A, simplex(2), h2prime_meta=meta)


def make_electron_hole(mu1=1.0, mu2=1.0):
    """Electron-hole transport with strong carrier scattering."""
    _require_positive(mu1=mu1, mu2=mu2)

    def A(u):
        u1, u2 = u[0], u[1]
        den = 1.0 + mu2 * u1 + mu1 * u2
        return _stack2(mu1 * (1 + mu2 * u1), mu1 * mu2 * u1,
                       mu1 * mu2 * u2, mu2 * (1 + mu1 * u2)) / den

    return CrossDiffusionModel("electron_hole", 2, {"mu1": mu1, "mu2": mu2}, A, orthant(2))


def make_burger_ion(D, n=None):
    """Ion transport through narrow pores, ``n`` species with diffusivities ``D``."""
    D = np.atleast_1d(np.asarray(D, dtype=float))
    if n is None:
        n = D.size
    if D.size == 1:
        D = np.full(n, D[0])
    if n < 2 or D.size != n:
        raise ConfigurationError("burger_ion needs n >= 2 and one diffusivity per species")
    _require_positive(**{f"D{i + 1}": d for i, d in enumerate(D)})

    def A(u):
        rho = u.sum(axis=0)
        d = D.reshape((n, 1) + (1,) * (u.ndim - 1))
        out = d * np.broadcast_to(u[:, None], (n,) + u.shape)
        for i in range(n):
            out[i, i] = D[i] * (1.0 - rho + u[i])
        return out

    distinct = not np.all(D == D[0])
    return CrossDiffusionModel("burger_ion", n, {"D": D}, A, simplex(n),
                               entropy_known=not (distinct and n > 2))


def make_keller_segel_like():
    """Aggregation model with Keller-Segel type cross-diffusion."""

    def A(u):
        u1, u2 = u[0], u[1]
        return _stack2(1 - u1, -u1, -u2, 1 - u2)

    meta = (H2Meta(1.0, 0.5), H2Meta(1.0, 0.5))
    return CrossDiffusionModel("ks_like", 2, {}, A, simplex(2), h2prime_meta=meta)


# ---------------------------------------------------------------------------
# Lattice transition rates


@dataclass(frozen=True)
class TransitionModel:
    """Departure tendencies ``p_i`` and arrival probabilities ``q_i``.

    ``p_i(u) = p_coef[i, 0] + p_coef[i, 1] u_1**p_power + p_coef[i, 2] u_2**p_power``
    and ``q_i(y) = q_scale[i] * y**q_power[i]`` with ``y`` the free fraction.
    """

    p_coef: np.ndarray
    p_power: float = 1.0
    q_scale: tuple = (1.0, 1.0)
    q_power: tuple = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "p_coef", np.asarray(self.p_coef, dtype=float).reshape(2, 3))
        object.__setattr__(self, "q_scale", tuple(float(x) for x in self.q_scale))
        object.__setattr__(self, "q_power", tuple(float(x) for x in self.q_power))

    def p(self, u1, u2):
        c, s = self.p_coef, self.p_power
        return np.array([c[i, 0] + c[i, 1] * np.power(u1, s) + c[i, 2] * np.power(u2, s)
                         for i in range(2)])

    def dp(self, u1, u2):
        """``dp[i, j] = d p_i / d u_j``."""
        c, s = self.p_coef, self.p_power
        g1 = s * np.power(u1, s - 1.0) if s != 1.0 else np.ones_like(np.asarray(u1, float))
        g2 = s * np.power(u2, s - 1.0) if s != 1.0 else np.ones_like(np.asarray(u2, float))
        return np.array([[c[i, 1] * g1, c[i, 2] * g2] for i in range(2)])

    def q(self, y):
        return np.array([PowerLaw(self.q_power[i], self.q_scale[i])(y) for i in range(2)])

    def dq(self, y):
        return np.array([PowerLaw(self.q_power[i], self.q_scale[i]).derivative(y)
                         for i in range(2)])

    @property
    def volume_filling(self):
        return any(p > 0 for p in self.q_power)


def volume_filling_transition(s=1.0, beta=1.0):
    """``p = 1``, ``q_1 = y^s``, ``q_2 = beta y^s``."""
    return TransitionModel(np.array([[1.0, 0, 0], [1.0, 0, 0]]), 1.0, (1.0, beta), (s, s))


def population_transition(alpha, s=1.0):
    """``q = 1`` with linear (``s = 1``) or power departure rates."""
    return TransitionModel(_alpha_table(alpha), s)


# ---------------------------------------------------------------------------
# Registry


MODEL_NAMES = ("maxwell_stefan", "volume_filling", "skt", "power_population",
               "tumor", "electron_hole", "burger_ion", "ks_like")


def build_model(name, params=None):
    """Construct a catalog model from its name and a parameter table."""
    p = dict(params or {})
    if name == "maxwell_stefan":
        return make_maxwell_stefan(p.get("d0", 3.0), p.get("d1", 2.0), p.get("d2", 1.0))
    if name == "volume_filling":
        return make_volume_filling(PowerLaw(p.get("s", 1.0)), p.get("beta", 1.0))
    if name == "skt":
        return make_skt(p.get("alpha", [[1.0, 1.0, 1.0], [1.0, 1.0, 1.0]]))
    if name == "power_population":
        return make_power_population(p.get("alpha", [[1.0, 1.0, 1.0], [1.0, 1.0, 1.0]]),
                                     p.get("s", 2.0), p.get("eps", 0.0))
    if name == "tumor":
        return make_tumor()
    if name == "electron_hole":
        return make_electron_hole(p.get("mu1", 1.0), p.get("mu2", 1.0))
    if name == "burger_ion":
        return make_burger_ion(p.get("D", [1.0, 1.0]), p.get("n"))
    if name == "ks_like":
        return make_keller_segel_like()
    raise ConfigurationError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}")


MODEL_PARAMS = {
    "maxwell_stefan": {"d0", "d1", "d2"},
    "volume_filling": {"s", "beta"},
    "skt": {"alpha"},
    "power_population": {"alpha", "s", "eps"},
    "tumor": set(),
    "electron_hole": {"mu1", "mu2"},
    "burger_ion": {"D", "n"},
    "ks_like": set(),
}
