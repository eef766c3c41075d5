"""Entropy densities, entropy variables and sampling-based certification.

All evaluators take states of shape ``(n, ...)``. ``grad`` maps a state to
its entropy variable ``w``, ``invert`` maps ``w`` back into the interior of
the admissible set, and ``inv_hess`` is the Jacobian ``du/dw``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import xlogy

from . import kernels
from .errors import ConfigurationError, DomainError, NumericalError, PreconditionError
from .models import PowerLaw, StateDomain, as_float, orthant, simplex

EIG_TOL = 1e-10
SAMPLE_MARGIN = 1e-4


class EntropyModel:
    """Base class; subclasses implement one entropy family."""

    family = "abstract"
    n = 0
    domain: StateDomain

    def density(self, u):
        raise NotImplementedError

    def grad(self, u):
        raise NotImplementedError

    def hess(self, u):
        raise NotImplementedError

    def inv_hess(self, u):
        """``(D^2 h)^{-1}`` at ``u``, shape ``(n, n, ...)``."""
        h = np.moveaxis(self.hess(u), (0, 1), (-2, -1))
        return np.moveaxis(np.linalg.inv(h), (-2, -1), (0, 1))

    def invert(self, w):
        raise NotImplementedError

    def describe(self):
        return {"family": self.family}


def _as_state(u, n):
    u = as_float(u)
    if u.shape[0] != n:
        raise ValueError(f"expected {n} species along axis 0, got shape {u.shape}")
    return u


def _free(u):
    return 1.0 - u.sum(axis=0)


class LogarithmicEntropy(EntropyModel):
    """``sum_i u_i(log u_i - 1) + u_0(log u_0 - 1)`` with ``u_0 = 1 - sum u_i``."""

    family = "logarithmic"

    def __init__(self, n=2):
        if n < 1:
            raise ConfigurationError("n must be positive")
        self.n = n
        self.domain = simplex(n)

    def density(self, u):
        u = _as_state(u, self.n)
        u0 = _free(u)
        return (xlogy(u, u) - u).sum(axis=0) + xlogy(u0, u0) - u0

    def grad(self, u):
        u = _as_state(u, self.n)
        return np.log(u) - np.log(_free(u))

    def hess(self, u):
        u = _as_state(u, self.n)
        inv0 = 1.0 / _free(u)
        eye = np.eye(self.n).reshape((self.n, self.n) + (1,) * (u.ndim - 1))
        return eye / u[None] + inv0

    def inv_hess(self, u):
        u = _as_state(u, self.n)
        eye = np.eye(self.n).reshape((self.n, self.n) + (1,) * (u.ndim - 1))
        return eye * u[None] - u[:, None] * u[None, :]

    def invert(self, w):
        w = np.asarray(w, dtype=float)
        # shift by max(0, max w) so that |w| up to ~700 stays finite
        shift = np.maximum(0.0, np.max(w, axis=0))
        e = np.exp(w - shift)
        return e / (np.exp(-shift) + e.sum(axis=0))


class VolumeFillingEntropy(EntropyModel):
    """``u_1(log u_1 - 1) + u_2(log u_2 - 1) + int_c^{u_3} log q``."""

    family = "volume_filling"

    def __init__(self, q, c=0.5):
        if not 0.0 < c < 1.0:
            raise ConfigurationError("integration constant c must lie in (0, 1)")
        self.q = q
        self.c = c
        self.n = 2
        self.domain = simplex(2)

    def density(self, u):
        u = _as_state(u, 2)
        return (xlogy(u, u) - u).sum(axis=0) + self.q.log_integral(self.c, _free(u))

    def grad(self, u):
        u = _as_state(u, 2)
        return np.log(u) - np.log(self.q(_free(u)))

    def _k(self, u):
        u3 = _free(u)
        return self.q.derivative(u3) / self.q(u3)

    def hess(self, u):
        u = _as_state(u, 2)
        eye = np.eye(2).reshape((2, 2) + (1,) * (u.ndim - 1))
        return eye / u[None] + self._k(u)

    def inv_hess(self, u):
        u = _as_state(u, 2)
        k = self._k(u)
        eye = np.eye(2).reshape((2, 2) + (1,) * (u.ndim - 1))
        return eye * u[None] - k * u[:, None] * u[None, :] / (1.0 + k * u.sum(axis=0))

    def invert(self, w):
        w = np.asarray(w, dtype=float)
        shape = w.shape
        flat = w.reshape(2, -1)
        if isinstance(self.q, PowerLaw):
            u = kernels.vf_power_invert(flat, self.q.s, self.q.scale)
        else:
            u = kernels.vf_generic_invert(flat, self.q)
        return u.reshape(shape)

    def describe(self):
        return {"family": self.family, "q": getattr(self.q, "name", "custom"), "c": self.c}


class PopulationPowerEntropy(EntropyModel):
    """Separable power entropy with optional logarithmic regularization.

    Species 1 is weighted by ``alpha21`` and species 2 by ``alpha12``; each
    term is ``int_c^u int_c^z s*kappa*y^(s-2) dy dz + eps*u(log u - 1)``.
    """

    family = "population_power"

    def __init__(self, alpha12, alpha21, s, c=1.0, eps=0.0):
        if not 1.0 < s < 4.0:
            raise ConfigurationError("s must lie in (1, 4)")
        if c <= 0 or eps < 0 or alpha12 < 0 or alpha21 < 0:
            raise ConfigurationError("need c > 0, eps >= 0 and nonnegative weights")
        if eps == 0 and (alpha12 == 0 or alpha21 == 0):
            raise ConfigurationError("zero cross coefficient needs eps > 0 for a convex entropy")
        self.kappa = np.array([alpha21, alpha12], dtype=float)
        self.s, self.c, self.eps = float(s), float(c), float(eps)
        self.n = 2
        self.domain = orthant(2)

    def _k(self, u):
        return self.kappa.reshape((2,) + (1,) * (np.ndim(u) - 1))

    def density(self, u):
        u = _as_state(u, 2)
        s, c, k = self.s, self.c, self._k(u)
        val = k / (s - 1) * (u**s - c**s) - s * k * c ** (s - 1) * (u - c) / (s - 1)
        return (val + self.eps * (xlogy(u, u) - u)).sum(axis=0)

    def grad(self, u):
        u = _as_state(u, 2)
        s, c, k = self.s, self.c, self._k(u)
        g = s * k / (s - 1) * (u ** (s - 1) - c ** (s - 1))
        if self.eps:
            g = g + self.eps * np.log(u)
        return g

    def _diag(self, u):
        return self.s * self._k(u) * u ** (self.s - 2) + self.eps / u

    def hess(self, u):
        u = _as_state(u, 2)
        eye = np.eye(2).reshape((2, 2) + (1,) * (u.ndim - 1))
        return eye * self._diag(u)[None]

    def inv_hess(self, u):
        u = _as_state(u, 2)
        eye = np.eye(2).reshape((2, 2) + (1,) * (u.ndim - 1))
        return eye / self._diag(u)[None]

    def invert(self, w):
        w = np.asarray(w, dtype=float)
        s, c = self.s, self.c
        out = np.empty_like(w)
        for i in range(2):
            kappa = self.kappa[i]
            if self.eps > 0:
                out[i] = kernels.power_log_invert(w[i], kappa, s, c, self.eps)
                continue
            base = c ** (s - 1) + (s - 1) * w[i] / (s * kappa)
            if np.any(~(base > 0)):
                raise NumericalError("entropy variable outside the range of Dh (eps = 0)",
                                     residual=float(np.max(-base)))
            out[i] = base ** (1.0 / (s - 1))
        return out

    def describe(self):
        return {"family": self.family, "alpha12": float(self.kappa[1]),
                "alpha21": float(self.kappa[0]), "s": self.s, "c": self.c, "eps": self.eps}


class SKTLogEntropy(EntropyModel):
    """``u_1(log u_1 - 1)/alpha12 + u_2(log u_2 - 1)/alpha21`` on the orthant."""

    family = "skt_log"

    def __init__(self, alpha12=1.0, alpha21=1.0):
        if not (alpha12 > 0 and alpha21 > 0):
            raise ConfigurationError("skt_log entropy needs alpha12, alpha21 > 0")
        self.weights = np.array([alpha12, alpha21], dtype=float)
        self.n = 2
        self.domain = orthant(2)

    def _w(self, u):
        return self.weights.reshape((2,) + (1,) * (np.ndim(u) - 1))

    def density(self, u):
        u = _as_state(u, 2)
        return ((xlogy(u, u) - u) / self._w(u)).sum(axis=0)

    def grad(self, u):
        u = _as_state(u, 2)
        return np.log(u) / self._w(u)

    def hess(self, u):
        u = _as_state(u, 2)
        eye = np.eye(2).reshape((2, 2) + (1,) * (u.ndim - 1))
        return eye / (self._w(u) * u)[None]

    def inv_hess(self, u):
        u = _as_state(u, 2)
        eye = np.eye(2).reshape((2, 2) + (1,) * (u.ndim - 1))
        return eye * (self._w(u) * u)[None]

    def invert(self, w):
        w = np.asarray(w, dtype=float)
        return np.exp(self._w(w) * w)

    def describe(self):
        return {"family": self.family, "alpha12": float(self.weights[0]),
                "alpha21": float(self.weights[1])}


def default_entropy(model, c=None, eps=None):
    """Entropy family the catalog pairs with ``model``."""
    name = model.name
    if name in ("maxwell_stefan", "tumor", "burger_ion", "ks_like", "linear_family"):
        return LogarithmicEntropy(model.n)
    if name == "volume_filling":
        return VolumeFillingEntropy(model.params["q"], 0.5 if c is None else c)
    if name == "skt":
        a = model.params["alpha"]
        return SKTLogEntropy(a[0, 2], a[1, 1])
    if name == "electron_hole":
        return SKTLogEntropy(1.0, 1.0)
    if name == "power_population":
        a = model.params["alpha"]
        e = model.params.get("eps", 0.0) if eps is None else eps
        return PopulationPowerEntropy(a[0, 2], a[1, 1], model.params["s"],
                                      1.0 if c is None else c, e)
    raise ConfigurationError(f"no default entropy for model {name!r}")


def build_entropy(table, model):
    """Entropy from a config table ``{"family": ..., "c": ..., "eps": ...}``."""
    if not table:
        return default_entropy(model)
    family = table.get("family")
    c, eps = table.get("c"), table.get("eps")
    if family is None:
        return default_entropy(model, c, eps)
    if family == "logarithmic":
        return LogarithmicEntropy(model.n)
    if family == "volume_filling":
        q = model.params.get("q")
        if q is None:
            raise ConfigurationError("volume_filling entropy needs a volume_filling model")
        return VolumeFillingEntropy(q, 0.5 if c is None else c)
    if family == "skt_log":
        a = model.params.get("alpha")
        return SKTLogEntropy(1.0, 1.0) if a is None else SKTLogEntropy(a[0, 2], a[1, 1])
    if family == "population_power":
        a = model.params.get("alpha")
        s = model.params.get("s")
        if a is None or s is None:
            raise ConfigurationError("population_power entropy needs a power_population model")
        return PopulationPowerEntropy(a[0, 2], a[1, 1], s, 1.0 if c is None else c,
                                      0.0 if eps is None else eps)
    raise ConfigurationError(f"unknown entropy family {family!r}")


# ---------------------------------------------------------------------------
# Operations


def eval_entropy(em, u):
    """Return ``(h, Dh, D^2h)`` at an interior state; raise on the boundary."""
    u = np.asarray(u, dtype=float)
    if not np.all(em.domain.contains(u, margin=0.0)):
        raise DomainError("state is not strictly inside the admissible set")
    return em.density(u), em.grad(u), em.hess(u)


def invert_grad(em, w, check=True):
    """Map entropy variables back to states strictly inside the domain."""
    w = np.asarray(w, dtype=float)
    if not np.all(np.isfinite(w)):
        raise NumericalError("entropy variable is not finite")
    u = em.invert(w)
    if check and not np.all(em.domain.contains(u, margin=0.0)):
        raise NumericalError("inversion left the admissible set (underflow at extreme w)")
    return u


def sym_min_eig(m):
    """Smallest eigenvalue of the symmetric part of a batch ``(n, n, N)``."""
    s = 0.5 * (m + np.swapaxes(m, 0, 1))
    if s.shape[0] == 2:
        a, b, d = s[0, 0], s[0, 1], s[1, 1]
        mean = 0.5 * (a + d)
        rad = np.hypot(0.5 * (a - d), b)
        big = mean + rad
        # det / big keeps precision when the two roots differ wildly
        safe = np.where(big > 0, big, 1.0)
        return np.where(big > 0, (a * d - b * b) / safe, mean - rad)
    return np.linalg.eigvalsh(np.moveaxis(s, (0, 1), (-2, -1)))[..., 0]


def _finite(x):
    return float(x) if x is not None and math.isfinite(x) else None


@dataclass
class PDReport:
    """Outcome of a sampling-based definiteness certification."""

    samples: int
    min_sym_eigenvalue: float
    worst_point: list
    bound_residual_min: float = math.inf
    verdict: str = "unknown"
    a_star: float | None = None
    model: str = ""
    entropy: dict = field(default_factory=dict)
    note: str = "sampled, not proven"

    def to_json(self):
        """JSON-safe dict; non-finite numbers (no bound checked) become ``None``."""
        return {"model": self.model, "entropy": self.entropy, "samples": self.samples,
                "min_eig": _finite(self.min_sym_eigenvalue),
                "worst_point": [_finite(x) for x in self.worst_point],
                "bound_residual": _finite(self.bound_residual_min), "verdict": self.verdict,
                "a_star": _finite(self.a_star), "note": self.note}

    def dumps(self):
        return json.dumps(self.to_json(), indent=2, sort_keys=True, allow_nan=False)


def _verdict(min_eig, bound, known, tol=EIG_TOL):
    if not (np.isfinite(min_eig) and (np.isfinite(bound) or bound == math.inf)):
        return "unknown"
    ok = min_eig >= -tol and bound >= -tol
    if not known:
        return "unknown"
    return "pass" if ok else "fail"


def product_matrix(em, model, u):
    """``D^2 h(u) A(u)`` for a batch of states."""
    return np.einsum("ij...,jk...->ik...", em.hess(u), model.eval_A(u))


def certify_H2(em, model, n_samples=10_000, margin=SAMPLE_MARGIN, seed=0):
    """Minimum eigenvalue of ``sym(D^2h A)`` over quasi-random interior points."""
    if em.n != model.n:
        raise ConfigurationError("entropy and model disagree on the species count")
    u = model.domain.sample(n_samples, margin=margin, seed=seed)
    eig = sym_min_eig(product_matrix(em, model, u))
    finite = np.isfinite(eig)
    idx = int(np.argmin(np.where(finite, eig, np.inf)))
    min_eig = float(eig[idx]) if finite.any() else math.nan
    verdict = _verdict(min_eig, math.inf, model.entropy_known)
    if not finite.all():
        verdict = "unknown"
    return PDReport(n_samples, min_eig, u[:, idx].tolist(), math.inf, verdict,
                    model=model.name, entropy=em.describe())


def _alpha_values(meta, domain, u):
    a, b = domain.bounds
    out = []
    for i, m in enumerate(meta):
        anchor = m.anchor if m.anchor is not None else (a if m.side == "lower" else b)
        dist = u[i] - anchor if m.side == "lower" else anchor - u[i]
        out.append(m.alpha_star * np.power(dist, m.m - 1.0))
    return np.array(out)


def certify_H2prime_H2dprime(em, model, meta=None, n_samples=10_000,
                             margin=SAMPLE_MARGIN, seed=0):
    """Check the per-species quadratic lower bound and fit the growth constant.

    The bound residual is the smallest eigenvalue of
    ``sym(D^2h A) - diag(alpha_i(u_i)^2)``; ``a_star`` is the smallest
    constant with ``|a_ij| <= a_star |alpha_j|`` for every ``j`` with
    ``m_j > 1`` over the samples.
    """
    meta = meta if meta is not None else model.h2prime_meta
    if meta is None:
        raise ConfigurationError(f"model {model.name!r} carries no lower-bound metadata")
    if len(meta) != model.n:
        raise ConfigurationError("one lower-bound entry per species is required")
    u = model.domain.sample(n_samples, margin=margin, seed=seed)
    prod = product_matrix(em, model, u)
    eig = sym_min_eig(prod)
    alpha = _alpha_values(meta, model.domain, u)
    n = model.n
    diff = prod - np.eye(n)[:, :, None] * (alpha**2)[None]
    res = sym_min_eig(diff)
    a_star = None
    big = [j for j, m in enumerate(meta) if m.m > 1]
    if big:
        A = model.eval_A(u)
        a_star = float(max(np.max(np.abs(A[:, j]) / np.abs(alpha[j])) for j in big))
    idx = int(np.nanargmin(res))
    min_eig = float(np.nanmin(eig))
    bound = float(res[idx])
    verdict = _verdict(min_eig, bound, model.entropy_known)
    if not (np.all(np.isfinite(res)) and np.all(np.isfinite(eig))):
        verdict = "unknown"
    return PDReport(n_samples, min_eig, u[:, idx].tolist(), bound, verdict, a_star,
                    model=model.name, entropy=em.describe())


# ---------------------------------------------------------------------------
# Lemma lower bounds


def _check_q(q):
    y = np.linspace(0.0, 1.0, 1001)
    qv, dq = q(y), q.derivative(y)
    if float(np.asarray(q(np.array(0.0)))) != 0.0:
        raise PreconditionError("q(0) must vanish")
    if np.any(qv[1:] <= 0) or np.any(np.diff(qv) < -1e-14):
        raise PreconditionError("q must be positive and nondecreasing on (0, 1)")
    if np.any(y * dq > 2 * qv + 1e-12):
        raise PreconditionError("y q'(y) <= 2 q(y) fails on [0, 1]")


def volume_filling_bound_residual(q, beta, u, z):
    """``z^T D^2h A z`` minus its lower bound for the volume-filling model.

    The bound is ``q/u_1 z_1^2 + q/u_2 z_2^2 + q'^2/q (z_1 + z_2)^2`` with
    ``q`` evaluated at the free fraction. It requires ``beta >= 1`` (the
    other case reduces to it by rescaling time).
    """
    from .models import make_volume_filling

    _check_q(q)
    if beta < 1.0:
        raise PreconditionError("the lower bound is stated for beta >= 1")
    # extended precision: both sides reach ~1/margin near the boundary
    u = np.asarray(u, dtype=np.longdouble)
    z = np.asarray(z, dtype=np.longdouble)
    model = make_volume_filling(q, beta)
    em = VolumeFillingEntropy(q)
    m = product_matrix(em, model, u)
    quad = np.einsum("i...,ij...,j...->...", z, m, z)
    u3 = _free(u)
    qv, dq = q(u3), q.derivative(u3)
    bound = qv / u[0] * z[0] ** 2 + qv / u[1] * z[1] ** 2 + dq**2 / qv * (z[0] + z[1]) ** 2
    return (quad - bound).astype(float)


def population_bound_residual(alpha, s, u, z, eps=0.0):
    """``z^T H A z`` minus the lower bound for the power population model.

    With ``eps = 0`` the bound is
    ``(alpha_10 + a_11(u_1)) a_21'(u_1)/u_1 z_1^2 + (alpha_20 + a_22(u_2)) a_12'(u_2)/u_2 z_2^2``.
    With ``eps > 0`` the regularized product is compared with the
    unregularized one plus ``eps ((alpha_10 + a_11)/u_1 z_1^2 + (alpha_20 + a_22)/u_2 z_2^2)``.
    """
    from .models import make_power_population

    a = np.asarray(alpha, dtype=float)
    (a10, a11, a12), (a20, a21, a22) = a
    if s < 1:
        raise PreconditionError("the bound is stated for s >= 1")
    if a11 * a22 < (1 - 1 / s) * a12 * a21:
        raise PreconditionError("a11 a22 >= (1 - 1/s) a12 a21 is required")
    if eps > 0 and s > 4:
        raise PreconditionError("the regularized bound needs s <= 4")
    u = np.asarray(u, dtype=np.longdouble)
    z = np.asarray(z, dtype=np.longdouble)
    u1, u2 = u[0], u[1]
    base = make_power_population(a, s) if 1 < s < 4 else None
    if base is None:
        raise PreconditionError("power population requires 1 < s < 4")
    em0 = PopulationPowerEntropy(a12, a21, s)
    hq = np.einsum("i...,ij...,j...->...", z, product_matrix(em0, base, u), z)
    low1 = (a10 + a11 * u1**s) / u1
    low2 = (a20 + a22 * u2**s) / u2
    if eps == 0:
        bound = low1 * s * a21 * u1 ** (s - 1) * z[0] ** 2 + low2 * s * a12 * u2 ** (s - 1) * z[1] ** 2
        return (hq - bound).astype(float)
    reg = make_power_population(a, s, eps)
    em = PopulationPowerEntropy(a12, a21, s, eps=eps)
    he = np.einsum("i...,ij...,j...->...", z, product_matrix(em, reg, u), z)
    return (he - (hq + eps * (low1 * z[0] ** 2 + low2 * z[1] ** 2))).astype(float)


def lemma_bounds_check(model_family, u, z, **params):
    """Dispatch to the lower-bound residual of ``"volume_filling"`` or ``"power_population"``."""
    if model_family == "volume_filling":
        return volume_filling_bound_residual(params["q"], params.get("beta", 1.0), u, z)
    if model_family == "power_population":
        return population_bound_residual(params["alpha"], params.get("s", 2.0), u, z,
                                         params.get("eps", 0.0))
    raise ConfigurationError(f"no lemma bound for {model_family!r}")


def report_dict(report):
    return asdict(report)

