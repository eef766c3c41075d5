"""Entropy compatibility of two-species matrices with linear coefficients.

``a_ij(u) = alpha_ij + beta_ij u_1 + gamma_ij u_2``. Requiring
``A (D^2h)^{-1}`` to be symmetric for the logarithmic entropy leaves five
free parameters; positive semi-definiteness of ``(D^2h) A`` then reduces to
the sign of two polynomial numerators over the open simplex.
"""

from __future__ import annotations

from dataclasses import astuple, dataclass

import numpy as np

from .entropy import LogarithmicEntropy, sym_min_eig
from .models import CrossDiffusionModel, as_float, simplex
from .rng import SplitMix64
from .solver import format_float

NUMERATOR_TOL = 1e-12
GRID_MARGIN = 1e-4
BAND_MARGIN = 1e-6
ORACLE_POINTS = 1000


@dataclass(frozen=True)
class LinearFamilyParams:
    alpha11: float
    alpha22: float
    beta11: float
    beta12: float
    gamma22: float

    def as_tuple(self):
        return astuple(self)


@dataclass(frozen=True)
class CoefficientTable:
    """``alpha``, ``beta``, ``gamma`` as 2x2 arrays."""

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    def A(self, u):
        u = as_float(u)
        shape = (2, 2) + (1,) * (u.ndim - 1)
        return (self.alpha.reshape(shape) + self.beta.reshape(shape) * u[0]
                + self.gamma.reshape(shape) * u[1])


def reconstruct_A(params):
    """Fill all twelve coefficients from the five free parameters."""
    p = params if isinstance(params, LinearFamilyParams) else LinearFamilyParams(*params)
    g21 = p.beta12 + p.alpha22 - p.alpha11
    b22 = p.beta11 - g21
    g11 = p.gamma22 - p.beta12
    alpha = np.array([[p.alpha11, 0.0], [0.0, p.alpha22]])
    beta = np.array([[p.beta11, p.beta12], [0.0, b22]])
    gamma = np.array([[g11, 0.0], [g21, p.gamma22]])
    return CoefficientTable(alpha, beta, gamma)


def linear_family_model(params):
    table = reconstruct_A(params)
    return CrossDiffusionModel("linear_family", 2, {"params": params}, table.A, simplex(2))


def c11_numerator(params, u1, u2):
    """``u_1 u_3 c_11`` as a polynomial in ``(u_1, u_2)``."""
    a11, a22, b11, b12, g22 = astuple(_p(params))
    return ((b12 - g22) * u2**2 + (-b11 + b12 + a22 - a11) * u1 * u2 + b11 * u1
            + (-a11 - b12 + g22) * u2 + a11)


def det_numerator(params, u1, u2):
    """``u_1 u_2 u_3 det(c)`` as a polynomial in ``(u_1, u_2)``."""
    a11, a22, b11, b12, g22 = astuple(_p(params))
    return (b11 * (b11 - b12 - a22 + a11) * u1**2 - g22 * (b12 - g22) * u2**2
            + (a11 * g22 - a22 * g22 - b11 * b12 + 2 * b11 * g22 - b12 * g22) * u1 * u2
            + (a11**2 - a11 * a22 + a11 * b11 - a11 * b12 + a22 * b11) * u1
            + (a11 * g22 - a22 * b12 + a22 * g22) * u2 + a11 * a22)


def _p(params):
    return params if isinstance(params, LinearFamilyParams) else LinearFamilyParams(*params)


def product_entries(params, u):
    """Direct ``(D^2h) A`` for the logarithmic entropy, shape ``(2, 2, ...)``."""
    u = np.asarray(u, dtype=float)
    return np.einsum("ij...,jk...->ik...", LogarithmicEntropy(2).hess(u), reconstruct_A(params).A(u))


def b_asymmetry(params, u):
    """Largest ``|B - B^T|`` entry of ``B = A (D^2h)^{-1}`` over the points."""
    u = np.asarray(u, dtype=float)
    B = np.einsum("ij...,jk...->ik...", reconstruct_A(params).A(u), LogarithmicEntropy(2).inv_hess(u))
    return float(np.max(np.abs(B[0, 1] - B[1, 0])))


def triangle_grid(resolution, margin=GRID_MARGIN):
    """Points ``u_i >= margin`` with ``1 - u_1 - u_2 >= margin``, shape ``(2, K)``."""
    r = int(resolution)
    i, j = np.meshgrid(np.arange(r + 1), np.arange(r + 1), indexing="ij")
    keep = i + j <= r
    step = (1.0 - 3.0 * margin) / r
    return np.array([margin + i[keep] * step, margin + j[keep] * step])


def boundary_band(resolution, margin=BAND_MARGIN):
    pts = triangle_grid(resolution, margin)
    i = np.rint((pts - margin) / ((1.0 - 3.0 * margin) / resolution))
    edge = (i[0] == 0) | (i[1] == 0) | (i[0] + i[1] == resolution)
    return pts[:, edge]


def scan_points(resolution):
    return np.concatenate([triangle_grid(resolution), boundary_band(resolution)], axis=1)


@dataclass
class ScanResult:
    params: LinearFamilyParams
    feasible: bool
    worst_u: tuple
    worst_which: str
    worst_value: float
    points: int
    label: str = "feasible (sampled)"

    def row(self):
        vals = [format_float(v) for v in self.params.as_tuple()]
        vals += ["1" if self.feasible else "0", format_float(self.worst_u[0]),
                 format_float(self.worst_u[1]), self.worst_which, format_float(self.worst_value)]
        return ",".join(vals)


SCAN_HEADER = ("alpha11,alpha22,beta11,beta12,gamma22,feasible,worst_u1,worst_u2,"
               "worst_which,worst_value")


def feasibility_scan(params, grid_resolution=64):
    """Sign test of both numerators on the triangular grid and boundary band.

    The worst point is the one with the most negative numerator (``c11``
    checked first on ties).
    """
    if grid_resolution < 64:
        raise ValueError("grid_resolution must be at least 64")
    p = _p(params)
    pts = scan_points(grid_resolution)
    n1 = c11_numerator(p, pts[0], pts[1])
    n2 = det_numerator(p, pts[0], pts[1])
    i1, i2 = int(np.argmin(n1)), int(np.argmin(n2))
    if n1[i1] <= n2[i2]:
        which, idx, val = "c11", i1, float(n1[i1])
    else:
        which, idx, val = "det", i2, float(n2[i2])
    feasible = bool(n1.min() >= -NUMERATOR_TOL and n2.min() >= -NUMERATOR_TOL)
    label = "feasible (sampled)" if feasible else "infeasible"
    return ScanResult(p, feasible, (float(pts[0, idx]), float(pts[1, idx])), which, val,
                      pts.shape[1], label)


def eigen_oracle(params, grid_resolution=64, n_random=ORACLE_POINTS, seed=0, rtol=1e-9):
    """Independent verdict from eigenvalues of ``sym((D^2h) A)``.

    Uses the scan points plus ``n_random`` quasi-random interior points.
    An eigenvalue counts as negative below ``-rtol`` times the matrix scale.
    """
    extra = simplex(2).sample(n_random, margin=GRID_MARGIN, seed=seed)
    pts = np.concatenate([scan_points(grid_resolution), extra], axis=1)
    C = product_entries(params, pts)
    lam = sym_min_eig(C)
    scale = np.max(np.abs(C), axis=(0, 1))
    return bool(np.all(lam >= -rtol * np.maximum(scale, 1.0)))


def random_params(rng, low=-3.0, high=3.0):
    return LinearFamilyParams(*(low + (high - low) * rng.uniform() for _ in range(5)))


def find_violator(seed=0, max_tries=10_000):
    """First parameter vector in ``[-3, 3]^5`` rejected by the eigenvalue oracle."""
    rng = SplitMix64(seed)
    for _ in range(max_tries):
        p = random_params(rng)
        if not eigen_oracle(p, n_random=200):
            return p
    return None


def check_closed_forms(params, grid_resolution=64):
    """Max relative mismatch of the closed forms against direct products.

    Errors are measured relative to the sum of absolute summands of the
    direct product, since near the boundary the direct determinant suffers
    cancellation that the closed form avoids. Both sides are evaluated in
    extended precision, derived coefficients included: near the corners
    the numerators vanish to second order and their monomial form cancels
    terms of size one.
    """
    params = LinearFamilyParams(*(np.longdouble(x) for x in _p(params).as_tuple()))
    pts = triangle_grid(grid_resolution).astype(np.longdouble)
    u1, u2 = pts
    u3 = 1.0 - u1 - u2
    H = LogarithmicEntropy(2).hess(pts)
    A = reconstruct_A(params).A(pts)
    C = np.einsum("ij...,jk...->ik...", H, A)
    Cabs = np.einsum("ij...,jk...->ik...", np.abs(H), np.abs(A))
    c11 = c11_numerator(params, u1, u2) / (u1 * u3)
    det = det_numerator(params, u1, u2) / (u1 * u2 * u3)
    d_direct = C[0, 0] * C[1, 1] - C[0, 1] * C[1, 0]
    d_scale = Cabs[0, 0] * Cabs[1, 1] + Cabs[0, 1] * Cabs[1, 0]
    e1 = np.abs(c11 - C[0, 0]) / np.maximum(Cabs[0, 0], 1e-300)
    e2 = np.abs(det - d_direct) / np.maximum(d_scale, 1e-300)
    return float(max(e1.max(), e2.max()))
