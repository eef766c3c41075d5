"""Entropy functionals, relative entropy, decay fits and dissipation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .errors import DegenerateFitError
from .solver import StateField, format_float

FIT_FLOOR = 1e-15
MIN_FIT_POINTS = 10


@dataclass
class DiagnosticsRecord:
    t: float
    H: float
    H_star: float
    masses: np.ndarray
    min_margin: float
    dissipation_estimate: float

    def row(self):
        vals = [self.t, self.H, self.H_star, *self.masses, self.min_margin,
                self.dissipation_estimate]
        return ",".join(format_float(v) for v in vals)


@dataclass
class DecayFit:
    lam: float
    r_squared: float
    window: tuple
    points: int

    @property
    def rate(self):
        return self.lam


def diagnostics_header(n):
    masses = [f"mass_{i + 1}" for i in range(n)]
    return ",".join(["t", "H", "H_star", *masses, "min_margin", "dissipation"])


def entropy_functional(em, field):
    """``sum_k h(u_k) dx``; ``0 log 0`` is taken as ``0`` on the boundary."""
    return float(np.sum(em.density(field.values)) * field.grid.dx)


def steady_state(field):
    """Mass-preserving constant state ``masses / L``."""
    return field.masses() / field.grid.L


def relative_entropy(field, u_inf=None):
    """``sum_i int u_i log(u_i/u_inf_i) - u_i + u_inf_i``.

    The linear terms integrate to zero when ``u_inf`` carries the masses of
    ``field`` (the default) and keep the functional nonnegative otherwise.
    """
    u = field.values
    ui = steady_state(field) if u_inf is None else np.asarray(u_inf, dtype=float)
    ui = ui[:, None]
    dens = xlogy(u, u) - xlogy(u, ui) - u + ui
    return float(max(np.sum(dens) * field.grid.dx, 0.0))


def ckp_check(field, u_inf=None, rtol=1e-12):
    """Csiszar-Kullback bound ``sum_i ||u_i - u_inf_i||_1^2 <= 2 max(mass) H*``."""
    u_inf = steady_state(field) if u_inf is None else np.asarray(u_inf, dtype=float)
    l1 = np.sum(np.abs(field.values - u_inf[:, None]), axis=1) * field.grid.dx
    lhs = float(np.sum(l1**2))
    rhs = 2.0 * float(np.max(field.masses())) * relative_entropy(field, u_inf)
    return lhs <= rhs * (1 + rtol) + 1e-300


def fit_decay(times, values=None, window=None):
    """Least-squares fit of ``log H*`` against ``t``.

    Parameters
    ----------
    times : array_like
        Times, or an ``(N, 2)`` array of ``(t, H*)`` pairs when ``values``
        is omitted.
    values : array_like, optional
        Relative entropy values.
    window : tuple of float, optional
        ``(t_lo, t_hi)``; defaults to the full series.

    Returns
    -------
    DecayFit
        ``lam`` is minus the slope. Points at or below ``1e-15`` are treated
        as converged and excluded.
    """
    if values is None:
        arr = np.asarray(times, dtype=float)
        t, h = arr[:, 0], arr[:, 1]
    else:
        t, h = np.asarray(times, dtype=float), np.asarray(values, dtype=float)
    lo, hi = (t.min(), t.max()) if window is None else window
    sel = (t >= lo) & (t <= hi)
    t, h = t[sel], h[sel]
    if h.size and np.all(h <= FIT_FLOOR):
        raise DegenerateFitError("relative entropy already below 1e-15; nothing to fit")
    keep = h > FIT_FLOOR
    if np.count_nonzero(keep) < MIN_FIT_POINTS:
        raise DegenerateFitError(f"need at least {MIN_FIT_POINTS} positive points in the window")
    t, y = t[keep], np.log(h[keep])
    slope, icpt = np.polyfit(t, y, 1)
    ss_res = float(np.sum((y - (slope * t + icpt)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot <= 1e-28 * max(1.0, float(np.sum(y**2))):
        r2 = 1.0
        slope = 0.0 if ss_tot == 0 else slope
    else:
        r2 = 1.0 - ss_res / ss_tot
    return DecayFit(float(-slope) + 0.0, float(r2), (float(lo), float(hi)), int(t.size))


def face_quadratic(em, model, field):
    """Per-face ``(du/dx)^T D^2h(u_bar) A(u_bar) (du/dx)``."""
    u = field.values
    if u.shape[1] < 2:
        return np.zeros(0)
    dx = field.grid.dx
    g = (u[:, 1:] - u[:, :-1]) / dx
    ubar = 0.5 * (u[:, 1:] + u[:, :-1])
    m = np.einsum("ij...,jk...->ik...", em.hess(ubar), model.eval_A(ubar))
    return np.einsum("i...,ij...,j...->...", g, m, g)


def dissipation_estimate(em, model, field):
    """Discrete ``int grad u : D^2h A grad u`` over interior faces."""
    return float(np.sum(face_quadratic(em, model, field)) * field.grid.dx)


def min_margin(domain, field):
    return float(np.min(domain.margin_to_boundary(field.values)))


def record(em, model, field, t, u_inf=None):
    return DiagnosticsRecord(
        float(t), entropy_functional(em, field), relative_entropy(field, u_inf),
        field.masses(), min_margin(model.domain, field),
        dissipation_estimate(em, model, field))


class DiagnosticsRecorder:
    """Solver callback collecting one record per accepted step.

    Entropy increases above ``tol`` are counted in ``violations`` rather
    than raised.
    """

    def __init__(self, em, model, u0: StateField, u_inf=None, tol=1e-8):
        self.em, self.model, self.u_inf, self.tol = em, model, u_inf, tol
        self.records = [record(em, model, u0, 0.0, u_inf)]
        self.violations = 0
        self.max_increase = -math.inf

    def __call__(self, k, t, field, w, stats):
        rec = record(self.em, self.model, field, t, self.u_inf)
        dH = rec.H - self.records[-1].H
        self.max_increase = max(self.max_increase, dH)
        if dH > self.tol:
            self.violations += 1
        self.records.append(rec)

    def series(self, name):
        return np.array([getattr(r, name) for r in self.records])

    def rows(self):
        return (r.row() for r in self.records)
