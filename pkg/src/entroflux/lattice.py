"""Random-walk master equation on a 1D lattice and its diffusive limit.

The expected occupations obey a linear-in-hops ODE; rates are
``sigma0 * p_i(departure cell) * q_i(free fraction of arrival cell)`` with
``sigma0 = 1/h^2``. The two ends reflect: no hops leave the lattice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .entropy import VolumeFillingEntropy
from .errors import ConfigurationError, NumericalError
from .models import CrossDiffusionModel, PowerLaw, TransitionModel, make_volume_filling, simplex
from .solver import Grid1D, SolverConfig, StateField, run

BOUND_TOL = 1e-14


@dataclass
class LatticeSystem:
    """``N`` cells of width ``h`` carrying occupations of two species."""

    transition: TransitionModel
    state: np.ndarray
    h: float

    def __post_init__(self):
        self.state = np.array(self.state, dtype=float)
        if self.state.ndim != 2 or self.state.shape[0] != 2:
            raise ValueError("state must have shape (2, N)")
        if not self.h > 0:
            raise ConfigurationError("cell distance h must be positive")
        if not admissible(self.state, BOUND_TOL):
            raise ConfigurationError("lattice occupations must satisfy u_i >= 0, u1 + u2 <= 1")

    @property
    def cells(self):
        return self.state.shape[1]

    @property
    def sigma0(self):
        return 1.0 / self.h**2

    @property
    def length(self):
        return self.cells * self.h

    def masses(self, state=None):
        s = self.state if state is None else state
        return s.sum(axis=1) * self.h


@dataclass
class LatticeTrajectory:
    h: float
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    dt_used: float = math.nan
    rejections: int = 0

    @property
    def final(self):
        return self.states[-1]


def admissible(u, tol=0.0):
    return bool(np.all(u >= -tol) and np.all(u.sum(axis=0) <= 1.0 + tol)
                and np.all(np.isfinite(u)))


def _args(tr):
    return tr.p_coef, tr.p_power, np.array(tr.q_scale), np.array(tr.q_power)


def lattice_rhs(sys, state=None):
    """Gain minus loss of every cell, shape ``(2, N)``."""
    u = sys.state if state is None else np.asarray(state, dtype=float)
    return kernels.lattice_rhs_kernel(u, *_args(sys.transition), sys.sigma0)


def max_rate(tr, u=None):
    """Upper bound for ``p_i q_i`` over admissible states (or at ``u``)."""
    if u is None:
        # p is monotone in each occupation and q in the free fraction, so the
        # extremes sit on the corners of the simplex
        corners = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        p = tr.p(corners[0], corners[1])
        qmax = np.array([max(tr.q(np.array([0.0, 1.0]))[i]) for i in range(2)])
        return float(np.max(np.abs(p)) * np.max(qmax))
    y = 1.0 - u[0] - u[1]
    return float(np.max(np.abs(tr.p(u[0], u[1]) * tr.q(y))))


def stable_dt(sys):
    return 0.25 * sys.h**2 / max(max_rate(sys.transition), 1e-300)


def integrate_lattice(sys, T, dt, stride=None, max_halvings=10):
    """Classical RK4 for the master equation up to time ``T``.

    Bounds are checked after every chunk of ``stride`` steps; a chunk that
    leaves the admissible set is rejected and redone with half the step.

    Raises
    ------
    ValueError
        If ``dt`` exceeds ``0.25 h^2 / max(p q)``.
    NumericalError
        If bounds keep failing after ``max_halvings`` halvings.
    """
    limit = stable_dt(sys)
    if not 0 < dt <= limit * (1 + 1e-12):
        raise ValueError(f"dt={dt:g} violates the explicit stability limit {limit:g}")
    if T < 0:
        raise ValueError("T must be nonnegative")
    traj = LatticeTrajectory(sys.h, [0.0], [sys.state.copy()], dt)
    if T == 0:
        return traj
    nsteps = int(math.ceil(T / dt - 1e-9))
    dt = T / nsteps
    stride = nsteps if stride is None else max(1, int(stride))
    args = _args(sys.transition)
    u, t, done = sys.state.copy(), 0.0, 0
    while done < nsteps:
        chunk = min(stride, nsteps - done)
        span = chunk * dt
        sub, trial = 1, None
        for _ in range(max_halvings + 1):
            trial = kernels.lattice_rk4(u, *args, sys.sigma0, span / (chunk * sub), chunk * sub)
            if admissible(trial, BOUND_TOL):
                break
            sub *= 2
            traj.rejections += 1
        else:
            raise NumericalError("lattice occupations left [0, 1] after repeated halving")
        u, done = trial, done + chunk
        t = done * dt
        traj.times.append(t)
        traj.states.append(u.copy())
    sys.state = u
    traj.dt_used = dt
    return traj


def macroscopic_matrix(tr, u):
    """Diffusion matrix of the formal limit ``h -> 0`` at ``u`` (shape ``(2, 2, ...)``)."""
    u = np.asarray(u, dtype=float)
    u1, u2 = u[0], u[1]
    u3 = 1.0 - u1 - u2
    p, dp, q, dq = tr.p(u1, u2), tr.dp(u1, u2), tr.q(u3), tr.dq(u3)
    a11 = p[0] * q[0] + u1 * (dp[0, 0] * q[0] + p[0] * dq[0])
    a12 = u1 * (dp[0, 1] * q[0] + p[0] * dq[0])
    a21 = u2 * (dp[1, 0] * q[1] + p[1] * dq[1])
    a22 = p[1] * q[1] + u2 * (dp[1, 1] * q[1] + p[1] * dq[1])
    return np.array([[a11, a12], [a21, a22]])


def model_from_transition(tr):
    """Catalog model matching the macroscopic limit of ``tr``."""
    pc = tr.p_coef
    if (tr.q_power[0] == tr.q_power[1] and tr.q_scale[0] == 1.0
            and np.all(pc[:, 1:] == 0) and np.all(pc[:, 0] == 1.0)):
        return make_volume_filling(PowerLaw(tr.q_power[0]), tr.q_scale[1])
    return CrossDiffusionModel("lattice_limit", 2, {"transition": tr},
                               lambda u: macroscopic_matrix(tr, u), simplex(2),
                               entropy_known=False)


# ---------------------------------------------------------------------------
# Diffusive-limit harness


def cell_averages(fn, edges, order=4):
    """Gauss-Legendre cell averages of ``fn(x) -> (n, len(x))``."""
    xg, wg = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1], edges[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    acc = 0.0
    for xi, wi in zip(xg, wg):
        acc = acc + wi * np.asarray(fn(mid + half * xi))
    return 0.5 * acc


def coarsen(values, factor):
    """Average ``factor`` consecutive fine cells into one coarse cell."""
    n, M = values.shape
    if M % factor:
        raise ValueError("grids are not nested")
    return values.reshape(n, M // factor, factor).mean(axis=2)


@dataclass
class LimitStudy:
    hs: list
    errors: list
    orders: list
    reference: np.ndarray
    lattice_states: list
    T: float

    @property
    def decreasing(self):
        return all(b < a for a, b in zip(self.errors, self.errors[1:]))


def pde_reference(model, em, u0_fn, T, M, L=1.0, tau=1e-4):
    """Reference with two-level Richardson extrapolation in time."""
    grid = Grid1D(M, L)
    u0 = StateField(cell_averages(u0_fn, np.linspace(0.0, L, M + 1)), grid)
    coarse = run(model, em, u0, T, SolverConfig(tau=tau), snapshot_stride=10**9).final.values
    fine = run(model, em, u0, T, SolverConfig(tau=tau / 2), snapshot_stride=10**9).final.values
    return 2.0 * fine - coarse


def diffusive_limit_study(tr, u0_fn, T=0.1, hs=(1 / 32, 1 / 64, 1 / 128), L=1.0,
                          M_ref=512, tau_ref=1e-4, model=None, em=None):
    """L2 distance between lattice and PDE solutions over a refinement sweep.

    Lattice cells are nested in the reference grid, so the reference is
    averaged onto each lattice cell before comparing.
    """
    model = model if model is not None else model_from_transition(tr)
    if em is None:
        if model.name != "volume_filling":
            raise ConfigurationError("supply an entropy for non volume-filling transitions")
        em = VolumeFillingEntropy(model.params["q"])
    ref = pde_reference(model, em, u0_fn, T, M_ref, L, tau_ref)
    errors, states = [], []
    for h in hs:
        N = int(round(L / h))
        if abs(N * h - L) > 1e-12 * L or M_ref % N:
            raise ConfigurationError(f"h={h} does not give a grid nested in M_ref={M_ref}")
        sys = LatticeSystem(tr, cell_averages(u0_fn, np.linspace(0.0, L, N + 1)), h)
        traj = integrate_lattice(sys, T, stable_dt(sys))
        lat = traj.final
        diff = lat - coarsen(ref, M_ref // N)
        errors.append(float(np.sqrt(np.sum(diff**2) * h)))
        states.append(lat)
    orders = [math.log(e0 / e1) / math.log(h0 / h1)
              for (e0, e1, h0, h1) in zip(errors, errors[1:], hs, hs[1:])]
    return LimitStudy(list(hs), errors, orders, ref, states, T)
