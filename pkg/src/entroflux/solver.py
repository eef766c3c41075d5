"""Implicit Euler in entropy variables on a 1D finite-volume grid.

The unknown of every time step is ``w``; states are recovered through the
inverse entropy gradient, so every accepted state lies strictly inside the
admissible set without any clamping.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_banded

from .entropy import invert_grad
from .errors import ConfigurationError, NumericalError, StepFailure
from .kernels import block_tridiag_banded

log = logging.getLogger(__name__)

SEED_MARGIN = 1e-13


@dataclass(frozen=True)
class Grid1D:
    """Uniform cell-centered grid on ``[0, L]`` with zero-flux ends."""

    M: int
    L: float = 1.0

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ConfigurationError("cell count M must be a positive integer")
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ConfigurationError("domain length L must be positive")

    @property
    def dx(self):
        return self.L / self.M

    @property
    def centers(self):
        return (np.arange(self.M) + 0.5) * self.dx


@dataclass
class StateField:
    """Cell averages, shape ``(n, M)``."""

    values: np.ndarray
    grid: Grid1D

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != self.grid.M:
            raise ValueError(f"values must have shape (n, {self.grid.M})")

    @property
    def n(self):
        return self.values.shape[0]

    def masses(self):
        return self.values.sum(axis=1) * self.grid.dx

    def copy(self):
        return StateField(self.values.copy(), self.grid)


@dataclass(frozen=True)
class SolverConfig:
    tau: float
    eps: float = 0.0
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    damping: float = 0.5
    max_halvings: int = 30
    fallback_eps: float = 1e-8
    max_fallbacks: int = 5
    flux_form: str = "face_average"
    polish: bool = True

    def __post_init__(self):
        errs = []
        if not (self.tau > 0 and math.isfinite(self.tau)):
            errs.append("tau must be positive")
        if not self.eps >= 0:
            errs.append("eps must be nonnegative")
        if not self.newton_tol > 0:
            errs.append("newton_tol must be positive")
        if not 0 < self.damping < 1:
            errs.append("damping must lie in (0, 1)")
        if self.newton_max_iter < 1 or self.max_halvings < 0 or self.max_fallbacks < 0:
            errs.append("iteration limits must be nonnegative")
        if self.flux_form not in ("face_average", "entropy"):
            errs.append("flux_form must be 'face_average' or 'entropy'")
        if errs:
            raise ConfigurationError("; ".join(errs))


@dataclass
class StepStats:
    newton_iters: int = 0
    damping_events: int = 0
    fallbacks: int = 0
    eps_used: float = 0.0
    substeps: int = 1
    seed_clamps: int = 0
    residual: float = math.nan


@dataclass
class Trajectory:
    """Output of :func:`run`; snapshots are ``(t, values)`` pairs."""

    grid: Grid1D
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    stats: list = field(default_factory=list)
    final: StateField | None = None
    final_w: np.ndarray | None = None
    completed: bool = True

    @property
    def steps(self):
        return len(self.stats)


def _as_values(u):
    return u.values if isinstance(u, StateField) else np.asarray(u, dtype=float)


# ---------------------------------------------------------------------------
# Spatial operator


def face_flux(model, u_left, u_right, dx):
    """``F = -A(u_bar)(u_right - u_left)/dx`` with ``u_bar`` the face average.

    Works on single states ``(n,)`` or batches ``(n, K)`` of faces.
    """
    ul = np.asarray(u_left, dtype=float)
    ur = np.asarray(u_right, dtype=float)
    A = model.eval_A(0.5 * (ul + ur))
    return -np.einsum("ij...,j...->i...", A, ur - ul) / dx


def interior_fluxes(model, u, dx, em=None, form="face_average"):
    """Fluxes on the ``M - 1`` interior faces; boundary faces carry zero."""
    if u.shape[1] < 2:
        return np.zeros((u.shape[0], 0))
    if form == "entropy":
        ubar = 0.5 * (u[:, 1:] + u[:, :-1])
        w = em.grad(u)
        B = np.einsum("ij...,jk...->ik...", model.eval_A(ubar), em.inv_hess(ubar))
        return -np.einsum("ij...,j...->i...", B, w[:, 1:] - w[:, :-1]) / dx
    return face_flux(model, u[:, :-1], u[:, 1:], dx)


def _divergence(F, M):
    n = F.shape[0]
    full = np.zeros((n, M + 1))
    full[:, 1:M] = F
    return full[:, 1:] - full[:, :-1]


def neumann_laplacian(w, dx):
    """Three-point Laplacian with mirrored ghost cells."""
    padded = np.concatenate([w[:, :1], w, w[:, -1:]], axis=1)
    return (padded[:, 2:] - 2 * w + padded[:, :-2]) / dx**2


def _residual_from_u(model, em, w, u, u_old, tau, eps, dx, form):
    M = u.shape[1]
    R = u - u_old + (tau / dx) * _divergence(interior_fluxes(model, u, dx, em, form), M)
    if model.has_reaction:
        R = R - tau * model.eval_f(u)
    if eps:
        R = R + tau * eps * (w - neumann_laplacian(w, dx))
    return R


def residual(model, em, w, u_old, cfg, grid=None):
    """Discrete implicit Euler residual in entropy variables, shape ``(n, M)``.

    ``R_k = u(w)_k - u_old_k + (tau/dx)(F_{k+1/2} - F_{k-1/2}) - tau f(u(w)_k)
    + tau eps (w_k - (Lap w)_k)``. The flux sign follows ``F = -A grad u``
    so that the update is ``u_t = -dF/dx``.
    """
    grid = grid if grid is not None else u_old.grid
    w = np.asarray(w, dtype=float)
    u = invert_grad(em, w)
    return _residual_from_u(model, em, w, u, _as_values(u_old), cfg.tau, cfg.eps,
                            grid.dx, cfg.flux_form)


# ---------------------------------------------------------------------------
# Jacobian


def _dA(model, ubar):
    """Forward-difference partials ``dA/du_j`` at each face, shape ``(n, n, n, K)``."""
    A0 = model.eval_A(ubar)
    n = ubar.shape[0]
    out = np.empty((n,) + A0.shape)
    for j in range(n):
        h = 1.5e-8 * np.maximum(np.abs(ubar[j]), 1.0)
        up = ubar.copy()
        up[j] += h
        out[j] = (model.eval_A(up) - A0) / h
    return A0, out


def _df(model, u):
    f0 = model.eval_f(u)
    n = u.shape[0]
    out = np.empty((n, n) + u.shape[1:])
    for j in range(n):
        h = 1.5e-8 * np.maximum(np.abs(u[j]), 1.0)
        up = u.copy()
        up[j] += h
        out[:, j] = (model.eval_f(up) - f0) / h
    return out


def jacobian_blocks(model, em, w, u, tau, eps, dx):
    """Blocks of ``dR/dw`` for the face-average flux.

    Returns ``(diag, lower, upper)`` of shapes ``(M, n, n)``,
    ``(M-1, n, n)`` and ``(M-1, n, n)``.
    """
    n, M = u.shape
    eye = np.eye(n)
    # dR_k/du_l before the chain rule through du/dw
    dd = np.broadcast_to(eye, (M, n, n)).copy()
    lo = np.zeros((max(M - 1, 0), n, n))
    up = np.zeros((max(M - 1, 0), n, n))
    if M > 1:
        ubar = 0.5 * (u[:, 1:] + u[:, :-1])
        du = u[:, 1:] - u[:, :-1]
        A, dA = _dA(model, ubar)
        A = np.moveaxis(A, -1, 0)  # (K, n, n)
        G = np.einsum("jikf,kf->fij", dA, du)  # G[f, i, j] = sum_k dA_ik/du_j du_k
        dF_right = (-A - 0.5 * G) / dx  # dF_{f}/du_{f+1}
        dF_left = (A - 0.5 * G) / dx  # dF_{f}/du_{f}
        c = tau / dx
        dd[:-1] += c * dF_left  # face k+1/2 seen from cell k
        dd[1:] -= c * dF_right  # face k-1/2 seen from cell k
        up[:] = c * dF_right
        lo[:] = -c * dF_left
    if model.has_reaction:
        dd -= tau * np.moveaxis(_df(model, u), -1, 0)
    P = np.moveaxis(em.inv_hess(u), -1, 0)  # du/dw per cell
    dd = dd @ P
    if M > 1:
        up = up @ P[1:]
        lo = lo @ P[:-1]
    if eps:
        k = tau * eps / dx**2
        deg = np.full(M, 2.0)
        deg[0] = deg[-1] = 1.0 if M > 1 else 0.0
        dd += (tau * eps + k * deg)[:, None, None] * eye
        if M > 1:
            up -= k * eye
            lo -= k * eye
    return dd, lo, up


def fd_jacobian_blocks(model, em, w, u_old, tau, eps, dx, form="face_average"):
    """Colored forward-difference Jacobian of the residual in ``w``.

    Perturbs every third cell at once, so the cost is ``3 n`` residual
    evaluations. Used for the entropy flux form and as a test oracle.
    """
    n, M = w.shape
    u = invert_grad(em, w)
    R0 = _residual_from_u(model, em, w, u, u_old, tau, eps, dx, form)
    dd = np.zeros((M, n, n))
    lo = np.zeros((max(M - 1, 0), n, n))
    up = np.zeros((max(M - 1, 0), n, n))
    for color in range(min(3, M)):
        cells = np.arange(color, M, 3)
        for j in range(n):
            h = 1.5e-8 * np.maximum(np.abs(w[j, cells]), 1.0)
            wp = w.copy()
            wp[j, cells] += h
            up_u = invert_grad(em, wp)
            dR = (_residual_from_u(model, em, wp, up_u, u_old, tau, eps, dx, form) - R0)
            hc = np.zeros(M)
            hc[cells] = h
            for k in cells:
                dd[k, :, j] = dR[:, k] / hc[k]
                if k + 1 < M:
                    lo[k, :, j] = dR[:, k + 1] / hc[k]
                if k > 0:
                    up[k - 1, :, j] = dR[:, k - 1] / hc[k]
    return dd, lo, up


def assemble_dense(diag, lower, upper):
    """Dense matrix from blocks, for tests and small problems."""
    M, n = diag.shape[0], diag.shape[1]
    J = np.zeros((M * n, M * n))
    for k in range(M):
        J[k * n:(k + 1) * n, k * n:(k + 1) * n] = diag[k]
        if k + 1 < M:
            J[k * n:(k + 1) * n, (k + 1) * n:(k + 2) * n] = upper[k]
            J[(k + 1) * n:(k + 2) * n, k * n:(k + 1) * n] = lower[k]
    return J


# ---------------------------------------------------------------------------
# Newton


def _try_residual(model, em, w, u_old, tau, eps, dx, form):
    try:
        u = invert_grad(em, w)
    except NumericalError:
        return None, None
    R = _residual_from_u(model, em, w, u, u_old, tau, eps, dx, form)
    if not np.all(np.isfinite(R)):
        return None, None
    return u, R


def newton_solve(model, em, w0, u_old, tau, eps, dx, cfg, stats):
    """Damped Newton iteration; returns ``(w, u)`` or raises ``NumericalError``."""
    n, M = w0.shape
    bw = 2 * n - 1
    w = w0
    u, R = _try_residual(model, em, w, u_old, tau, eps, dx, cfg.flux_form)
    if R is None:
        raise NumericalError("initial iterate is not admissible")
    norm = np.linalg.norm(R)
    polished = False
    for it in range(cfg.newton_max_iter + 1):
        rmax = float(np.max(np.abs(R)))
        stats.residual = rmax
        if rmax <= cfg.newton_tol and (polished or not cfg.polish or rmax == 0.0):
            return w, u
        if it == cfg.newton_max_iter:
            break
        if cfg.flux_form == "entropy":
            blocks = fd_jacobian_blocks(model, em, w, u_old, tau, eps, dx, cfg.flux_form)
        else:
            blocks = jacobian_blocks(model, em, w, u, tau, eps, dx)
        try:
            step = solve_banded((bw, bw), block_tridiag_banded(*blocks),
                                -R.T.reshape(-1), check_finite=False)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericalError(f"singular Newton matrix: {exc}", residual=rmax) from exc
        dw = step.reshape(M, n).T
        if not np.all(np.isfinite(dw)):
            raise NumericalError("non-finite Newton update", residual=rmax)
        stats.newton_iters += 1
        if rmax <= cfg.newton_tol:
            # one extra full step once converged keeps mass drift at roundoff
            wt = w + dw
            ut, Rt = _try_residual(model, em, wt, u_old, tau, eps, dx, cfg.flux_form)
            polished = True
            if Rt is not None and np.max(np.abs(Rt)) <= rmax:
                w, u, R = wt, ut, Rt
            continue
        lam = 1.0
        for _ in range(cfg.max_halvings + 1):
            wt = w + lam * dw
            ut, Rt = _try_residual(model, em, wt, u_old, tau, eps, dx, cfg.flux_form)
            if Rt is not None:
                nt = np.linalg.norm(Rt)
                if nt <= (1.0 - 1e-4 * lam) * norm or nt == 0.0:
                    break
            lam *= cfg.damping
            stats.damping_events += 1
        else:
            raise NumericalError("line search exhausted", residual=rmax)
        w, u, R, norm = wt, ut, Rt, nt
    raise NumericalError(f"Newton did not converge in {cfg.newton_max_iter} iterations",
                         residual=float(np.max(np.abs(R))))


def _seed(em, u_old):
    clamped = em.domain.clamp_interior(u_old, SEED_MARGIN)
    count = int(np.count_nonzero(np.any(clamped != u_old, axis=0)))
    return em.grad(clamped), count


def step(model, em, u_old, cfg, w_old=None):
    """Advance one implicit Euler step of size ``cfg.tau``.

    On Newton failure the step is retried as ``2**k`` substeps with
    ``eps = max(cfg.eps, cfg.fallback_eps)`` for ``k = 1..max_fallbacks``.

    Returns
    -------
    (StateField, ndarray, StepStats)
    """
    if em.n != model.n or u_old.n != model.n:
        raise ConfigurationError("model, entropy and state disagree on the species count")
    grid = u_old.grid
    stats = StepStats(eps_used=cfg.eps)
    uo = u_old.values
    if w_old is None:
        w0, stats.seed_clamps = _seed(em, uo)
    else:
        w0 = w_old
    try:
        w, u = newton_solve(model, em, w0, uo, cfg.tau, cfg.eps, grid.dx, cfg, stats)
        return StateField(u, grid), w, stats
    except NumericalError as exc:
        last = exc
        log.info("Newton failed (%s); entering fallback", exc)
    eps = max(cfg.eps, cfg.fallback_eps)
    for k in range(1, cfg.max_fallbacks + 1):
        stats.fallbacks = k
        stats.eps_used = eps
        sub = 2**k
        stats.substeps = sub
        tau = cfg.tau / sub
        try:
            cur, wcur = uo, None
            for _ in range(sub):
                if wcur is None:
                    wcur, c = _seed(em, cur)
                    stats.seed_clamps += c
                wcur, cur = newton_solve(model, em, wcur, cur, tau, eps, grid.dx, cfg, stats)
            return StateField(cur, grid), wcur, stats
        except NumericalError as exc:
            last = exc
    raise StepFailure(f"step failed after {cfg.max_fallbacks} fallbacks: {last}",
                      getattr(last, "residual", None), stats)


def run(model, em, u0, T, cfg, callbacks=(), snapshot_stride=1):
    """Integrate to time ``T`` with ``ceil(T/tau)`` accepted steps.

    The last step is shortened so the trajectory ends exactly at ``T``.
    Each callback is called as ``cb(k, t, field, w, stats)`` after every
    accepted step. On failure the partial trajectory is attached to the
    raised :class:`StepFailure` as ``.trajectory``.
    """
    if not T >= 0:
        raise ConfigurationError("final time must be nonnegative")
    if snapshot_stride < 1:
        raise ConfigurationError("snapshot_stride must be at least 1")
    if not np.all(model.domain.in_closure(u0.values)):
        raise ConfigurationError("initial state lies outside the closure of the domain")
    traj = Trajectory(u0.grid)
    traj.times.append(0.0)
    traj.snapshots.append((0.0, u0.values.copy()))
    nsteps = int(math.ceil(T / cfg.tau - 1e-9)) if T > 0 else 0
    cur, w, t = u0, None, 0.0
    for k in range(1, nsteps + 1):
        tau = min(cfg.tau, T - t) if k == nsteps else cfg.tau
        c = cfg if tau == cfg.tau else replace(cfg, tau=tau)
        try:
            cur, w, st = step(model, em, cur, c, w_old=w)
        except StepFailure as exc:
            traj.completed = False
            traj.final, traj.final_w = cur, w
            exc.trajectory = traj
            raise
        t = cfg.tau * k if k < nsteps else T
        traj.times.append(t)
        traj.stats.append(st)
        for cb in callbacks:
            cb(k, t, cur, w, st)
        if k % snapshot_stride == 0 or k == nsteps:
            traj.snapshots.append((t, cur.values.copy()))
    traj.final, traj.final_w = cur, w
    return traj


# ---------------------------------------------------------------------------
# CSV


def format_float(x):
    return format(float(x), ".17g")


def snapshot_rows(snapshots, grid, extra=None):
    """Yield ``t,x,u1..un`` rows (plus trailing ``extra`` columns)."""
    x = grid.centers
    for t, vals in snapshots:
        for k in range(grid.M):
            row = [format_float(t), format_float(x[k])] + [format_float(v) for v in vals[:, k]]
            if extra is not None:
                row += list(extra)
            yield ",".join(row)


def snapshot_header(n, extra=()):
    return ",".join(["t", "x"] + [f"u{i + 1}" for i in range(n)] + list(extra))


STATS_HEADER = "step,t,newton_iters,damping,fallbacks,eps_used"


def stats_rows(traj):
    for k, (t, st) in enumerate(zip(traj.times[1:], traj.stats), start=1):
        yield ",".join([str(k), format_float(t), str(st.newton_iters), str(st.damping_events),
                        str(st.fallbacks), format_float(st.eps_used)])
