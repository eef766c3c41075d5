"""Hot numeric kernels with numba and pure-numpy implementations.

Each public function dispatches on :func:`entroflux._accel.backend`. Both
paths compute the same thing; the numpy twin is vectorized over cells while
the numba twin loops per cell.
"""

import math

import numpy as np

from ._accel import backend, njit

BISECTION_STEPS = 80
NEWTON_POLISH = 30
POLISH_TOL = 1e-14


# ---------------------------------------------------------------------------
# Volume-filling inverse: solve (e^w1 + e^w2) q(v) = 1 - v for the free
# fraction v = e^t in (0, 1), with q(v) = k v^s.


@njit
def _vf_power_invert_nb(w, s, logk):
    m = w.shape[1]
    u = np.empty((2, m))
    for j in range(m):
        w1 = w[0, j]
        w2 = w[1, j]
        mx = max(w1, w2)
        e1 = math.exp(w1 - mx)
        e2 = math.exp(w2 - mx)
        lse = mx + math.log(e1 + e2)
        c = lse + logk
        lo = min(-745.0, -c / s - 10.0)
        hi = 0.0
        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            psi = math.log1p(-math.exp(mid)) - c - s * mid
            if psi > 0.0:
                lo = mid
            else:
                hi = mid
        t = 0.5 * (lo + hi)
        for _ in range(NEWTON_POLISH):
            et = math.exp(t)
            psi = math.log1p(-et) - c - s * t
            dpsi = -et / (1.0 - et) - s
            tn = t - psi / dpsi
            if not (lo <= tn <= hi):
                tn = 0.5 * (lo + hi)
            if psi > 0.0:
                lo = t
            else:
                hi = t
            done = abs(tn - t) <= POLISH_TOL * max(1.0, abs(t))
            t = tn
            if done:
                break
        free = -math.expm1(t)
        u[0, j] = e1 / (e1 + e2) * free
        u[1, j] = e2 / (e1 + e2) * free
    return u


def _vf_power_invert_np(w, s, logk):
    mx = np.max(w, axis=0)
    e = np.exp(w - mx)
    se = e.sum(axis=0)
    c = mx + np.log(se) + logk
    lo = np.minimum(-745.0, -c / s - 10.0)
    hi = np.zeros_like(lo)
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        with np.errstate(divide="ignore"):
            psi = np.log1p(-np.exp(mid)) - c - s * mid
        pos = psi > 0.0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    t = 0.5 * (lo + hi)
    for _ in range(NEWTON_POLISH):
        et = np.exp(t)
        psi = np.log1p(-et) - c - s * t
        dpsi = -et / (1.0 - et) - s
        tn = t - psi / dpsi
        tn = np.where((tn >= lo) & (tn <= hi), tn, 0.5 * (lo + hi))
        pos = psi > 0.0
        lo = np.where(pos, t, lo)
        hi = np.where(pos, hi, t)
        done = np.abs(tn - t) <= POLISH_TOL * np.maximum(1.0, np.abs(t))
        t = tn
        if np.all(done):
            break
    free = -np.expm1(t)
    return e / se * free


def vf_power_invert(w, s, scale=1.0):
    """Inverse entropy gradient for ``q(y) = scale * y**s``; ``w`` has shape ``(2, M)``."""
    w = np.ascontiguousarray(w, dtype=float)
    if backend() == "numba":
        return _vf_power_invert_nb(w, float(s), math.log(scale))
    return _vf_power_invert_np(w, float(s), math.log(scale))


def vf_generic_invert(w, q):
    """Same fixed point for an arbitrary vectorized ``q`` (numpy only)."""
    w = np.asarray(w, dtype=float)
    mx = np.max(w, axis=0)
    e = np.exp(w - mx)
    se = e.sum(axis=0)
    lse = mx + np.log(se)

    def psi(t):
        with np.errstate(divide="ignore"):
            return np.log1p(-np.exp(t)) - lse - np.log(q(np.exp(t)))

    lo = np.full_like(lse, -50.0)
    for _ in range(64):
        bad = ~(psi(lo) > 0.0)
        if not np.any(bad):
            break
        lo = np.where(bad, 2.0 * lo, lo)
    hi = np.zeros_like(lo)
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        pos = psi(mid) > 0.0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    t = 0.5 * (lo + hi)
    for _ in range(NEWTON_POLISH):
        et = np.exp(t)
        val = psi(t)
        dval = -et / (1.0 - et) - et * q.derivative(et) / q(et)
        tn = t - val / dval
        tn = np.where((tn >= lo) & (tn <= hi), tn, 0.5 * (lo + hi))
        pos = val > 0.0
        lo = np.where(pos, t, lo)
        hi = np.where(pos, hi, t)
        done = np.abs(tn - t) <= POLISH_TOL * np.maximum(1.0, np.abs(t))
        t = tn
        if np.all(done):
            break
    return e / se * (-np.expm1(t))


# ---------------------------------------------------------------------------
# Separable power entropy with logarithmic regularization: solve
# kappa*s/(s-1) (u^(s-1) - c^(s-1)) + eps*log(u) = w for u = e^t.


@njit
def _pow_invert_nb(w, kappa, s, c, eps):
    out = np.empty(w.shape[0])
    g0 = kappa * s / (s - 1.0)
    cs = c ** (s - 1.0)
    for j in range(w.shape[0]):
        target = w[j]
        lo = -1.0
        hi = 1.0
        for _ in range(200):
            if g0 * (math.exp((s - 1.0) * lo) - cs) + eps * lo - target < 0.0:
                break
            lo *= 2.0
        for _ in range(200):
            if g0 * (math.exp((s - 1.0) * hi) - cs) + eps * hi - target > 0.0:
                break
            hi *= 2.0
        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            if g0 * (math.exp((s - 1.0) * mid) - cs) + eps * mid - target > 0.0:
                hi = mid
            else:
                lo = mid
        t = 0.5 * (lo + hi)
        for _ in range(NEWTON_POLISH):
            ex = math.exp((s - 1.0) * t)
            phi = g0 * (ex - cs) + eps * t - target
            dphi = g0 * (s - 1.0) * ex + eps
            tn = t - phi / dphi
            if not (lo <= tn <= hi):
                tn = 0.5 * (lo + hi)
            if phi > 0.0:
                hi = t
            else:
                lo = t
            done = abs(tn - t) <= POLISH_TOL * max(1.0, abs(t))
            t = tn
            if done:
                break
        out[j] = math.exp(t)
    return out


def _pow_invert_np(w, kappa, s, c, eps):
    g0 = kappa * s / (s - 1.0)
    cs = c ** (s - 1.0)

    def phi(t):
        with np.errstate(over="ignore"):
            return g0 * (np.exp((s - 1.0) * t) - cs) + eps * t - w

    lo = np.full_like(w, -1.0)
    hi = np.full_like(w, 1.0)
    for _ in range(200):
        bad = phi(lo) >= 0.0
        if not np.any(bad):
            break
        lo = np.where(bad, 2.0 * lo, lo)
    for _ in range(200):
        bad = phi(hi) <= 0.0
        if not np.any(bad):
            break
        hi = np.where(bad, 2.0 * hi, hi)
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        pos = phi(mid) > 0.0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
    t = 0.5 * (lo + hi)
    for _ in range(NEWTON_POLISH):
        ex = np.exp((s - 1.0) * t)
        val = phi(t)
        tn = t - val / (g0 * (s - 1.0) * ex + eps)
        tn = np.where((tn >= lo) & (tn <= hi), tn, 0.5 * (lo + hi))
        pos = val > 0.0
        hi = np.where(pos, t, hi)
        lo = np.where(pos, lo, t)
        done = np.abs(tn - t) <= POLISH_TOL * np.maximum(1.0, np.abs(t))
        t = tn
        if np.all(done):
            break
    return np.exp(t)


def power_log_invert(w, kappa, s, c, eps):
    """Scalar inverse of the regularized power entropy gradient (``eps > 0``)."""
    w = np.asarray(w, dtype=float)
    flat = np.ascontiguousarray(w.ravel())
    if backend() == "numba":
        out = _pow_invert_nb(flat, float(kappa), float(s), float(c), float(eps))
    else:
        out = _pow_invert_np(flat, float(kappa), float(s), float(c), float(eps))
    return out.reshape(w.shape)


# ---------------------------------------------------------------------------
# Lattice master equation with p_i = a_i0 + a_i1 u1^ps + a_i2 u2^ps and
# q_i(y) = k_i y^r_i. Reflecting ends: no hops across the outer faces.


@njit
def _lattice_rhs_nb(u, pc, ps, qk, qr, sigma0, out):
    n_cells = u.shape[1]
    p = np.empty((2, n_cells))
    q = np.empty((2, n_cells))
    for k in range(n_cells):
        a = u[0, k]
        b = u[1, k]
        y = 1.0 - a - b
        if y < 0.0:
            y = 0.0
        for i in range(2):
            p[i, k] = pc[i, 0] + pc[i, 1] * a ** ps + pc[i, 2] * b ** ps
            q[i, k] = qk[i] * y ** qr[i]
    for i in range(2):
        for k in range(n_cells):
            out[i, k] = 0.0
        for k in range(n_cells - 1):
            flux = sigma0 * (p[i, k] * q[i, k + 1] * u[i, k] - p[i, k + 1] * q[i, k] * u[i, k + 1])
            out[i, k] -= flux
            out[i, k + 1] += flux
    return out


def _lattice_rhs_np(u, pc, ps, qk, qr, sigma0, out):
    a, b = u[0], u[1]
    y = np.maximum(1.0 - a - b, 0.0)
    p = pc[:, :1] + pc[:, 1:2] * a**ps + pc[:, 2:3] * b**ps
    q = qk[:, None] * y[None, :] ** qr[:, None]
    flux = sigma0 * (p[:, :-1] * q[:, 1:] * u[:, :-1] - p[:, 1:] * q[:, :-1] * u[:, 1:])
    out[:] = 0.0
    out[:, :-1] -= flux
    out[:, 1:] += flux
    return out


def lattice_rhs_kernel(u, pc, ps, qk, qr, sigma0):
    u = np.ascontiguousarray(u, dtype=float)
    out = np.empty_like(u)
    fn = _lattice_rhs_nb if backend() == "numba" else _lattice_rhs_np
    return fn(u, np.asarray(pc, float), float(ps), np.asarray(qk, float),
              np.asarray(qr, float), float(sigma0), out)


@njit
def _lattice_rk4_nb(u, pc, ps, qk, qr, sigma0, dt, nsteps):
    k1 = np.empty_like(u)
    k2 = np.empty_like(u)
    k3 = np.empty_like(u)
    k4 = np.empty_like(u)
    for _ in range(nsteps):
        _lattice_rhs_nb(u, pc, ps, qk, qr, sigma0, k1)
        _lattice_rhs_nb(u + 0.5 * dt * k1, pc, ps, qk, qr, sigma0, k2)
        _lattice_rhs_nb(u + 0.5 * dt * k2, pc, ps, qk, qr, sigma0, k3)
        _lattice_rhs_nb(u + dt * k3, pc, ps, qk, qr, sigma0, k4)
        u = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return u


def _lattice_rk4_np(u, pc, ps, qk, qr, sigma0, dt, nsteps):
    k = [np.empty_like(u) for _ in range(4)]
    for _ in range(nsteps):
        _lattice_rhs_np(u, pc, ps, qk, qr, sigma0, k[0])
        _lattice_rhs_np(u + 0.5 * dt * k[0], pc, ps, qk, qr, sigma0, k[1])
        _lattice_rhs_np(u + 0.5 * dt * k[1], pc, ps, qk, qr, sigma0, k[2])
        _lattice_rhs_np(u + dt * k[2], pc, ps, qk, qr, sigma0, k[3])
        u = u + (dt / 6.0) * (k[0] + 2.0 * k[1] + 2.0 * k[2] + k[3])
    return u


def lattice_rk4(u, pc, ps, qk, qr, sigma0, dt, nsteps):
    """Advance the lattice ODE by ``nsteps`` classical RK4 steps."""
    u = np.ascontiguousarray(u, dtype=float)
    fn = _lattice_rk4_nb if backend() == "numba" else _lattice_rk4_np
    return fn(u, np.asarray(pc, float), float(ps), np.asarray(qk, float),
              np.asarray(qr, float), float(sigma0), float(dt), int(nsteps))


# ---------------------------------------------------------------------------
# Block-tridiagonal to LAPACK banded storage


@njit
def _banded_nb(diag, lower, upper, ab):
    M, n = diag.shape[0], diag.shape[1]
    bw = 2 * n - 1
    for k in range(M):
        for i in range(n):
            r = k * n + i
            for j in range(n):
                c = k * n + j
                ab[bw + r - c, c] = diag[k, i, j]
                if k + 1 < M:
                    c = (k + 1) * n + j
                    ab[bw + r - c, c] = upper[k, i, j]
                if k > 0:
                    c = (k - 1) * n + j
                    ab[bw + r - c, c] = lower[k - 1, i, j]
    return ab


def _banded_np(diag, lower, upper, ab):
    M, n = diag.shape[0], diag.shape[1]
    bw = 2 * n - 1
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    k = np.arange(M)[:, None, None]
    r = k * n + i
    ab[bw + r - (k * n + j), k * n + j] = diag
    if M > 1:
        ab[bw + r[:-1] - ((k[:-1] + 1) * n + j), (k[:-1] + 1) * n + j] = upper
        ab[bw + r[1:] - ((k[1:] - 1) * n + j), (k[1:] - 1) * n + j] = lower
    return ab


def block_tridiag_banded(diag, lower, upper):
    """Pack blocks into ``(4n - 1, M n)`` banded storage for ``solve_banded``.

    ``diag[k]`` couples cell ``k`` to itself, ``upper[k]`` row cell ``k`` to
    cell ``k + 1`` and ``lower[k]`` row cell ``k + 1`` to cell ``k``.
    """
    M, n = diag.shape[0], diag.shape[1]
    ab = np.zeros((4 * n - 1, M * n))
    fn = _banded_nb if backend() == "numba" else _banded_np
    return fn(np.ascontiguousarray(diag), np.ascontiguousarray(lower),
              np.ascontiguousarray(upper), ab)
