"""Compare the numba kernels against their numpy twins.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--size 100000]

Each kernel is warmed up once (JIT compile) before timing; the reported
figure is the best of ``--repeat`` runs. Results of the two backends are
also compared so a speedup never hides a wrong answer.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from entroflux import _accel, kernels
from entroflux.entropy import PopulationPowerEntropy, VolumeFillingEntropy
from entroflux.models import PowerLaw, simplex, volume_filling_transition


def best_of(fn, repeat):
    fn()  # warm-up / compile
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(size):
    u = simplex(2).sample(size, margin=1e-3, seed=7)
    vf = VolumeFillingEntropy(PowerLaw(2.0))
    w_vf = vf.grad(u)
    pp = PopulationPowerEntropy(1.0, 1.0, 2.5, eps=1e-2)
    w_pp = pp.grad(5.0 * u)
    tr = volume_filling_transition(1.0, 2.0)
    n_cells = 256
    x = (np.arange(n_cells) + 0.5) / n_cells
    lat = np.array([0.3 + 0.2 * np.cos(np.pi * x), 0.3 - 0.1 * np.cos(2 * np.pi * x)])
    args = (tr.p_coef, tr.p_power, np.array(tr.q_scale), np.array(tr.q_power))
    h = 1.0 / n_cells
    dt = 0.2 * h * h
    M, n = 4096, 3
    rng = np.random.default_rng(0)
    blocks = (rng.standard_normal((M, n, n)), rng.standard_normal((M - 1, n, n)),
              rng.standard_normal((M - 1, n, n)))
    return {
        "vf_power_invert": lambda: kernels.vf_power_invert(w_vf, 2.0),
        "power_log_invert": lambda: kernels.power_log_invert(w_pp[0], 1.0, 2.5, 1.0, 1e-2),
        "lattice_rk4 (200 steps)": lambda: kernels.lattice_rk4(lat, *args, 1 / h**2, dt, 200),
        "block_tridiag_banded": lambda: kernels.block_tridiag_banded(*blocks),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", type=int, default=100_000)
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        print("numba is not installed; only the numpy backend is available")
        return 1
    print(f"{'kernel':28s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s} {'max diff':>10s}")
    for name, fn in cases(args.size).items():
        res = {}
        for b in ("numba", "numpy"):
            prev = _accel.set_backend(b)
            try:
                res[b] = best_of(fn, args.repeat)
            finally:
                _accel.set_backend(prev)
        (tn, on), (tp, op) = res["numba"], res["numpy"]
        diff = float(np.max(np.abs(on - op)))
        print(f"{name:28s} {1e3 * tn:11.3f} {1e3 * tp:11.3f} {tp / tn:8.1f} {diff:10.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
