"""Command line front end.

``entroflux <job> --config <path> [--out <dir>] [--seed <u64>]``

Exit status is 0 on success, 1 for configuration errors and 2 for numerical
failures (partial outputs are flushed and the manifest is marked failed).
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .config import JOBS, RunConfig, parse_config
from .entropy import build_entropy, certify_H2, certify_H2prime_H2dprime
from .errors import ConfigurationError, DomainError, NumericalError, PreconditionError, StepFailure
from .hypothesis_lab import SCAN_HEADER, eigen_oracle, feasibility_scan, random_params
from .initial import build_initial
from .lattice import diffusive_limit_study
from .models import volume_filling_transition
from .outputs import manifest, write_json, write_lines
from .rng import SplitMix64
from .solver import (STATS_HEADER, Grid1D, SolverConfig, StateField, format_float, run,
                     snapshot_header, snapshot_rows, stats_rows)

log = logging.getLogger("entroflux")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2


def _simulate(cfg: RunConfig, out: Path):
    model = cfg.build_model()
    em = build_entropy(cfg.entropy, model)
    grid = Grid1D(cfg.M, cfg.L)
    u0 = StateField(build_initial(cfg.ic_kind, cfg.ic_params, grid, model.domain, cfg.seed), grid)
    scfg = SolverConfig(tau=cfg.tau, **cfg.solver)
    rec = diag.DiagnosticsRecorder(em, model, u0)
    files, status, failure = [], "ok", None
    try:
        traj = run(model, em, u0, cfg.T, scfg, [rec], cfg.snapshot_stride)
    except StepFailure as exc:
        traj, status, failure = exc.trajectory, "failed", str(exc)
    n = model.n
    write_lines(out / "snapshots.csv", snapshot_header(n), snapshot_rows(traj.snapshots, grid))
    write_lines(out / "steps.csv", STATS_HEADER, stats_rows(traj))
    write_lines(out / "diagnostics.csv", diag.diagnostics_header(n), rec.rows())
    files += ["snapshots.csv", "steps.csv", "diagnostics.csv"]
    last = rec.records[-1]
    m0 = rec.records[0].masses
    summary = {
        "model": model.name, "entropy": em.describe(), "steps": traj.steps,
        "t_final": format_float(last.t), "H_final": format_float(last.H),
        "H_star_final": format_float(last.H_star),
        "max_mass_drift": format_float(np.max(np.abs(last.masses - m0) / np.abs(m0))),
        "entropy_increase_violations": rec.violations,
        "fallback_steps": sum(1 for s in traj.stats if s.fallbacks),
        "seed_clamps": sum(s.seed_clamps for s in traj.stats),
        "min_margin": format_float(min(r.min_margin for r in rec.records)),
    }
    if failure:
        summary["failure"] = failure
    return status, files, summary


def _certify(cfg: RunConfig, out: Path):
    model = cfg.build_model()
    em = build_entropy(cfg.entropy, model)
    c = cfg.certify
    kw = dict(n_samples=c.get("n_samples", 10_000), margin=c.get("margin", 1e-4),
              seed=c.get("seed", cfg.seed))
    rep = certify_H2(em, model, **kw)
    report = {"H2": rep.to_json()}
    if c.get("lower_bound", model.h2prime_meta is not None) and model.h2prime_meta is not None:
        report["H2prime"] = certify_H2prime_H2dprime(em, model, **kw).to_json()
    write_json(out / "certify.json", report)
    return "ok", ["certify.json"], {"verdict": rep.verdict,
                                    "min_eig": format_float(rep.min_sym_eigenvalue)}


def _lattice_compare(cfg: RunConfig, out: Path):
    lc = cfg.lattice
    tr = volume_filling_transition(lc.get("s", 1.0), lc.get("beta", 1.0))
    L = cfg.L
    base = np.array(cfg.ic_params.get("base", [0.3, 0.3]), dtype=float)
    amp = np.array(cfg.ic_params.get("amplitude", [0.15, -0.1]), dtype=float)
    base, amp = np.broadcast_to(base, (2,)), np.broadcast_to(amp, (2,))

    def u0(x):
        modes = np.array([1.0, 2.0])[:, None]
        return base[:, None] + amp[:, None] * np.cos(modes * np.pi * x[None, :] / L)

    hs = lc.get("hs", [1 / 32, 1 / 64, 1 / 128])
    study = diffusive_limit_study(tr, u0, T=lc.get("T", 0.1), hs=hs, L=L,
                                  M_ref=lc.get("M_ref", 512), tau_ref=lc.get("tau_ref", 1e-4))
    rows = []
    for state in study.lattice_states:
        g = Grid1D(state.shape[1], L)
        rows += list(snapshot_rows([(study.T, state)], g, extra=["lattice"]))
    gref = Grid1D(study.reference.shape[1], L)
    rows += list(snapshot_rows([(study.T, study.reference)], gref, extra=["pde"]))
    write_lines(out / "lattice.csv", snapshot_header(2, ["source"]), rows)
    err_rows = [f"{format_float(h)},{format_float(e)}" for h, e in zip(study.hs, study.errors)]
    write_lines(out / "limit_errors.csv", "h,l2_error", err_rows)
    summary = {"errors": [format_float(e) for e in study.errors],
               "orders": [format_float(o) for o in study.orders],
               "decreasing": study.decreasing, "boundary": "reflecting"}
    return "ok", ["lattice.csv", "limit_errors.csv"], summary


def _feasibility(cfg: RunConfig, out: Path):
    fc = cfg.feasibility
    res = fc.get("grid_resolution", 64)
    params = [tuple(p) for p in fc.get("params", [])]
    count = fc.get("random_count", 0 if params else 100)
    rng = SplitMix64(fc.get("random_seed", cfg.seed))
    params += [random_params(rng).as_tuple() for _ in range(count)]
    rows, disagreements, feasible = [], 0, 0
    for p in params:
        r = feasibility_scan(p, res)
        disagreements += int(r.feasible != eigen_oracle(p, res))
        feasible += int(r.feasible)
        rows.append(r.row())
    write_lines(out / "feasibility.csv", SCAN_HEADER, rows)
    return "ok", ["feasibility.csv"], {"scanned": len(params), "feasible": feasible,
                                       "oracle_disagreements": disagreements}


RUNNERS = {"simulate": _simulate, "certify": _certify, "lattice_compare": _lattice_compare,
           "feasibility_scan": _feasibility}


def execute(cfg: RunConfig):
    """Run a parsed configuration; return the exit status."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files, summary = [], {}
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            status, files, summary = RUNNERS[cfg.job](cfg, out)
    except NumericalError as exc:
        status, summary = "failed", {"failure": str(exc)}
    write_json(out / "manifest.json", manifest(cfg.job, status, cfg.sha256, files + ["manifest.json"],
                                               summary, cfg.seed))
    return EXIT_OK if status == "ok" else EXIT_NUMERICAL


def build_parser():
    ap = argparse.ArgumentParser(prog="entroflux",
                                 description="Entropy-variable cross-diffusion simulations.")
    ap.add_argument("job", choices=JOBS)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    ap.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config, job=args.job, seed=args.seed, out_dir=args.out)
    except ConfigurationError as exc:
        print(f"entroflux: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        code = execute(cfg)
    except (ConfigurationError, DomainError, PreconditionError) as exc:
        print(f"entroflux: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if code == EXIT_NUMERICAL:
        print("entroflux: numerical failure, see manifest.json", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
