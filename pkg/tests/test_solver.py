import dataclasses

import numpy as np
import pytest
from conftest import orthant_ic, simplex_ic
from hypothesis import given
from hypothesis import strategies as st

from entroflux import (ConfigurationError, LogarithmicEntropy, StepFailure, VolumeFillingEntropy,
                       default_entropy, make_maxwell_stefan, make_skt, make_tumor,
                       make_volume_filling)
from entroflux import diagnostics as dg
from entroflux.models import MODEL_NAMES, PowerLaw, build_model
from entroflux.solver import (Grid1D, SolverConfig, StateField, assemble_dense, face_flux,
                              fd_jacobian_blocks, interior_fluxes, jacobian_blocks, residual, run,
                              snapshot_header, snapshot_rows, step)


def _ic(model, grid):
    if model.domain.kind == "orthant":
        return orthant_ic(grid.centers)
    return simplex_ic(grid.centers)


# ---------------------------------------------------------------------------
# fluxes and residual


def test_face_flux_zero_without_gradient():
    u = np.array([0.2, 0.3])
    np.testing.assert_array_equal(face_flux(make_tumor(), u, u, 0.1), [0.0, 0.0])


def test_face_flux_heat_example():
    F = face_flux(make_maxwell_stefan(1, 1, 1), np.array([0.2, 0.2]), np.array([0.4, 0.2]), 1.0)
    np.testing.assert_allclose(F, [-0.2, 0.0], atol=1e-15)


def test_face_flux_volume_filling_example():
    m = make_volume_filling(PowerLaw(1.0), 1.0)
    F = face_flux(m, np.array([0.2, 0.2]), np.array([0.3, 0.3]), 0.1)
    expected = -m.eval_A(np.array([0.25, 0.25])) @ np.array([1.0, 1.0])
    np.testing.assert_allclose(F, expected, rtol=1e-14)
    np.testing.assert_allclose(F, [-1.0, -1.0], rtol=1e-14)


@pytest.mark.parametrize("eps", [0.0, 1e-3])
def test_residual_vanishes_on_constant_state(eps):
    grid = Grid1D(16, 1.0)
    em = LogarithmicEntropy(2)
    u = np.full((2, 16), 0.3)
    R = residual(make_maxwell_stefan(3, 2, 1), em, em.grad(u), StateField(u, grid),
                 SolverConfig(tau=1e-2, eps=eps))
    assert np.max(np.abs(R)) < 1e-15 + eps


@given(st.integers(2, 40), st.integers(0, 2**32 - 1))
def test_property_flux_divergence_telescopes(M, seed):
    grid = Grid1D(M, 1.0)
    m = make_maxwell_stefan(3, 2, 1)
    em = LogarithmicEntropy(2)
    u = m.domain.sample(M, margin=1e-3, seed=seed % 1000)
    R = residual(m, em, em.grad(u), StateField(u, grid), SolverConfig(tau=0.3))
    # with u_old = u only the flux differences remain; they sum to zero
    assert abs(R.sum(axis=1)).max() < 1e-12 * max(1.0, np.abs(R).max())


@pytest.mark.parametrize("name", MODEL_NAMES)
@pytest.mark.parametrize("eps", [0.0, 1e-2])
def test_analytic_jacobian_matches_finite_differences(name, eps):
    m = build_model(name)
    em = default_entropy(m)
    grid = Grid1D(9, 1.0)
    u_old = _ic(m, grid)
    u = 0.97 * u_old + 0.03 * np.roll(u_old, 2, axis=1)
    w = em.grad(u)
    J = assemble_dense(*jacobian_blocks(m, em, w, u, 1e-2, eps, grid.dx))
    Jfd = assemble_dense(*fd_jacobian_blocks(m, em, w, u_old, 1e-2, eps, grid.dx))
    assert np.max(np.abs(J - Jfd)) <= 1e-5 * np.max(np.abs(Jfd))


def test_entropy_flux_form_matches_at_smooth_state():
    m = make_maxwell_stefan(3, 2, 1)
    em = LogarithmicEntropy(2)
    grid = Grid1D(256, 1.0)
    u = simplex_ic(grid.centers)
    u[0] = 0.3 + 0.1 * np.cos(np.pi * grid.centers)
    Fa = interior_fluxes(m, u, grid.dx)
    Fe = interior_fluxes(m, u, grid.dx, em, "entropy")
    assert np.max(np.abs(Fa - Fe)) < 1e-3 * np.max(np.abs(Fa))


# ---------------------------------------------------------------------------
# steps


def test_constant_state_is_stationary():
    grid = Grid1D(16, 1.0)
    m = make_tumor()
    u0 = StateField(np.full((2, 16), 0.25), grid)
    u1, _, stats = step(m, LogarithmicEntropy(2), u0, SolverConfig(tau=1e-2))
    np.testing.assert_allclose(u1.values, u0.values, atol=1e-14)
    assert stats.newton_iters <= 1


def test_maxwell_stefan_step_decreases_entropy():
    grid = Grid1D(64, 1.0)
    m = make_maxwell_stefan(3, 2, 1)
    em = LogarithmicEntropy(2)
    x = grid.centers
    u0 = StateField(np.array([0.8 * (x < 0.5) + 0.1, np.full_like(x, 0.1)]), grid)
    u1, _, _ = step(m, em, u0, SolverConfig(tau=1e-3))
    assert dg.entropy_functional(em, u1) <= dg.entropy_functional(em, u0) + 1e-8


def test_volume_filling_corner_stays_inside():
    grid = Grid1D(64, 1.0)
    m = make_volume_filling(PowerLaw(3.0), 2.0)
    em = VolumeFillingEntropy(PowerLaw(3.0))
    x = grid.centers
    u0 = StateField(np.array([np.where(x < 0.3, 0.899, 0.2), np.full_like(x, 0.1)]), grid)
    traj = run(m, em, u0, 0.05, SolverConfig(tau=1e-3))
    for _, v in traj.snapshots[1:]:
        assert np.all(v > 0) and np.all(v < 1) and np.all(v.sum(axis=0) < 1)


def test_zero_time_gives_initial_snapshot_only():
    grid = Grid1D(8, 1.0)
    u0 = StateField(simplex_ic(grid.centers), grid)
    traj = run(make_tumor(), LogarithmicEntropy(2), u0, 0.0, SolverConfig(tau=1e-2))
    assert traj.steps == 0 and len(traj.snapshots) == 1
    np.testing.assert_array_equal(traj.snapshots[0][1], u0.values)


def test_run_ends_exactly_at_final_time():
    grid = Grid1D(8, 1.0)
    u0 = StateField(simplex_ic(grid.centers), grid)
    traj = run(make_tumor(), LogarithmicEntropy(2), u0, 0.025, SolverConfig(tau=1e-2))
    assert traj.steps == 3 and traj.times[-1] == 0.025


def test_tumor_mass_conservation():
    grid = Grid1D(128, 1.0)
    m = make_tumor()
    u0 = StateField(np.array([0.3 + 0.1 * np.cos(np.pi * grid.centers),
                              0.3 - 0.1 * np.cos(2 * np.pi * grid.centers)]), grid)
    traj = run(m, LogarithmicEntropy(2), u0, 1.0, SolverConfig(tau=1e-2))
    drift = np.abs(traj.final.masses() - u0.masses()) / u0.masses()
    assert drift.max() <= 1e-12


def test_entropy_flux_form_conserves_mass():
    grid = Grid1D(32, 1.0)
    m = make_maxwell_stefan(3, 2, 1)
    u0 = StateField(simplex_ic(grid.centers), grid)
    traj = run(m, LogarithmicEntropy(2), u0, 0.02, SolverConfig(tau=1e-2, flux_form="entropy"))
    assert np.max(np.abs(traj.final.masses() - u0.masses())) < 1e-12


def test_skt_relaxes_to_constant_state():
    grid = Grid1D(32, 1.0)
    m = make_skt(np.ones((2, 3)))
    em = default_entropy(m)
    from entroflux.initial import build_initial

    u0 = StateField(build_initial("perturbed_constant", {"value": [1.0, 1.0], "amplitude": 0.2},
                                  grid, m.domain, seed=3), grid)
    rec = dg.DiagnosticsRecorder(em, m, u0)
    traj = run(m, em, u0, 1.0, SolverConfig(tau=2e-2), [rec])
    H = rec.series("H_star")
    assert np.all(np.diff(H) <= 1e-8)
    assert H[-1] < 1e-3 * H[0]
    assert np.max(np.abs(traj.final.values - dg.steady_state(traj.final)[:, None])) < 1e-2


def test_regularized_run_uses_eps():
    grid = Grid1D(16, 1.0)
    m = make_maxwell_stefan(3, 2, 1)
    u0 = StateField(simplex_ic(grid.centers), grid)
    traj = run(m, LogarithmicEntropy(2), u0, 0.02, SolverConfig(tau=1e-2, eps=1e-4))
    assert all(s.eps_used == 1e-4 for s in traj.stats)


def test_step_failure_carries_partial_trajectory():
    grid = Grid1D(16, 1.0)
    m = make_maxwell_stefan(3, 2, 1)
    u0 = StateField(simplex_ic(grid.centers), grid)
    cfg = SolverConfig(tau=1e-2, newton_max_iter=1, newton_tol=1e-300, max_fallbacks=1)
    with pytest.raises(StepFailure) as info:
        run(m, LogarithmicEntropy(2), u0, 0.05, cfg)
    traj = info.value.trajectory
    assert not traj.completed and traj.steps == 0
    assert info.value.stats.fallbacks == 1


def test_solver_config_validation():
    for bad in ({"tau": 0.0}, {"tau": -1.0}, {"tau": 1.0, "damping": 1.0},
                {"tau": 1.0, "flux_form": "upwind"}, {"tau": 1.0, "eps": -1.0}):
        with pytest.raises(ConfigurationError):
            SolverConfig(**bad)
    cfg = SolverConfig(tau=0.1)
    assert dataclasses.replace(cfg, tau=0.2).tau == 0.2


def test_run_rejects_initial_state_outside_closure():
    grid = Grid1D(4, 1.0)
    u0 = StateField(np.full((2, 4), 0.6), grid)
    with pytest.raises(ConfigurationError):
        run(make_tumor(), LogarithmicEntropy(2), u0, 0.1, SolverConfig(tau=0.1))


def test_closure_initial_state_is_clamped_for_seed_only():
    grid = Grid1D(8, 1.0)
    vals = simplex_ic(grid.centers)
    vals[0, 0] = 0.0
    u0 = StateField(vals, grid)
    traj = run(make_tumor(), LogarithmicEntropy(2), u0, 0.01, SolverConfig(tau=1e-2))
    assert traj.stats[0].seed_clamps > 0
    assert np.all(traj.final.values > 0)


def test_snapshot_rows_format():
    grid = Grid1D(2, 1.0)
    rows = list(snapshot_rows([(0.0, np.array([[0.1, 0.2], [0.3, 0.4]]))], grid))
    assert snapshot_header(2) == "t,x,u1,u2"
    assert rows[0] == "0,0.25,0.10000000000000001,0.29999999999999999"
