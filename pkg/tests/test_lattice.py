import numpy as np
import pytest

from entroflux import ConfigurationError
from entroflux.lattice import (LatticeSystem, cell_averages, coarsen, integrate_lattice,
                               lattice_rhs, macroscopic_matrix, model_from_transition, stable_dt)
from entroflux.models import (PowerLaw, TransitionModel, make_power_population, make_skt,
                              make_volume_filling, orthant, population_transition, simplex,
                              volume_filling_transition)

PLAIN = TransitionModel(np.array([[1.0, 0, 0], [1.0, 0, 0]]))


def test_uniform_state_is_balanced():
    sys = LatticeSystem(PLAIN, np.full((2, 10), 0.2), 0.1)
    np.testing.assert_allclose(lattice_rhs(sys), 0.0, atol=1e-12)


def test_single_hop_at_reflecting_end():
    sys = LatticeSystem(PLAIN, np.array([[0.3, 0, 0], [0, 0, 0]]), 0.5)
    np.testing.assert_allclose(lattice_rhs(sys)[0], sys.sigma0 * np.array([-0.3, 0.3, 0.0]))


def test_full_cell_blocks_arrivals():
    tr = volume_filling_transition(1.0, 1.0)
    sys = LatticeSystem(tr, np.array([[0.2, 0.5, 0.2], [0.2, 0.5, 0.2]]), 0.1)
    rhs = lattice_rhs(sys)
    # only departures from the packed middle cell remain
    assert np.all(rhs[:, 1] < 0)


def test_uniform_trajectory_is_constant():
    sys = LatticeSystem(volume_filling_transition(2.0, 0.5), np.full((2, 16), 0.3), 1 / 16)
    traj = integrate_lattice(sys, 0.01, stable_dt(sys))
    np.testing.assert_allclose(traj.final, sys.state, atol=1e-14)


def test_masses_conserved():
    N = 32
    x = (np.arange(N) + 0.5) / N
    state = np.array([0.3 + 0.2 * np.cos(np.pi * x), 0.3 - 0.1 * np.cos(2 * np.pi * x)])
    sys = LatticeSystem(volume_filling_transition(1.0, 1.0), state, 1 / N)
    traj = integrate_lattice(sys, 0.05, stable_dt(sys))
    m0 = sys.masses()
    for s in traj.states:
        assert np.max(np.abs(sys.masses(s) - m0) / m0) <= 1e-12


def test_dt_above_stability_limit_rejected():
    sys = LatticeSystem(PLAIN, np.full((2, 8), 0.2), 1 / 8)
    with pytest.raises(ValueError):
        integrate_lattice(sys, 0.1, 10 * stable_dt(sys))


def test_inadmissible_state_rejected():
    with pytest.raises(ConfigurationError):
        LatticeSystem(PLAIN, np.array([[0.7], [0.6]]), 0.1)


@pytest.mark.parametrize("s,beta", [(1.0, 1.0), (2.0, 0.5), (3.0, 2.0)])
def test_macroscopic_matrix_volume_filling(s, beta):
    u = simplex(2).sample(200, seed=1)
    A = macroscopic_matrix(volume_filling_transition(s, beta), u)
    np.testing.assert_allclose(A, make_volume_filling(PowerLaw(s), beta).eval_A(u), atol=1e-14)


def test_macroscopic_matrix_linear_rates_reproduce_skt():
    a = np.array([[1.0, 0.5, 2.0], [0.3, 1.5, 0.7]])
    u = orthant(2).sample(1000, seed=2) / 10.0
    np.testing.assert_allclose(macroscopic_matrix(population_transition(a), u),
                               make_skt(a).eval_A(u), rtol=1e-13, atol=1e-14)


def test_macroscopic_matrix_power_rates():
    a = np.ones((2, 3))
    u = orthant(2).sample(100, seed=3) / 10.0
    np.testing.assert_allclose(macroscopic_matrix(population_transition(a, 2.0), u),
                               make_power_population(a, 2.0).eval_A(u), rtol=1e-13)


def test_macroscopic_matrix_pure_diffusion():
    A = macroscopic_matrix(PLAIN, np.array([0.2, 0.3]))
    np.testing.assert_allclose(A, np.eye(2))


def test_model_from_transition():
    assert model_from_transition(volume_filling_transition(2.0, 0.5)).name == "volume_filling"
    assert model_from_transition(population_transition(np.ones((2, 3)))).name == "lattice_limit"


def test_cell_averages_and_coarsen():
    edges = np.linspace(0, 1, 9)
    avg = cell_averages(lambda x: np.array([x**3]), edges)
    exact = (edges[1:] ** 4 - edges[:-1] ** 4) / 4 / np.diff(edges)
    np.testing.assert_allclose(avg[0], exact, rtol=1e-13)
    np.testing.assert_allclose(coarsen(avg, 4)[0], [1 / 32, 15 / 32], rtol=1e-13)
    with pytest.raises(ValueError):
        coarsen(avg, 3)
