import numpy as np
import pytest

from entroflux import ConfigurationError
from entroflux.models import (MODEL_NAMES, PowerLaw, ScalarFunction, StateDomain, build_model,
                              make_burger_ion, make_electron_hole, make_keller_segel_like,
                              make_maxwell_stefan, make_power_population, make_skt, make_tumor,
                              make_volume_filling, orthant, simplex)


def test_maxwell_stefan_frozen_matrix():
    A = make_maxwell_stefan(3, 2, 1).eval_A(np.array([0.25, 0.25]))
    expected = np.array([[1.5, 0.25], [0.5, 2.25]]) / 3.25
    np.testing.assert_allclose(A, expected, rtol=1e-14)
    np.testing.assert_allclose(A, [[0.461538, 0.076923], [0.153846, 0.692308]], atol=5e-7)


def test_maxwell_stefan_equal_diffusivities_is_identity():
    u = simplex(2).sample(50, seed=1)
    A = make_maxwell_stefan(1, 1, 1).eval_A(u)
    np.testing.assert_allclose(A, np.broadcast_to(np.eye(2)[:, :, None], A.shape), atol=1e-15)


@pytest.mark.parametrize("bad", [(0, 1, 1), (1, -1, 1), (1, 1, 0)])
def test_maxwell_stefan_rejects_nonpositive(bad):
    with pytest.raises(ConfigurationError):
        make_maxwell_stefan(*bad)


def test_volume_filling_frozen_matrices():
    A = make_volume_filling(PowerLaw(1.0), 1.0).eval_A(np.array([0.25, 0.25]))
    np.testing.assert_allclose(A, [[0.75, 0.25], [0.25, 0.75]], rtol=1e-15)
    A = make_volume_filling(PowerLaw(2.0), 1.0).eval_A(np.array([0.0, 0.0]))
    np.testing.assert_allclose(A, np.eye(2), atol=1e-15)


def test_volume_filling_requires_vanishing_q():
    with pytest.raises(ConfigurationError):
        make_volume_filling(ScalarFunction(lambda y: 1.0 + y, lambda y: np.ones_like(y)), 1.0)


def test_volume_filling_checks_derivative():
    with pytest.raises(ConfigurationError):
        make_volume_filling(ScalarFunction(lambda y: y**2, lambda y: np.ones_like(y)), 1.0)


def test_skt_frozen_matrix():
    A = make_skt(np.ones((2, 3))).eval_A(np.array([1.0, 1.0]))
    np.testing.assert_allclose(A, [[4, 1], [1, 4]])


def test_skt_decoupled_when_cross_terms_vanish():
    a = np.array([[1.0, 0.5, 0.0], [1.0, 0.0, 0.5]])
    A = make_skt(a).eval_A(orthant(2).sample(20, seed=2))
    assert np.all(A[0, 1] == 0) and np.all(A[1, 0] == 0)


def test_power_population_frozen_entries():
    A = make_power_population(np.ones((2, 3)), 2.0).eval_A(np.array([1.0, 0.0]))
    assert A[0, 0] == pytest.approx(4.0)
    assert A[1, 0] == pytest.approx(0.0)


@pytest.mark.parametrize("s", [1.0, 4.0, 0.5])
def test_power_population_rejects_s(s):
    with pytest.raises(ConfigurationError):
        make_power_population(np.ones((2, 3)), s)


def test_skt_rejects_negative_alpha():
    with pytest.raises(ConfigurationError):
        make_skt([[1, -1, 1], [1, 1, 1]])


def test_tumor_quadratic_form_example():
    from entroflux import LogarithmicEntropy
    from entroflux.entropy import product_matrix

    u = np.array([0.25, 0.25])
    z = np.array([1.0, 1.0])
    assert z @ product_matrix(LogarithmicEntropy(2), make_tumor(), u) @ z == pytest.approx(2.5)


def test_electron_hole_limit_identity():
    A = make_electron_hole(1.0, 1.0).eval_A(np.array([1e-14, 1e-14]))
    np.testing.assert_allclose(A, np.eye(2), atol=1e-13)


def test_burger_equal_diffusivities_sum_is_heat_equation():
    m = make_burger_ion([1.0, 1.0, 1.0])
    u = simplex(3).sample(30, seed=5)
    col_sums = m.eval_A(u).sum(axis=0)
    # sum_i (A grad u)_i = grad(rho) for every gradient: column sums are one
    np.testing.assert_allclose(col_sums, np.ones_like(col_sums), atol=1e-14)


def test_burger_rejects_bad_shapes():
    with pytest.raises(ConfigurationError):
        make_burger_ion([1.0, 2.0], n=3)
    with pytest.raises(ConfigurationError):
        make_burger_ion([1.0, -1.0])


def test_burger_matches_volume_filling_linear_q():
    u = simplex(2).sample(40, seed=3)
    A = make_burger_ion([1.0, 2.0]).eval_A(u)
    B = make_volume_filling(PowerLaw(1.0), 2.0).eval_A(u)
    np.testing.assert_allclose(A, B, atol=1e-14)


def test_keller_segel_like_matrix():
    A = make_keller_segel_like().eval_A(np.array([0.2, 0.3]))
    np.testing.assert_allclose(A, [[0.8, -0.2], [-0.3, 0.7]])


def test_build_model_knows_every_name():
    for name in MODEL_NAMES:
        m = build_model(name)
        assert m.name == name
        u = m.domain.sample(5)
        assert m.eval_A(u).shape == (m.n, m.n, 5)
        assert np.all(m.eval_f(u) == 0)
    with pytest.raises(ConfigurationError):
        build_model("nope")


def test_domain_membership_and_clamp():
    d = simplex(2)
    u = np.array([[0.5, 0.0, 0.6], [0.4, 0.5, 0.6]])
    np.testing.assert_array_equal(d.contains(u), [True, False, False])
    c = d.clamp_interior(u, 1e-6)
    assert np.all(d.contains(c, 0.0))
    assert np.all(d.margin_to_boundary(c) >= 1e-6 * (1 - 1e-9))
    with pytest.raises(ConfigurationError):
        StateDomain("sphere", 2)


def test_sample_is_deterministic_and_interior():
    for d in (simplex(2), simplex(3), orthant(2)):
        a = d.sample(200, margin=1e-3, seed=9)
        b = d.sample(200, margin=1e-3, seed=9)
        np.testing.assert_array_equal(a, b)
        assert a.shape == (d.n, 200)
        assert np.all(d.contains(a, 0.0))
