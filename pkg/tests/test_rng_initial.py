import numpy as np
import pytest

from entroflux import ConfigurationError
from entroflux.initial import build_initial
from entroflux.models import orthant, simplex
from entroflux.rng import SplitMix64
from entroflux.solver import Grid1D


def test_splitmix64_reference_vector():
    rng = SplitMix64(1234567)
    assert [rng.next_u64() for _ in range(3)] == [6457827717110365317, 3203168211198807973,
                                                  9817491932198370423]


def test_splitmix64_uniform_range_and_seed_bounds():
    u = SplitMix64(0).uniforms(1000)
    assert u.min() >= 0 and u.max() < 1
    with pytest.raises(ValueError):
        SplitMix64(2**64)
    SplitMix64(2**64 - 1).next_u64()


def test_initial_kinds():
    g = Grid1D(10, 2.0)
    d = simplex(2)
    assert build_initial("constant", {"value": [0.2, 0.3]}, g, d).shape == (2, 10)
    st = build_initial("step", {"left": 0.4, "right": 0.1}, g, d)
    assert st[0, 0] == 0.4 and st[0, -1] == 0.1
    gb = build_initial("gaussian_bump", {"base": 0.2, "amplitude": 0.1, "center": 1.0}, g, d)
    assert gb[0].argmax() in (4, 5)
    cs = build_initial("cosine", {"base": 0.3, "amplitude": 0.1}, g, d)
    np.testing.assert_allclose(cs.mean(axis=1), 0.3, atol=1e-15)


def test_perturbed_constant_is_seeded_and_clamped():
    g = Grid1D(50, 1.0)
    a = build_initial("perturbed_constant", {"value": [0.5, 0.5], "amplitude": 0.1}, g,
                      simplex(2), seed=42)
    b = build_initial("perturbed_constant", {"value": [0.5, 0.5], "amplitude": 0.1}, g,
                      simplex(2), seed=42)
    c = build_initial("perturbed_constant", {"value": [0.5, 0.5], "amplitude": 0.1}, g,
                      simplex(2), seed=43)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert simplex(2).margin_to_boundary(a).min() >= 1e-6 * (1 - 1e-9)
    o = build_initial("perturbed_constant", {"value": 0.0, "amplitude": 0.1}, g, orthant(2))
    assert o.min() >= 1e-6


def test_initial_errors():
    g = Grid1D(4, 1.0)
    with pytest.raises(ConfigurationError):
        build_initial("spiral", {}, g, simplex(2))
    with pytest.raises(ConfigurationError):
        build_initial("constant", {}, g, simplex(2))
    with pytest.raises(ConfigurationError):
        build_initial("constant", {"value": [0.1, 0.2, 0.3]}, g, simplex(2))
