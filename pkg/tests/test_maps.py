import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hmlab.grid import Grid, second_derivatives, wirtinger_dz, wirtinger_dzbar
from hmlab.maps import (
    DERIVATIVES,
    affine_map,
    euclidean_harmonic,
    holomorphic_map,
    precompose_holomorphic,
    sample,
    strip_map,
)
from hmlab.metrics import builtin_metric
from hmlab.solver import pde_residual

coef = st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False)


def fd_derivatives(m, z0, eps=1e-4):
    """Wirtinger derivatives of a map by central differences of its closed form."""
    def dz(f):
        return lambda z: ((f(z + eps) - f(z - eps)) - 1j * (f(z + 1j * eps) - f(z - 1j * eps))) / (4 * eps)

    def dzb(f):
        return lambda z: ((f(z + eps) - f(z - eps)) + 1j * (f(z + 1j * eps) - f(z - 1j * eps))) / (4 * eps)

    return {
        "hz": dz(m.h)(z0),
        "hzb": dzb(m.h)(z0),
        "hzz": dz(m.hz)(z0),
        "hzzb": dzb(m.hz)(z0),
        "hzbzb": dzb(m.hzb)(z0),
    }


def test_quadratic_fixture_point_values():
    m = euclidean_harmonic([0, 0, 1], [0, 0, 0.3])
    assert m.family == "euclidean_harmonic"
    assert m(1.0) == pytest.approx(1.3)
    assert m.hz(np.array(1.0 + 0j)) == 2 and m.hzb(np.array(1.0 + 0j)) == pytest.approx(0.6)
    assert m.hzz(np.array(0.3j)) == 2 and m.hzbzb(np.array(0.3j)) == pytest.approx(0.6)


def test_affine_map():
    m = affine_map(0.3 + 0.1j)
    z = np.array([0.2 - 0.7j])
    assert np.allclose(m(z), z + (0.3 + 0.1j) * np.conj(z))
    assert np.allclose(m.hzb(z), 0.3 + 0.1j)


def test_holomorphic_family_when_k_constant():
    assert euclidean_harmonic([1, 2], [5]).family == "holomorphic_poly"
    assert holomorphic_map([0, 0.5]).family == "holomorphic_poly"


@given(st.lists(coef, min_size=1, max_size=4), st.lists(coef, min_size=1, max_size=4), coef)
def test_exact_derivatives_match_finite_differences(g, k, z0):
    m = euclidean_harmonic(g, k)
    fd = fd_derivatives(m, np.array(z0))
    for name in DERIVATIVES:
        assert m.derivative(name, z0) == pytest.approx(fd[name], abs=1e-5 * (1 + abs(fd[name])))


@given(st.lists(coef, min_size=2, max_size=3), coef)
def test_precompose_chain_rule(phi, z0):
    m = precompose_holomorphic(euclidean_harmonic([0, 1, 0.5], [0, 0.2, 0.1j]), phi)
    fd = fd_derivatives(m, np.array(z0))
    for name in DERIVATIVES:
        assert m.derivative(name, z0) == pytest.approx(fd[name], abs=1e-5 * (1 + abs(fd[name])))


def test_sample_with_derivatives():
    g = Grid.square(0.5, 0.5, 1.0, 17)
    f, d = sample(euclidean_harmonic([0, 0, 1], [0, 0, 0.3]), g, derivatives=True)
    assert set(d) == set(DERIVATIVES)
    assert np.allclose(wirtinger_dz(f).values[1:-1, 1:-1], d["hz"].values[1:-1, 1:-1])
    assert np.allclose(second_derivatives(f)[2].values[2:-2, 2:-2], d["hzbzb"].values[2:-2, 2:-2])


class TestStripMap:
    def test_derivatives_match_finite_differences(self):
        m = strip_map()
        for z0 in (0.3 + 0.2j, -0.45 - 0.1j, 0.0 + 0.4j):
            fd = fd_derivatives(m, np.array(z0), eps=1e-4)
            for name in DERIVATIVES:
                assert m.derivative(name, z0) == pytest.approx(fd[name], abs=1e-6)

    def test_is_harmonic_into_sphere(self):
        # the discrete residual of the sampled map decays like s^2
        sph = builtin_metric("spherical")
        res = [pde_residual(sample(strip_map(), Grid.square(-0.5, -0.5, 1.0, n)), sph).linf() for n in (33, 65, 129)]
        assert np.log2(res[0] / res[1]) > 1.9 and np.log2(res[1] / res[2]) > 1.9

    def test_sense_preserving_and_not_conformal(self):
        g = Grid.square(-0.5, -0.5, 1.0, 21)
        _, d = sample(strip_map(), g, derivatives=True)
        J0 = np.abs(d["hz"].values) ** 2 - np.abs(d["hzb"].values) ** 2
        assert J0.min() > 0.1
        assert np.abs(d["hzb"].values).min() > 0.01

    def test_conformal_initial_slope_gives_exponential(self):
        m = strip_map(k=1.0, theta0=np.pi / 2, dtheta0=1.0)
        z = np.array([0.3 + 0.2j, -0.2 - 0.4j])
        assert np.allclose(m(z), np.exp(z), rtol=1e-10)
        assert np.allclose(m.hzb(z), 0, atol=1e-10)

    def test_outside_tabulated_range(self):
        with pytest.raises(ValueError):
            strip_map(half_width=1.0)(np.array([2.0 + 0j]))
