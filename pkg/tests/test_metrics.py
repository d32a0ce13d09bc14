import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hmlab.grid import Grid, RealField
from hmlab.metrics import (
    PROFILES,
    DomainGuardError,
    builtin_metric,
    default_samples,
    radial_metric,
    tabulated_metric,
    verify_metric_consistency,
)

EXPECTED_K = {"euclidean": 0.0, "spherical": 2.0, "hyperbolic": -2.0}


@pytest.mark.parametrize("kind", ["euclidean", "spherical", "hyperbolic"])
def test_builtin_consistency_and_curvature(kind):
    m = builtin_metric(kind)
    pts = default_samples(m, 100, seed=0)
    assert verify_metric_consistency(m, pts) <= 1e-6
    assert np.allclose(m.curvature(pts), EXPECTED_K[kind], atol=1e-12)


def test_closed_forms():
    s, h = builtin_metric("spherical"), builtin_metric("hyperbolic")
    w = 0.3 - 0.4j
    assert s.rho(w) == pytest.approx(2 / 1.25)
    assert s.log_rho2_w(w) == pytest.approx(-2 * np.conj(w) / 1.25)
    assert h.rho(w) == pytest.approx(2 / 0.75)
    assert h.log_rho2_w(w) == pytest.approx(2 * np.conj(w) / 0.75)
    e = builtin_metric("euclidean")
    assert e.rho(w) == 1.0 and e.log_rho2_w(w) == 0 and e.curvature(w) == 0


def test_hyperbolic_guard():
    h = builtin_metric("hyperbolic")
    assert h.domain_guard(np.array([0.5, 1.0, 2j])).tolist() == [True, False, False]
    with pytest.raises(DomainGuardError) as err:
        h.check(np.array([[0.1, 0.2], [0.3, 1.5]]))
    assert err.value.index == (1, 1)


@pytest.mark.parametrize("name", sorted(PROFILES))
def test_radial_profiles(name):
    m = radial_metric(PROFILES[name])
    assert verify_metric_consistency(m, default_samples(m, 100, seed=3)) <= 1e-6


def test_radial_spherical_matches_builtin():
    a, b = radial_metric(PROFILES["spherical"]), builtin_metric("spherical")
    w = default_samples(b, 50, seed=1)
    assert np.allclose(a.rho(w), b.rho(w), rtol=1e-14)
    assert np.allclose(a.log_rho2_w(w), b.log_rho2_w(w), rtol=1e-12, atol=1e-14)
    assert np.allclose(a.curvature(w), 2.0, rtol=1e-12)
    assert a.curvature(0.0) == pytest.approx(2.0)


def test_tabulated_spherical():
    g = Grid.square(-1.0, -1.0, 2.0, 161)
    sph = builtin_metric("spherical")
    m = tabulated_metric(RealField(g, sph.rho(g.z)))
    pts = default_samples(m, 40, seed=0)
    assert np.max(np.abs(m.curvature(pts) - 2.0)) < 1e-4
    assert verify_metric_consistency(m, pts) <= 1e-5
    with pytest.raises(DomainGuardError):
        m.check(np.array([1.5 + 0j]))


@given(st.floats(0.1, 10), st.floats(-0.8, 0.8), st.floats(-0.8, 0.8))
def test_curvature_scaling_law(c, x, y):
    # rho -> c rho multiplies K by 1/c^2 and leaves (log rho^2)_w unchanged
    for kind in ("spherical", "hyperbolic"):
        m = builtin_metric(kind)
        if not m.domain_guard(complex(x, y)):
            continue
        mc = m.scaled(c)
        w = complex(x, y)
        assert mc.curvature(w) == pytest.approx(m.curvature(w) / c**2, rel=1e-12)
        assert mc.log_rho2_w(w) == pytest.approx(m.log_rho2_w(w), rel=1e-12, abs=1e-15)
        assert mc.rho(w) == pytest.approx(c * m.rho(w), rel=1e-12)


def test_default_samples_deterministic_and_in_domain():
    h = builtin_metric("hyperbolic")
    a, b = default_samples(h, 100, seed=0), default_samples(h, 100, seed=0)
    assert np.array_equal(a, b)
    assert np.all(np.abs(a) <= 0.9)
