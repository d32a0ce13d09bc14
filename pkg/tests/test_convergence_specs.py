import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hmlab.convergence import (
    check_halving,
    fit_slope,
    nodes_for,
    parse_spacing,
    refinement_order,
)
from hmlab.fieldio import write_field
from hmlab.grid import Grid, RealField
from hmlab.specs import SpecError, parse_coefficients, parse_map, parse_metric

from conftest import slope


class TestSlopes:
    @given(st.floats(0.5, 4.0), st.floats(1e-3, 1e3))
    def test_power_law_recovered(self, p, c):
        s = np.array([1 / 16, 1 / 32, 1 / 64])
        assert fit_slope(s, c * s**p) == pytest.approx(p, rel=1e-9)

    def test_zero_error_gives_nan(self):
        assert np.isnan(fit_slope([0.1, 0.05], [1.0, 0.0]))

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            fit_slope([0.1], [1.0])

    def test_refinement_order(self):
        s = [1 / 32, 1 / 64, 1 / 128]
        assert refinement_order("x", s, [4e-3, 1e-3, 2.5e-4]).passed
        assert not refinement_order("x", s, [4e-3, 2e-3, 1e-3]).passed
        r = refinement_order("x", s, [5e-12, 3e-11, 1e-10])
        assert r.bypassed and r.passed and np.isnan(r.slope)

    def test_refinement_sorts_by_spacing(self):
        r = refinement_order("x", [1 / 128, 1 / 32, 1 / 64], [2.5e-4, 4e-3, 1e-3])
        assert r.spacings[0] == 1 / 32 and r.slope == pytest.approx(2.0)
        assert r.to_dict()["passed"]

    def test_matches_conftest_helper(self):
        s, e = [0.1, 0.05, 0.025], [3e-2, 8e-3, 2e-3]
        assert fit_slope(s, e) == pytest.approx(slope(s, e))


class TestSpacings:
    def test_parse(self):
        assert parse_spacing("1/64") == 1 / 64
        assert parse_spacing("0.125") == 0.125
        with pytest.raises(ValueError):
            parse_spacing("abc")

    def test_halving(self):
        assert check_halving([1 / 128, 1 / 32, 1 / 64]) == [1 / 32, 1 / 64, 1 / 128]
        with pytest.raises(ValueError):
            check_halving([1 / 32, 1 / 64])
        with pytest.raises(ValueError):
            check_halving([1 / 32, 1 / 64, 1 / 96])

    def test_nodes_for(self):
        assert nodes_for(1.0, 1 / 64) == 65
        with pytest.raises(ValueError):
            nodes_for(1.0, 0.3)


class TestCoefficients:
    def test_even_count_is_pairs(self):
        assert np.array_equal(parse_coefficients("0,0,0.5,0"), [0, 0.5])
        assert np.array_equal(parse_coefficients("0,0.5"), [0.5j])

    def test_odd_count_is_reals(self):
        assert np.array_equal(parse_coefficients("0,0.5,0"), [0, 0.5, 0])

    def test_errors(self):
        for bad in ("", "a,b", "1,,x"):
            with pytest.raises(SpecError):
                parse_coefficients(bad)


class TestMapSpecs:
    z = np.array([0.3 + 0.2j, -0.1 + 0.7j])

    def test_holo(self):
        m = parse_map("holo:0,0.5,0")
        assert np.allclose(m(self.z), self.z / 2)

    def test_affine(self):
        m = parse_map("affine:c=0.3,0.1")
        assert np.allclose(m(self.z), self.z + (0.3 + 0.1j) * np.conj(self.z))

    def test_ehpoly(self):
        m = parse_map("ehpoly:g=0,0.5,0;k=0,0.1,0")
        assert np.allclose(m(self.z), self.z / 2 + 0.1 * np.conj(self.z))

    def test_strip(self):
        m = parse_map("strip:k=1,theta0=1")
        assert m.family == "custom" and m.label.startswith("strip")
        assert parse_map("strip").label == m.label

    def test_abs2(self):
        m = parse_map("abs2")
        assert np.allclose(m(self.z), np.abs(self.z) ** 2)
        assert np.allclose(m.hzb(self.z), self.z)

    @pytest.mark.parametrize(
        "spec",
        ["", "holo:", "nope:1", "affine:c=1,2,3,4", "ehpoly:g=1", "strip:q=1", "strip:k=x", "abs2:1", "affine:c"],
    )
    def test_malformed(self, spec):
        with pytest.raises(SpecError):
            parse_map(spec)

    @given(st.text(max_size=30))
    def test_arbitrary_text_raises_only_spec_error(self, text):
        try:
            parse_map(text)
        except SpecError:
            pass


class TestMetricSpecs:
    def test_builtins(self):
        for name in ("euclidean", "spherical", "hyperbolic"):
            assert parse_metric(name).name == name

    def test_radial(self):
        m = parse_metric("radial:spherical")
        w = np.array([0.3 + 0.4j])
        assert np.allclose(m.rho(w), parse_metric("spherical").rho(w))

    def test_tabulated(self, tmp_path):
        g = Grid.square(-2, -2, 4, 41)
        path = tmp_path / "rho.hmf"
        write_field(path, RealField(g, np.full(g.shape, 2.0)))
        m = parse_metric(f"tabulated:{path}")
        assert m.rho(np.array([0.1 + 0.1j]))[0] == pytest.approx(2.0)

    @pytest.mark.parametrize("spec", ["", "radial:nope", "tabulated:/no/such/file", "flat"])
    def test_malformed(self, spec):
        with pytest.raises(SpecError):
            parse_metric(spec)

    @given(st.text(max_size=30))
    def test_arbitrary_text_raises_only_spec_error(self, text):
        try:
            parse_metric(text)
        except SpecError:
            pass
