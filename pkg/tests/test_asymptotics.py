
import numpy as np
import pytest

from wardlab.asymptotics import (DegenerateFitWarning, boundary_profile, decay_exponent,
                                 decay_profile, loglog_slope, richardson_j1)
from wardlab.closed_forms import radial_bump_field
from wardlab.errors import ConfigurationError
from wardlab.solitons import SolitonSpec, constant_field, one_pole


class TestFits:
    def test_loglog_exact_power(self):
        r = np.array([1.0, 2.0, 4.0, 8.0])
        s, e = loglog_slope(r, 3 * r ** -2.5)
        assert s == pytest.approx(-2.5, abs=1e-12) and e < 1e-12

    def test_richardson_removes_second_order(self):
        J1 = np.array([[0, 1], [-1, 0]], dtype=complex)
        J2 = np.eye(2) * 0.3
        A = lambda r: J1 + J2 / r  # r (J - I) with a 1/r^2 correction in J
        assert np.allclose(richardson_j1(A(50), A(100), 2.0), J1, atol=1e-14)


class TestBoundary:
    @pytest.mark.parametrize("name", ["lump", "moving_lump"])
    def test_one_over_r(self, name, request):
        fit = boundary_profile(request.getfixturevalue(name))
        assert abs(fit.exponent + 1) <= 0.05
        assert fit.continuity() <= 10 / 64
        assert fit.antihermitian_defect() < 1e-3

    def test_richardson_stable(self, lump):
        a = boundary_profile(lump, radii=(12.5, 25, 50)).J1_samples
        b = boundary_profile(lump, radii=(25, 50, 100)).J1_samples
        rel = np.max(np.linalg.norm(a - b, axis=(-2, -1))) / np.max(np.linalg.norm(b, axis=(-2, -1)))
        assert rel <= 0.05

    def test_degree_two_decays_faster(self):
        fit = boundary_profile(one_pole(SolitonSpec(1j, (0, 0, 1))))
        assert abs(fit.exponent + 2) <= 0.05

    def test_compact_support_degenerate(self):
        with pytest.warns(DegenerateFitWarning):
            fit = boundary_profile(radial_bump_field(1.0, 5.0))
        assert fit.degenerate and np.isnan(fit.exponent)

    def test_bad_radii(self, lump):
        for radii in ((25, 50), (50, 25, 100), (-1, 2, 3)):
            with pytest.raises(ConfigurationError):
                boundary_profile(lump, radii=radii)


class TestDecay:
    @pytest.mark.parametrize("name", ["lump", "moving_lump"])
    def test_energy_slope(self, name, request):
        assert abs(decay_exponent(request.getfixturevalue(name)) + 4) <= 0.1

    def test_degree_two(self):
        assert abs(decay_exponent(one_pole(SolitonSpec(1j, (0, 0, 1)))) + 6) <= 0.1

    def test_constant_degenerate(self):
        with pytest.warns(DegenerateFitWarning):
            prof = decay_profile(constant_field(np.eye(2)))
        assert prof.degenerate and np.isnan(prof.slope)

    def test_csv(self, lump):
        text = decay_profile(lump, radii=(10, 20, 40)).to_csv()
        lines = text.splitlines()
        assert lines[0] == "r,theta_avg_energy,fit_slope" and len(lines) == 4
