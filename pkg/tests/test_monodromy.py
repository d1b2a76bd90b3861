import math

import numpy as np
import pytest
from scipy.integrate import quad

from wardlab.closed_forms import BumpScalar, ConstantScalar, OutgoingPulse, u1_field
from wardlab.errors import ConfigurationError, DataError, MonodromyGateError
from wardlab.field import AnalyticSource, GridSpec
from wardlab.monodromy import (Compactified, Line, Truncated, default_thetas, frame_field, integrate,
                               line_quadrature, null_monodromy_sweep, parse_mode, radon_u1,
                               transport, transport_many, truncation_error_estimate)
from wardlab.solitons import SolitonSpec, constant_field, dressing_frame

BUMP = BumpScalar(1.0, 2.0, center=(0.3, -0.2))


def lines_without_pi():
    # at theta = pi the generator (1 + cos)/2 Lx + sin/2 (Ly + Lt) vanishes identically
    return [Line(th, x0, y0) for th in default_thetas() if abs(th - math.pi) > 1e-12
            for (x0, y0) in ((0, 0), (0.7, -0.4), (-1.5, 2.0))]


class TestLineAndMode:
    def test_theta_normalised(self):
        assert Line(-math.pi / 2).theta == pytest.approx(1.5 * math.pi)
        assert Line(2 * math.pi).theta == 0.0

    def test_nonfinite_line(self):
        with pytest.raises(ConfigurationError):
            Line(float("nan"))

    def test_parse_mode(self):
        assert parse_mode("compactified") == Compactified()
        assert parse_mode("truncated:50") == Truncated(50.0)
        for bad in ("truncated:x", "truncated:-1", "open"):
            with pytest.raises(ConfigurationError):
                parse_mode(bad)

    def test_unknown_integrator(self):
        with pytest.raises(ConfigurationError):
            integrate(lambda s: np.zeros(np.shape(s) + (1, 1)), 0.0, 1.0, 1, integrator="euler")


class TestTransport:
    def test_identity_field_exact(self):
        src = constant_field(np.eye(2))
        for mode in (Compactified(), Truncated(10.0)):
            r = transport(src, Line(0.4, 1.0, 2.0), mode=mode)
            assert np.array_equal(r.M, np.eye(2)) and r.deviation == 0.0

    def test_abelian_against_quadrature(self):
        line = Line(0.9, 0.5, 0.1)
        ex, ey = line.direction

        def k(u):
            x, y = line.point(u)
            jx, jy, jt = BUMP.gradient(np.array([x]), np.array([y]), 0.0)
            return float((1 + ex) * jx[0] + ey * (jy[0] + jt[0]))

        # the support is the disc of radius 2 about (0.3, -0.2)
        u0 = (0.3 - line.x0) * ex + (-0.2 - line.y0) * ey
        total, _ = quad(k, u0 - 2, u0 + 2, epsabs=1e-13, epsrel=1e-13, limit=200)
        expected = np.exp(-0.5j * total)
        for mode in (Compactified(), Truncated(20.0)):
            r = transport(u1_field(BUMP), line, mode=mode, tol=1e-10)
            assert abs(r.M[0, 0] - expected) <= 1e-8

    def test_soliton_compactified(self, moving_lump):
        res = transport_many(moving_lump, lines_without_pi(), t=0.3)
        assert max(r.deviation for r in res) <= 1e-6

    def test_truncated_first_order(self, lump):
        lines = lines_without_pi()
        d100 = np.array([r.deviation for r in transport_many(lump, lines, mode=Truncated(100.0))])
        d200 = np.array([r.deviation for r in transport_many(lump, lines, mode=Truncated(200.0))])
        ratio = d100 / d200
        assert np.all((ratio >= 1.8) & (ratio <= 2.2)), ratio

    def test_truncated_monotone_in_L(self, lump):
        line = Line(0.7, 0.3, -0.2)
        full = transport(lump, line).M
        dist = [np.linalg.norm(transport(lump, line, mode=Truncated(L)).M - full) for L in (25, 50, 100, 200)]
        assert all(a > b for a, b in zip(dist, dist[1:]))

    def test_compactified_vs_truncated(self, lump):
        line = Line(1.1, -0.5, 0.4)
        comp = transport(lump, line).M
        trunc = transport(lump, line, mode=Truncated(200.0)).M
        est = truncation_error_estimate(lump, line, 200.0)
        assert np.linalg.norm(comp - trunc) <= 1.1 * est

    def test_reverse_is_inverse(self, moving_lump):
        line = Line(0.6, 0.2, 0.1)
        for mode in (Compactified(), Truncated(50.0)):
            f = transport(moving_lump, line, mode=mode).M
            b = transport(moving_lump, line, mode=mode, reverse=True).M
            assert np.linalg.norm(f @ b - np.eye(2)) <= 1e-8

    def test_unitary(self, moving_lump):
        r = transport(moving_lump, Line(2.0, 1.0, 1.0), mode=Truncated(30.0))
        assert np.max(np.abs(r.M.conj().T @ r.M - np.eye(2))) <= 1e-8

    def test_magnus_agrees(self, lump):
        line = Line(0.5, 0.4, 0.2)
        a = transport(lump, line, mode=Truncated(20.0, steps=2048)).M
        with pytest.warns(RuntimeWarning):
            b = transport(lump, line, mode=Truncated(20.0), integrator="magnus2", tol=1e-12).M
        assert np.linalg.norm(a - b) <= 1e-6

    def test_nonfinite_generator(self):
        def func(x, y, t):
            return np.broadcast_to(np.eye(1, dtype=complex), np.shape(x) + (1, 1)).copy()

        def deriv(x, y, t):
            J = func(x, y, t)
            bad = np.where(np.asarray(x)[..., None, None] > 1, np.nan, 0.0) + 0j
            return J, bad, bad, bad

        with pytest.raises(DataError):
            transport(AnalyticSource(func, 1, deriv), Line(0.0))


class TestSweep:
    def test_constant_field(self):
        rep = null_monodromy_sweep(constant_field(np.diag([1j, -1j])))
        assert rep.max_deviation == 0.0 and len(rep.rows) == 80

    def test_pulse_is_negative_control(self, moving_lump):
        sol = null_monodromy_sweep(moving_lump, thetas=default_thetas(8))
        pulse = null_monodromy_sweep(u1_field(OutgoingPulse()), t=1.0, thetas=default_thetas(8))
        assert sol.max_deviation <= 1e-6
        assert pulse.max_deviation >= 0.1

    def test_csv(self, lump):
        rep = null_monodromy_sweep(lump, thetas=[0.0, 1.0], offsets=[(0, 0)])
        lines = rep.to_csv().splitlines()
        assert lines[0] == "theta,x0,y0,mode,L_or_nodes,deviation"
        assert len(lines) == 3 and lines[1].startswith("0.0,0.0,0.0,compactified,")


class TestFrameField:
    def test_matches_closed_form(self, moving_lump):
        grid = GridSpec.square(3, 0.5)
        spec = SolitonSpec(0.5 + 1j)
        X, Y = grid.mesh()
        for theta in (0.3, 2.0, 4.5):
            F = frame_field(moving_lump, theta, grid, t=0.2)
            ref = dressing_frame(spec, theta, X, Y, np.full_like(X, 0.2))
            assert np.max(np.abs(F.data - ref)) <= 1e-6
            assert np.max(np.abs(np.conj(np.swapaxes(F.data, -1, -2)) @ F.data - np.eye(2))) <= 1e-8

    def test_resolution_doubling(self, lump):
        grid = GridSpec.square(2, 0.5)
        F = frame_field(lump, 1.0, grid)
        G = frame_field(lump, 1.0, grid, steps=2 * F.meta["steps"])
        assert np.max(np.abs(F.data - G.data)) <= 1e-6

    def test_gate(self):
        with pytest.raises(MonodromyGateError) as exc:
            frame_field(u1_field(OutgoingPulse()), 1.0, GridSpec.square(2, 0.5), t=1.0)
        assert exc.value.deviation > 1e-2


class TestRadon:
    def test_constant(self):
        r = radon_u1(ConstantScalar(3.0), 0.8)
        assert (r.I_total, r.I_fund, r.dt_radon) == (0.0, 0.0, 0.0)

    def test_bump(self):
        for th in (0.0, 1.0, 2.5, 4.0):
            r = radon_u1(BUMP, th, base=(0.5, 0.1))
            assert abs(r.I_fund) <= 1e-10 and abs(r.dt_radon) <= 1e-10
            M = transport(u1_field(BUMP), Line(th, 0.5, 0.1), tol=1e-10).M[0, 0]
            assert abs(M - np.exp(-0.5j * r.I_total)) <= 1e-8

    def test_two_angle_identity(self):
        pulse = OutgoingPulse(1.0, 1.0, center=(0.4, -0.3))
        for th in (0.5, 1.3, 2.2):
            a = radon_u1(pulse, th, base=(0.2, 0.6), t=0.7)
            b = radon_u1(pulse, th + math.pi, base=(0.2, 0.6), t=0.7)
            assert abs(a.I_total - b.I_total - 2 * math.sin(th) * a.dt_radon) <= 1e-7

    def test_truncation_warning(self):
        r = radon_u1(OutgoingPulse(), 0.5, mode=Truncated(5.0))
        assert r.warning is not None

    def test_line_quadrature_polynomial(self):
        val, nodes, ok = line_quadrature(lambda s: np.stack([s ** 5, np.cos(s)], -1), 0.0, 2.0)
        assert ok and abs(val[0] - 64 / 6) < 1e-12 and abs(val[1] - math.sin(2.0)) < 1e-12
