"""Closed-form test fields: diagonal waves, compact bumps, a smooth
non-solution, and scalar U(1) data for the Radon/monodromy diagnostics."""

from __future__ import annotations

import numpy as np

from .field import AnalyticSource

SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)


def _diag2(a, b):
    out = np.zeros(np.shape(a) + (2, 2), dtype=complex)
    out[..., 0, 0] = a
    out[..., 1, 1] = b
    return out


def diagonal_wave(a: float = 1.0) -> AnalyticSource:
    """``J = diag(exp(i a x), exp(-i a x))`` with exact derivatives."""

    def func(x, y, t):
        return _diag2(np.exp(1j * a * x), np.exp(-1j * a * x))

    def deriv(x, y, t):
        J = func(x, y, t)
        Jx = _diag2(1j * a * np.exp(1j * a * x), -1j * a * np.exp(-1j * a * x))
        zero = np.zeros_like(J)
        return J, Jx, zero, zero.copy()

    return AnalyticSource(func, 2, deriv, special=True, name=f"diagonal_wave(a={a})")


def _bump(rho):
    """C-infinity bump ``exp(-1/(1 - rho^2))`` for rho < 1, zero outside, and
    its derivative with respect to rho."""
    rho = np.asarray(rho, dtype=float)
    inside = rho < 1
    q = np.where(inside, 1 - rho * rho, 1.0)
    b = np.where(inside, np.exp(-1 / q), 0.0)
    db = np.where(inside, b * (-2 * rho / (q * q)), 0.0)
    return b, db


def radial_bump_field(amplitude: float = 1.0, radius: float = 5.0) -> AnalyticSource:
    """``diag(exp(i B(r)), exp(-i B(r)))`` with ``B`` supported in ``r < radius``."""

    def phase(x, y):
        r = np.hypot(x, y)
        b, db = _bump(r / radius)
        safe = np.where(r > 0, r, 1.0)
        dB = amplitude * db / radius
        return amplitude * b, dB * x / safe, dB * y / safe

    def func(x, y, t):
        B, _, _ = phase(x, y)
        return _diag2(np.exp(1j * B), np.exp(-1j * B))

    def deriv(x, y, t):
        B, Bx, By = phase(x, y)
        e, ei = np.exp(1j * B), np.exp(-1j * B)
        J = _diag2(e, ei)
        return J, _diag2(1j * Bx * e, -1j * Bx * ei), _diag2(1j * By * e, -1j * By * ei), np.zeros_like(J)

    return AnalyticSource(func, 2, deriv, special=True,
                          name=f"radial_bump_field(A={amplitude}, R={radius})")


def nonsolution_field(width: float = 8.0) -> AnalyticSource:
    """``exp(i phi sigma_1)`` with ``phi = x^2 exp(-(x^2 + y^2)/width)``.

    Smooth, special-unitary, equal to I far away, and not a solution of the
    chiral equation; used as a negative control.
    """

    def phi(x, y):
        g = np.exp(-(x * x + y * y) / width)
        return x * x * g, (2 * x - 2 * x ** 3 / width) * g, (-2 * x * x * y / width) * g

    def func(x, y, t):
        p, _, _ = phi(x, y)
        return np.cos(p)[..., None, None] * np.eye(2) + 1j * np.sin(p)[..., None, None] * SIGMA1

    def deriv(x, y, t):
        p, px, py = phi(x, y)
        J = np.cos(p)[..., None, None] * np.eye(2) + 1j * np.sin(p)[..., None, None] * SIGMA1
        dJ = -np.sin(p)[..., None, None] * np.eye(2) + 1j * np.cos(p)[..., None, None] * SIGMA1
        return J, px[..., None, None] * dJ, py[..., None, None] * dJ, np.zeros_like(J)

    return AnalyticSource(func, 2, deriv, special=True, name="nonsolution_field")


class ScalarField:
    """Real scalar field ``j(x, y, t)`` for the abelian diagnostics."""

    def value(self, x, y, t):
        raise NotImplementedError

    def gradient(self, x, y, t):
        """``(j_x, j_y, j_t)``; the default uses centred differences."""
        s = 1e-5
        return ((self.value(x + s, y, t) - self.value(x - s, y, t)) / (2 * s),
                (self.value(x, y + s, t) - self.value(x, y - s, t)) / (2 * s),
                (self.value(x, y, t + s) - self.value(x, y, t - s)) / (2 * s))


class ConstantScalar(ScalarField):
    def __init__(self, c: float = 1.0):
        self.c = float(c)

    def value(self, x, y, t):
        return np.full(np.broadcast(x, y, t).shape, self.c)

    def gradient(self, x, y, t):
        z = np.zeros(np.broadcast(x, y, t).shape)
        return z, z.copy(), z.copy()


class BumpScalar(ScalarField):
    """Time-independent compactly supported bump ``A exp(-1/(1 - rho^2))``."""

    def __init__(self, amplitude: float = 1.0, radius: float = 1.0, center=(0.0, 0.0)):
        self.amplitude = float(amplitude)
        self.radius = float(radius)
        self.center = tuple(float(c) for c in center)

    def value(self, x, y, t):
        dx, dy = np.asarray(x) - self.center[0], np.asarray(y) - self.center[1]
        b, _ = _bump(np.hypot(dx, dy) / self.radius)
        return self.amplitude * b + 0 * np.asarray(t)

    def gradient(self, x, y, t):
        dx, dy = np.asarray(x) - self.center[0], np.asarray(y) - self.center[1]
        r = np.hypot(dx, dy)
        _, db = _bump(r / self.radius)
        safe = np.where(r > 0, r, 1.0)
        g = self.amplitude * db / self.radius
        shape = np.broadcast(x, y, t).shape
        return (np.broadcast_to(g * dx / safe, shape), np.broadcast_to(g * dy / safe, shape),
                np.zeros(shape))


class OutgoingPulse(ScalarField):
    """Radiating solution of the 2+1 wave equation,
    ``j = A Re[(r^2 + (tau + i t)^2)^(-1/2)]``.

    A complex time shift of the fundamental solution: smooth everywhere,
    ``O(1/r)`` at spatial infinity, with an outgoing front of width ``tau``.
    """

    def __init__(self, amplitude: float = 1.0, tau: float = 1.0, center=(0.0, 0.0)):
        self.amplitude = float(amplitude)
        self.tau = float(tau)
        self.center = tuple(float(c) for c in center)

    def _w(self, x, y, t):
        dx, dy = np.asarray(x) - self.center[0], np.asarray(y) - self.center[1]
        return dx, dy, dx * dx + dy * dy + (self.tau + 1j * np.asarray(t)) ** 2

    def value(self, x, y, t):
        _, _, w = self._w(x, y, t)
        return self.amplitude * np.real(w ** -0.5)

    def gradient(self, x, y, t):
        dx, dy, w = self._w(x, y, t)
        g = -0.5 * w ** -1.5
        wt = 2j * (self.tau + 1j * np.asarray(t))
        return (self.amplitude * np.real(g * 2 * dx), self.amplitude * np.real(g * 2 * dy),
                self.amplitude * np.real(g * wt))


def u1_field(scalar: ScalarField) -> AnalyticSource:
    """The 1x1 unitary field ``exp(i j)`` built from a scalar ``j``."""

    def func(x, y, t):
        return np.exp(1j * scalar.value(x, y, t))[..., None, None]

    def deriv(x, y, t):
        J = func(x, y, t)
        jx, jy, jt = scalar.gradient(x, y, t)
        return (J, 1j * np.asarray(jx)[..., None, None] * J, 1j * np.asarray(jy)[..., None, None] * J,
                1j * np.asarray(jt)[..., None, None] * J)

    return AnalyticSource(func, 1, deriv, special=False, name=f"u1({type(scalar).__name__})")
