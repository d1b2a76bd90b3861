"""Exact solutions: the constant field, the one-pole dressing family, and
the topological charge of the frame family they generate."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial import polynomial as npoly

from . import conventions
from .errors import ConfigurationError, DomainTooSmallError
from .field import AnalyticSource, FieldSource, GridSpec, dagger, matmul

_EPS_COEF = 1e-14


def _trim(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(c)))) if c.size else 1.0
    k = len(c)
    while k > 1 and abs(c[k - 1]) <= _EPS_COEF * scale:
        k -= 1
    return c[:k]


def _poly_gcd(a: np.ndarray, b: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    a, b = _trim(a), _trim(b)
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1.0)
    while len(b) > 1 or abs(b[0]) > tol * scale:
        if np.all(np.abs(b) <= tol * scale):
            break
        _, r = npoly.polydiv(a, b)
        a, b = b, _trim(r)
        if len(b) == 1 and abs(b[0]) <= tol * scale:
            break
    return a / a[-1]


@dataclass(frozen=True)
class SolitonSpec:
    """Pole ``mu`` and rational function ``f = f_num / f_den``.

    Coefficients are in ascending powers of omega. The stored representation
    is reduced: common factors cancelled, denominator monic.
    """

    mu: complex
    f_num: tuple = (0.0, 1.0)
    f_den: tuple = (1.0,)

    def __post_init__(self):
        mu = complex(self.mu)
        if not math.isfinite(mu.real) or not math.isfinite(mu.imag) or mu.imag == 0:
            raise ConfigurationError(f"pole mu must have non-zero imaginary part, got {mu}", field="mu")
        num, den = _trim(self.f_num), _trim(self.f_den)
        if np.all(den == 0):
            raise ConfigurationError("f_den is identically zero", field="f_den")
        if np.all(num == 0):
            num = np.zeros(1, dtype=complex)
        else:
            g = _poly_gcd(num, den)
            if len(g) > 1:
                num = _trim(npoly.polydiv(num, g)[0])
                den = _trim(npoly.polydiv(den, g)[0])
        lead = den[-1]
        num, den = num / lead, den / lead
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "f_num", tuple(complex(c) for c in num))
        object.__setattr__(self, "f_den", tuple(complex(c) for c in den))

    @property
    def degree(self) -> int:
        """Degree of f as a map of the Riemann sphere."""
        return max(len(self.f_num), len(self.f_den)) - 1

    def to_json(self) -> str:
        def pairs(cs):
            return [[c.real, c.imag] for c in cs]

        return json.dumps({"mu": {"re": self.mu.real, "im": self.mu.imag},
                           "f_num": pairs(self.f_num), "f_den": pairs(self.f_den)})

    @classmethod
    def from_dict(cls, d: dict) -> "SolitonSpec":
        try:
            mu = complex(d["mu"]["re"], d["mu"]["im"])
            num = [complex(re, im) for re, im in d["f_num"]]
            den = [complex(re, im) for re, im in d.get("f_den", [[1.0, 0.0]])]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed soliton spec: {exc}", field="spec") from None
        return cls(mu, tuple(num), tuple(den))

    @classmethod
    def from_json(cls, text: str) -> "SolitonSpec":
        return cls.from_dict(json.loads(text))


def _phase(mu: complex) -> complex:
    return np.conj(mu) / mu if conventions.PHASE_CONJ_OVER_MU else mu / np.conj(mu)


def _omega_coefficients(mu: complex):
    m = np.conj(mu) if conventions.OMEGA_USES_CONJ else mu
    return 0.5 * (m + 1 / m), 0.5 * (m - 1 / m)  # d omega/dt, d omega/dy


class OnePoleSource(FieldSource):
    """Single-pole dressing solution.

    ``J = J_inf^{-1} (I + (c - 1) P)`` with ``P`` the orthogonal projector
    onto ``q = (f_den(omega), f_num(omega))``, ``c = conj(mu)/mu`` and
    ``J_inf`` the (constant) limit at spatial infinity, so that ``J -> I``
    as ``r -> infinity`` and ``det J = 1``.
    """

    N = 2
    unitary = True
    special = True

    def __init__(self, spec: SolitonSpec):
        self.spec = spec
        self.c = _phase(spec.mu)
        self.a, self.b = _omega_coefficients(spec.mu)
        self._num = np.array(spec.f_num)
        self._den = np.array(spec.f_den)
        self._dnum = npoly.polyder(self._num) if len(self._num) > 1 else np.zeros(1, complex)
        self._dden = npoly.polyder(self._den) if len(self._den) > 1 else np.zeros(1, complex)
        self.P_inf = self._projector_at_infinity()
        # inverse of J_inf = I + (c - 1) P_inf is I + (1/c - 1) P_inf
        self.J_inf_inv = np.eye(2) + (1 / self.c - 1) * self.P_inf

    def _projector_at_infinity(self) -> np.ndarray:
        dn, dd = len(self._num) - 1, len(self._den) - 1
        if dn > dd:
            q = np.array([0, 1], dtype=complex)
        elif dn < dd:
            q = np.array([1, 0], dtype=complex)
        else:
            q = np.array([1, self._num[-1]], dtype=complex)
        return np.outer(q, q.conj()) / np.vdot(q, q).real

    def omega(self, x, y, t):
        return np.asarray(x) + self.a * np.asarray(t) + self.b * np.asarray(y)

    def _q(self, w):
        return npoly.polyval(w, self._den), npoly.polyval(w, self._num)

    def projector(self, x, y, t) -> np.ndarray:
        q0, q1 = self._q(self.omega(x, y, t))
        return self._proj(q0, q1)

    @staticmethod
    def _proj(q0, q1):
        n = np.abs(q0) ** 2 + np.abs(q1) ** 2
        P = np.empty(np.shape(q0) + (2, 2), dtype=complex)
        P[..., 0, 0] = np.abs(q0) ** 2 / n
        P[..., 0, 1] = q0 * np.conj(q1) / n
        P[..., 1, 0] = q1 * np.conj(q0) / n
        P[..., 1, 1] = np.abs(q1) ** 2 / n
        return P

    def evaluate(self, x, y, t):
        x, y, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, t)))
        P = self.projector(x, y, t)
        return matmul(self.J_inf_inv, np.eye(2) + (self.c - 1) * P)

    def derivatives(self, x, y, t):
        x, y, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, t)))
        w = self.omega(x, y, t)
        q0, q1 = self._q(w)
        d0, d1 = npoly.polyval(w, self._dden), npoly.polyval(w, self._dnum)
        n = np.abs(q0) ** 2 + np.abs(q1) ** 2
        P = self._proj(q0, q1)
        out = [matmul(self.J_inf_inv, np.eye(2) + (self.c - 1) * P)]
        for dw in (1.0, self.b, self.a):
            e0, e1 = d0 * dw, d1 * dw
            dn = 2 * np.real(np.conj(q0) * e0 + np.conj(q1) * e1)
            dqq = np.empty_like(P)
            dqq[..., 0, 0] = 2 * np.real(e0 * np.conj(q0))
            dqq[..., 0, 1] = e0 * np.conj(q1) + q0 * np.conj(e1)
            dqq[..., 1, 0] = e1 * np.conj(q0) + q1 * np.conj(e0)
            dqq[..., 1, 1] = 2 * np.real(e1 * np.conj(q1))
            dP = dqq / n[..., None, None] - P * (dn / n)[..., None, None]
            out.append(matmul(self.J_inf_inv, (self.c - 1) * dP))
        return tuple(out)

    def __repr__(self):
        return f"OnePoleSource(mu={self.spec.mu}, f_num={self.spec.f_num}, f_den={self.spec.f_den})"


def one_pole(spec: SolitonSpec) -> OnePoleSource:
    return OnePoleSource(spec)


def constant_field(U0) -> AnalyticSource:
    """The trivial solution ``J = U0``."""
    U0 = np.asarray(U0, dtype=complex)
    if U0.ndim != 2 or U0.shape[0] != U0.shape[1]:
        raise ConfigurationError("U0 must be a square matrix", field="U0")
    if np.max(np.abs(dagger(U0) @ U0 - np.eye(len(U0)))) > 1e-10:
        raise ConfigurationError("U0 is not unitary", field="U0")
    special = abs(np.linalg.det(U0) - 1) < 1e-12

    def func(x, y, t):
        return np.broadcast_to(U0, np.shape(x) + U0.shape).copy()

    def deriv(x, y, t):
        J = func(x, y, t)
        z = np.zeros_like(J)
        return J, z, z.copy(), z.copy()

    return AnalyticSource(func, len(U0), deriv, special=special, name="constant")


def dressing_frame(spec: SolitonSpec, theta: float, x, y, t) -> np.ndarray:
    """Closed-form frame of the direction-``theta`` line family.

    For the one-pole solution the transport from the far end of each line is
    ``psi(lam) psi_inf(lam)^{-1}`` with ``psi(lam) = (I - P) + e(lam) P``,
    ``e = (lam - conj(nu))/(lam - nu)``, spectral value ``lam = tan(theta/2)``
    and pole ``nu`` fixed by the phase convention. Used as an independent
    check of the numerical frames.
    """
    src = OnePoleSource(spec)
    nu = np.conj(spec.mu) if conventions.PHASE_CONJ_OVER_MU else spec.mu
    cs, sn = math.cos(theta / 2), math.sin(theta / 2)
    # e(lam) in homogeneous form, finite at lam = infinity
    e = (sn - np.conj(nu) * cs) / (sn - nu * cs)
    P = src.projector(x, y, t)
    eye = np.eye(2)
    psi = eye - P + e * P
    psi_inf_inv = eye - src.P_inf + np.conj(e) * src.P_inf
    return matmul(psi, psi_inf_inv)


# ---------------------------------------------------------------------------
# topological charge
# ---------------------------------------------------------------------------


@dataclass
class ChargeResult:
    Q: float
    nearest_integer: int
    gap: float
    leak: float
    grid: GridSpec
    n_theta: int
    steps: Optional[int] = None
    density: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"Q": self.Q, "nearest_integer": self.nearest_integer, "gap": self.gap,
                "leak": self.leak}


def _d4(a: np.ndarray, axis: int, step: float, periodic: bool = False) -> np.ndarray:
    if periodic:
        def r(k):
            return np.roll(a, -k, axis=axis)
        return (8 * (r(1) - r(-1)) - (r(2) - r(-2))) / (12 * step)
    n = a.shape[axis]

    def s(lo, hi):
        return np.take(a, np.arange(lo, n + hi), axis=axis)

    return (8 * (s(3, -1) - s(1, -3)) - (s(4, 0) - s(0, -4))) / (12 * step)


def charge_from_frames(frames: np.ndarray, h: float, grid: GridSpec) -> tuple:
    """Degree of ``g(theta, y, x)`` sampled on ``n_theta`` equally spaced
    angles (periodic) and the spatial grid.

    Fourth-order centred differences in all three directions; the integrand
    is ``tr(Rx [Ry, Rtheta]) / (8 pi^2)`` with ``R = g^{-1} dg``. Returns
    ``(Q, leak, density)`` where ``density`` is the theta-integrated charge
    density on the interior grid and ``leak`` estimates the charge outside the
    grid from an ``r^-4`` tail fitted to the boundary ring.
    """
    n_theta = frames.shape[0]
    dth = 2 * math.pi / n_theta
    gi = dagger(frames)
    Rx = matmul(gi[:, :, 2:-2], _d4(frames, 2, h))[:, 2:-2, :]
    Ry = matmul(gi[:, 2:-2, :], _d4(frames, 1, h))[:, :, 2:-2]
    Rt = matmul(gi, _d4(frames, 0, dth, periodic=True))[:, 2:-2, 2:-2]
    integrand = np.real(np.trace(matmul(Rx, matmul(Ry, Rt) - matmul(Rt, Ry)), axis1=-2, axis2=-1))
    density = conventions.CHARGE_SIGN * integrand.sum(axis=0) * dth / (8 * math.pi ** 2)
    inner = grid.shrink(2)
    Q = float(np.sum(density * inner.trapezoid_weights()))
    ring = np.concatenate([density[0, :], density[-1, :], density[1:-1, 0], density[1:-1, -1]])
    x0, x1, y0, y1 = inner.extent
    R = 0.5 * min(x1 - x0, y1 - y0)
    leak = float(np.mean(np.abs(ring)) * math.pi * R * R)
    return Q, leak, density


def topological_charge(source: FieldSource, grid: GridSpec, t: float = 0.0, n_theta: int = 32,
                       steps: Optional[int] = 64, gate: Optional[float] = 1e-2,
                       max_leak: float = 0.1, center=(0.0, 0.0)) -> ChargeResult:
    """Degree of the frame family ``(x, y, theta) -> J_theta(x, y)``.

    Each ``J_theta`` is the transport of the direction-``theta`` operator
    from the far end of every line through a grid node (see
    :func:`wardlab.monodromy.frame_field`). Contributions beyond the grid are
    dropped; the leak estimate must stay below ``max_leak``.
    """
    from .monodromy import frame_field

    if n_theta < 8:
        raise ConfigurationError("n_theta must be at least 8", field="n_theta")
    thetas = 2 * math.pi * np.arange(n_theta) / n_theta
    frames = np.stack([
        frame_field(source, th, grid, t, gate=gate, steps=steps, center=center).data
        for th in thetas
    ])
    Q, leak, density = charge_from_frames(frames, grid.h, grid)
    if leak > max_leak:
        raise DomainTooSmallError(
            f"estimated charge outside the grid {leak:.3g} exceeds {max_leak}", leak=leak)
    k = int(round(Q))
    return ChargeResult(Q=Q, nearest_integer=k, gap=abs(Q - k), leak=leak, grid=grid,
                        n_theta=n_theta, steps=steps, density=density)
