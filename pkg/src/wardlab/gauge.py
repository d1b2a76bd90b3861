"""Standard gauge, Bogomolny residuals, the spectral-parameter family of
zero-curvature residuals and the fibrewise del-bar operator.

Conventions: ``d_z = (d_x - i d_y)/2`` and ``d_zbar = (d_x + i d_y)/2``.
Gauge arrays are space-time blocks ``a[k, j, i, :, :]`` (time, y, x) padded
by ``pad`` nodes on every side of the target grid and time level; a single
slice has ``pad = 0``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import conventions
from .dynamics import ResidualReport
from .errors import PreconditionError, SingularityError
from .field import (CurrentSet, FieldSource, GridSpec, align, cdiff, commutator, current_block,
                    matmul, sample_block, scheme_width, time_spacing)


@dataclass
class GaugeData:
    """Connection ``(Ax, Ay, At)`` and Higgs field ``Phi``."""

    Ax: np.ndarray
    Ay: np.ndarray
    At: np.ndarray
    Phi: np.ndarray
    grid: GridSpec
    t: float = 0.0
    dt: Optional[float] = None
    pad: int = 0
    width: int = 1

    def construction_defect(self) -> float:
        """``max(|Ax + Phi|, |Ay - At|)``; zero for the standard gauge."""
        return float(max(np.max(np.abs(self.Ax + self.Phi)), np.max(np.abs(self.Ay - self.At))))

    @classmethod
    def zero(cls, grid: GridSpec, N: int = 2, pad: int = 1, width: int = 1,
             dt: Optional[float] = None) -> "GaugeData":
        shape = (2 * pad + 1, grid.ny + 2 * pad, grid.nx + 2 * pad, N, N)
        z = np.zeros(shape, dtype=complex)
        return cls(z, z.copy(), z.copy(), z.copy(), grid, 0.0, dt or grid.h, pad, width)


def _gauge_from_currents(Lx, Ly, Lt):
    Phi = conventions.PHI_SIGN * 0.5 * Lx
    Ax = -Phi
    Ay = 0.5 * (Ly + Lt)
    return Ax, Ay, Ay.copy(), Phi


def standard_gauge(cs: CurrentSet) -> GaugeData:
    """``Phi = -Lx/2``, ``Ax = -Phi``, ``Ay = At = (Ly + Lt)/2`` on one slice."""
    Ax, Ay, At, Phi = _gauge_from_currents(cs.Lx[None], cs.Ly[None], cs.Lt[None])
    return GaugeData(Ax, Ay, At, Phi, cs.grid, cs.t, None, 0)


def gauge_stencil(source: FieldSource, grid: GridSpec, t: float = 0.0, scheme: str = "order-2",
                  pad: Optional[int] = None) -> GaugeData:
    """Standard-gauge block around ``grid`` at time ``t``.

    The block carries ``pad`` extra nodes and time levels on each side
    (default: the stencil half-width, enough for one round of derivatives).
    """
    w = scheme_width(scheme)
    pad = w if pad is None else pad
    dt = time_spacing(source, grid)
    Jb = sample_block(source, grid, t, pad=pad + w, tpad=pad + w, dt=dt)
    Lx, Ly, Lt = current_block(Jb, grid.h, dt, w, source.unitary, source.special)
    Ax, Ay, At, Phi = _gauge_from_currents(Lx, Ly, Lt)
    return GaugeData(Ax, Ay, At, Phi, grid, float(t), dt, pad, w)


class _Diff:
    """Central differences on a gauge block; every result shrinks by the
    stencil width along the differenced axis only."""

    def __init__(self, g: GaugeData):
        self.g = g
        self.w = g.width

    def x(self, a):
        return cdiff(a, 2, self.g.grid.h, self.w)

    def y(self, a):
        return cdiff(a, 1, self.g.grid.h, self.w)

    def t(self, a):
        if self.g.dt is None:
            raise PreconditionError("gauge data has no time stencil")
        return cdiff(a, 0, self.g.dt, self.w)


def _require_block(g: GaugeData):
    if g.pad < g.width:
        raise PreconditionError(
            f"gauge block padding {g.pad} is smaller than the stencil half-width {g.width}; "
            "build it with gauge_stencil")


def _centre(a: np.ndarray, g: GaugeData) -> np.ndarray:
    """Central time level of an aligned block, cropped to the target grid."""
    k = (a.shape[0] - 1) // 2
    ey = (a.shape[1] - g.grid.ny) // 2
    ex = (a.shape[2] - g.grid.nx) // 2
    return a[k, ey:a.shape[1] - ey, ex:a.shape[2] - ex]


def bogomolny_matrices(g: GaugeData):
    """Matrix residuals ``R1, R2, R3`` on the aligned block.

    ``R1 = nabla_t Phi + F_xy``, ``R2 = nabla_x Phi - F_yt``,
    ``R3 = nabla_y Phi - F_tx`` with ``nabla_mu Phi = D_mu Phi + [A_mu, Phi]``
    and ``F_mn = D_m A_n - D_n A_m + [A_m, A_n]``.
    """
    _require_block(g)
    D = _Diff(g)
    Ax, Ay, At, Phi = g.Ax, g.Ay, g.At, g.Phi
    parts = align(D.t(Phi), D.x(Phi), D.y(Phi), D.x(Ay), D.y(Ax), D.y(At), D.t(Ay),
                  D.t(Ax), D.x(At), Ax, Ay, At, Phi)
    tPhi, xPhi, yPhi, xAy, yAx, yAt, tAy, tAx, xAt, Ax, Ay, At, Phi = parts
    Fxy = xAy - yAx + commutator(Ax, Ay)
    Fyt = yAt - tAy + commutator(Ay, At)
    Ftx = tAx - xAt + commutator(At, Ax)
    R1 = tPhi + commutator(At, Phi) + Fxy
    R2 = xPhi + commutator(Ax, Phi) - Fyt
    R3 = yPhi + commutator(Ay, Phi) - Ftx
    return R1, R2, R3


def bogomolny_residual(g: GaugeData):
    """Three :class:`ResidualReport` objects for the Bogomolny system."""
    return tuple(ResidualReport.from_matrix(_centre(R, g), g.grid) for R in bogomolny_matrices(g))


def _check_lambda(lam) -> complex:
    lam = complex(lam)
    if lam == 0:
        raise PreconditionError("spectral parameter lambda must be non-zero")
    return lam


def lax_coefficients(g: GaugeData, lam):
    """Connection parts ``(M1, M2)`` of the Lax operators

    ``D1 = nabla_zbar + (i lam/2) nabla_t - (lam/2) Phi`` and
    ``D2 = nabla_z - (i/(2 lam)) nabla_t - Phi/(2 lam)``.
    """
    lam = _check_lambda(lam)
    M1 = 0.5 * (g.Ax + 1j * g.Ay) + 0.5j * lam * g.At - 0.5 * lam * g.Phi
    M2 = 0.5 * (g.Ax - 1j * g.Ay) - 0.5j / lam * g.At - 0.5 / lam * g.Phi
    return M1, M2


def _delta1(D: _Diff, a, lam):
    x, y, t = align(D.x(a), D.y(a), D.t(a))
    return 0.5 * (x + 1j * y) + 0.5j * lam * t


def _delta2(D: _Diff, a, lam):
    x, y, t = align(D.x(a), D.y(a), D.t(a))
    return 0.5 * (x - 1j * y) - 0.5j / lam * t


def zero_curvature_matrix(g: GaugeData, lam) -> np.ndarray:
    """``[D1, D2]`` as a multiplication operator on the aligned block."""
    _require_block(g)
    lam = _check_lambda(lam)
    D = _Diff(g)
    M1, M2 = lax_coefficients(g, lam)
    d1M2, d2M1, M1, M2 = align(_delta1(D, M2, lam), _delta2(D, M1, lam), M1, M2)
    return d1M2 - d2M1 + commutator(M1, M2)


def zero_curvature_residual(g: GaugeData, lam) -> ResidualReport:
    return ResidualReport.from_matrix(_centre(zero_curvature_matrix(g, lam), g), g.grid)


def zero_curvature_from_bogomolny(R1, R2, R3, lam) -> np.ndarray:
    """The Laurent expansion of ``[D1, D2]`` in terms of the Bogomolny residuals:

    ``-(i/2) R1 + lam (R2 - i R3)/4 - (R2 + i R3)/(4 lam)``.
    """
    lam = _check_lambda(lam)
    return -0.5j * R1 + lam * (0.25 * R2 - 0.25j * R3) - (0.25 * R2 + 0.25j * R3) / lam


def laurent_fit(lams: Sequence[complex], values: Sequence[np.ndarray]) -> np.ndarray:
    """Coefficients ``c_k`` (k = -2..2) with ``values[m] = sum_k c_k lams[m]^k``.

    Needs exactly five distinct non-zero sample points. Returns an array of
    shape ``(5,) + values[0].shape``.
    """
    lams = np.array([_check_lambda(l) for l in lams])
    if len(lams) != 5 or len(set(lams.tolist())) != 5:
        raise PreconditionError("laurent_fit needs five distinct spectral parameters")
    V = lams[:, None] ** np.arange(-2, 3)[None, :]
    vals = np.stack([np.asarray(v) for v in values])
    flat = vals.reshape(5, -1)
    coef = np.linalg.solve(V, flat)
    return coef.reshape(vals.shape)


@dataclass
class DbarResult:
    field: np.ndarray
    equatorial: bool


def dbar_apply(g: GaugeData, lam, section: np.ndarray) -> DbarResult:
    """``(1+lam^2) D_x s + i(1-lam^2) D_y s + [(1+lam)^2 Ax + i(1-lam^2) Ay] s``.

    ``section`` has the block shape of the gauge data up to its last axis
    (a matrix or a column of vectors). The result is centre-cropped by the
    stencil width in x and y. At ``|lam| = 1`` the operator is still finite;
    the result is flagged ``equatorial``.
    """
    lam = complex(lam)
    D = _Diff(g)
    s = np.asarray(section, dtype=complex)
    sx, sy, Ax, Ay, s0 = align(D.x(s), D.y(s), g.Ax, g.Ay, s)
    coef = (1 + lam) ** 2 * Ax + 1j * (1 - lam * lam) * Ay
    out = (1 + lam * lam) * sx + 1j * (1 - lam * lam) * sy + matmul(coef, s0)
    equatorial = abs(abs(lam) - 1) < 1e-12
    if equatorial:
        warnings.warn("dbar_apply evaluated on the equator |lambda| = 1", RuntimeWarning, stacklevel=2)
    return DbarResult(out, equatorial)


def lax_apply(g: GaugeData, lam, section: np.ndarray, which: int = 2) -> np.ndarray:
    """Apply ``D1`` (``which=1``) or ``D2`` (``which=2``) to a section block."""
    lam = _check_lambda(lam)
    D = _Diff(g)
    s = np.asarray(section, dtype=complex)
    M1, M2 = lax_coefficients(g, lam)
    if which == 1:
        ds, M, s0 = align(_delta1(D, s, lam), M1, s)
    elif which == 2:
        ds, M, s0 = align(_delta2(D, s, lam), M2, s)
    else:
        raise PreconditionError("which must be 1 or 2")
    return ds + matmul(M, s0)


def crop_gauge(g: GaugeData, k: int) -> GaugeData:
    """Drop ``k`` padding layers (space and time) from a gauge block."""
    if k > g.pad:
        raise PreconditionError("cannot crop beyond the padding")
    sl = (slice(k, -k or None),) * 3
    return GaugeData(g.Ax[sl], g.Ay[sl], g.At[sl], g.Phi[sl], g.grid, g.t, g.dt, g.pad - k, g.width)


def eta_coord(z, lam):
    """``eta = (z - lam^2 conj(z)) / (1 - |lam|^2)``."""
    lam = complex(lam)
    den = 1 - abs(lam) ** 2
    if abs(den) < 1e-14:
        raise SingularityError(f"eta is undefined on the equator |lambda| = 1 (lambda = {lam})")
    z = np.asarray(z, dtype=complex)
    out = (z - lam * lam * np.conj(z)) / den
    return complex(out) if out.ndim == 0 else out
