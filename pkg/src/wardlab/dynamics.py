"""The chiral equation with torsion term: residual, energy and a leapfrog
initial-value solver.

The field equation in current form is

    D_t Lt - D_x Lx - D_y Ly + [Ly, Lt] = 0,   L_mu = J^{-1} D_mu J.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DegeneracyError, EvolutionBlowUpError
from .io import csv_text
from .field import (FieldSource, GridSpec, MatrixField, SampledSource, align,
                    cdiff, commutator, current_block, currents, frobenius, inverse,
                    matmul, point_currents, sample_block, sample_field, scheme_width,
                    time_spacing, unitarize)


@dataclass
class ResidualReport:
    """Pointwise Frobenius norm of a matrix residual with its sup and l2 norms."""

    field: np.ndarray
    sup: float
    l2: float
    grid: Optional[GridSpec] = None

    @classmethod
    def from_matrix(cls, R: np.ndarray, grid: GridSpec) -> "ResidualReport":
        norms = frobenius(R)
        sup = float(np.max(norms)) if norms.size else 0.0
        l2 = float(math.sqrt(math.fsum((norms ** 2 * grid.trapezoid_weights()).ravel())))
        return cls(norms, sup, l2, grid)


def ward_residual(source: FieldSource, grid: GridSpec, t: float = 0.0,
                  scheme: str = "order-2") -> ResidualReport:
    """``D_t Lt - D_x Lx - D_y Ly + [Ly, Lt]`` with central differences.

    Currents are differenced from ``J`` and then differenced again, so the
    source must be evaluable on the grid padded by twice the stencil width in
    space and time.
    """
    w = scheme_width(scheme)
    dt = time_spacing(source, grid)
    Jb = sample_block(source, grid, t, pad=2 * w, tpad=2 * w, dt=dt)
    Lx, Ly, Lt = current_block(Jb, grid.h, dt, w, source.unitary, source.special)
    dLt = cdiff(Lt, 0, dt, w)
    dLx = cdiff(Lx, 2, grid.h, w)
    dLy = cdiff(Ly, 1, grid.h, w)
    dLt, dLx, dLy, Ly, Lt = align(dLt, dLx, dLy, Ly, Lt)
    R = dLt - dLx - dLy + commutator(Ly, Lt)
    return ResidualReport.from_matrix(R[0], grid)


@dataclass
class EnergyReport:
    density: np.ndarray
    total: float
    time: float
    grid: Optional[GridSpec] = None


def energy_density(Lx: np.ndarray, Ly: np.ndarray, Lt: np.ndarray) -> np.ndarray:
    """``-tr(Lt^2 + Lx^2 + Ly^2) / 2``; non-negative for anti-hermitian currents."""
    s = matmul(Lt, Lt) + matmul(Lx, Lx) + matmul(Ly, Ly)
    return -0.5 * np.real(np.trace(s, axis1=-2, axis2=-1))


def energy(source: FieldSource, grid: GridSpec, t: float = 0.0, scheme: str = "order-2",
           exact: bool = False) -> EnergyReport:
    """Energy density and its trapezoid total on ``grid``.

    By default the currents are finite differences of the chosen scheme;
    ``exact=True`` uses the source's derivative hook where one exists.
    """
    if exact:
        X, Y = grid.mesh()
        Lx, Ly, Lt = point_currents(source, X, Y, np.full_like(X, t))
    else:
        cs = currents(source, grid, t, scheme)
        Lx, Ly, Lt = cs.Lx, cs.Ly, cs.Lt
    dens = energy_density(Lx, Ly, Lt)
    total = math.fsum((dens * grid.trapezoid_weights()).ravel())
    return EnergyReport(dens, float(total), float(t), grid)


def energy_density_at(source: FieldSource, x, y, t) -> np.ndarray:
    """Pointwise energy density from point currents."""
    Lx, Ly, Lt = point_currents(source, x, y, np.broadcast_to(t, np.shape(x)))
    return energy_density(Lx, Ly, Lt)


# ---------------------------------------------------------------------------
# evolution
# ---------------------------------------------------------------------------


def _acceleration(J: np.ndarray, Jt: np.ndarray, h: float, unitary: bool) -> np.ndarray:
    """``J_tt`` on the interior from the field and its time derivative.

    ``J_tt = J_t J^{-1} J_t + J (D_x Lx + D_y Ly - [Ly, Lt])`` with the
    spatial terms expanded as ``J_xx - J_x J^{-1} J_x`` (same for y) on
    three-point stencils.
    """
    Ji = inverse(J, unitary)
    c = (slice(1, -1), slice(1, -1))
    Jc, Jic, Jtc = J[c], Ji[c], Jt[c]
    Jx = (J[1:-1, 2:] - J[1:-1, :-2]) / (2 * h)
    Jy = (J[2:, 1:-1] - J[:-2, 1:-1]) / (2 * h)
    Jxx = (J[1:-1, 2:] - 2 * Jc + J[1:-1, :-2]) / (h * h)
    Jyy = (J[2:, 1:-1] - 2 * Jc + J[:-2, 1:-1]) / (h * h)
    Ly = matmul(Jic, Jy)
    Lt = matmul(Jic, Jtc)
    return (matmul(Jtc, matmul(Jic, Jtc)) + Jxx - matmul(Jx, matmul(Jic, Jx))
            + Jyy - matmul(Jy, matmul(Jic, Jy)) - matmul(Jc, commutator(Ly, Lt)))


def _project(M: np.ndarray, step: int) -> np.ndarray:
    try:
        return unitarize(M)
    except (DegeneracyError, np.linalg.LinAlgError) as exc:
        raise EvolutionBlowUpError(f"unitary projection failed at step {step}: {exc}", step=step) from None


def evolve(J0: MatrixField, J1: MatrixField, steps: int, dt: Optional[float] = None,
           boundary: Optional[FieldSource] = None, order: int = 3) -> SampledSource:
    """Leapfrog evolution from two consecutive slices.

    ``steps`` counts time steps from ``J0``; the trajectory holds
    ``steps + 1`` slices ending at ``J0.t + steps * dt``. The outer ring of
    nodes is held at the values of ``boundary`` (clamped mode) or, when
    ``boundary`` is None, frozen at the ring of ``J1``. A negative ``dt``
    runs the scheme backwards in time.
    """
    if J0.grid != J1.grid:
        raise ConfigurationError("J0 and J1 must share a grid", field="J1")
    if J0.N != J1.N:
        raise ConfigurationError("J0 and J1 must have the same matrix size", field="J1")
    if steps < 1:
        raise ConfigurationError("steps must be at least 1", field="steps")
    grid = J0.grid
    h = grid.h
    if dt is None:
        dt = J1.t - J0.t
    if not (math.isfinite(dt) and dt != 0):
        raise ConfigurationError("time step must be finite and non-zero", field="dt")
    if abs(abs(J1.t - J0.t) - abs(dt)) > 1e-9 * abs(dt) or (J1.t - J0.t) * dt < 0:
        raise ConfigurationError(f"J1.t - J0.t = {J1.t - J0.t} does not match dt = {dt}", field="dt")
    if abs(dt) > h / math.sqrt(2) * (1 + 1e-12):
        raise ConfigurationError(
            f"|dt| = {abs(dt):g} violates the stability bound h/sqrt(2) = {h / math.sqrt(2):g}",
            field="dt")
    unitary = J0.unitary and J1.unitary
    traj = [J0, J1]
    prev, cur = J0.data, J1.data
    ring = np.ones((grid.ny, grid.nx), dtype=bool)
    ring[1:-1, 1:-1] = False
    X, Y = grid.mesh()
    frozen = J1.data[ring]
    c = (slice(1, -1), slice(1, -1))
    # overflow surfaces as a non-finite slice and is reported below
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, steps):
            t_next = J0.t + (n + 1) * dt
            if boundary is not None:
                edge = boundary.evaluate(X[ring], Y[ring], np.full(int(ring.sum()), t_next))
            else:
                edge = frozen
            # predictor: backward-difference velocity
            Jt = (cur - prev) / dt
            nxt = np.array(cur)
            nxt[c] = 2 * cur[c] - prev[c] + dt * dt * _acceleration(cur, Jt, h, unitary)
            nxt[ring] = edge
            # corrector: centred velocity from the predicted slice
            Jt = (nxt - prev) / (2 * dt)
            nxt[c] = 2 * cur[c] - prev[c] + dt * dt * _acceleration(cur, Jt, h, unitary)
            if not np.all(np.isfinite(nxt)):
                raise EvolutionBlowUpError(f"non-finite field at step {n + 1}", step=n + 1)
            if unitary:
                nxt[c] = _project(nxt[c], n + 1)
            traj.append(MatrixField(grid, nxt, t=t_next, unitary=unitary))
            prev, cur = cur, nxt
    return SampledSource(traj, order=order)


def initial_slices(source: FieldSource, grid: GridSpec, t0: float, dt: float):
    """Two consecutive exact slices ``(J(t0), J(t0 + dt))``."""
    return sample_field(source, grid, t0), sample_field(source, grid, t0 + dt)


def evolution_error(traj: SampledSource, exact: FieldSource, k: int = -1) -> float:
    """Sup-norm (max entry) distance between slice ``k`` and the exact field."""
    f = traj.trajectory[k]
    ref = sample_field(exact, f.grid, f.t)
    return float(np.max(np.abs(f.data - ref.data)))


def trajectory_diagnostics(traj: SampledSource, scheme: str = "order-2") -> list:
    """Per-slice ``(step, t, sup_residual, l2_residual, energy)`` rows for the
    slices whose stencils fit inside the trajectory."""
    w = scheme_width(scheme)
    inner_r = traj.grid.shrink(2 * w)
    inner_e = traj.grid.shrink(w)
    rows = []
    for k in range(2 * w, len(traj.trajectory) - 2 * w):
        t = float(traj.times[k])
        r = ward_residual(traj, inner_r, t, scheme)
        e = energy(traj, inner_e, t, scheme)
        rows.append({"step": k, "t": t, "sup_residual": r.sup, "l2_residual": r.l2,
                     "energy": e.total})
    return rows


def diagnostics_csv(rows: Sequence[dict]) -> str:
    keys = ["step", "t", "sup_residual", "l2_residual", "energy"]
    return csv_text(keys, ([r[k] for k in keys] for r in rows))
