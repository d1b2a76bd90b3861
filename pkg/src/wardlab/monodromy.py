"""Transport along straight lines in a time slice.

Along ``iota(u) = (x0 + u cos(theta), y0 + u sin(theta))`` the frame solves

    F'(u) = -K(u) F,   K = (1 + cos theta)/2 Lx + sin(theta)/2 (Ly + Lt).

Two charts cover the line. The compactified chart ``v = c tan(s/2)``
(``v`` measured from the foot of the perpendicular dropped from a chosen
centre) maps the whole line onto ``s in (-pi, pi)``; the transformed
coefficient ``K dv/ds`` stays bounded because ``K = O(1/v^2)``. The truncated
chart ``v = c sinh(xi)`` covers a finite segment with steps that widen away
from the core.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np
from scipy.linalg import expm

from .errors import ConfigurationError, DataError, MonodromyGateError
from .io import csv_text
from .field import (FieldSource, GridSpec, MatrixField, frobenius, matmul,
                    point_currents)

S_EPS = 1e-9
DEFAULT_TOL = 1e-8
MAX_STEPS = 1 << 13
TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class Line:
    """Oriented line ``(x0, y0) + u (cos theta, sin theta)``."""

    theta: float
    x0: float = 0.0
    y0: float = 0.0

    def __post_init__(self):
        vals = (self.theta, self.x0, self.y0)
        if not all(math.isfinite(float(v)) for v in vals):
            raise ConfigurationError("line parameters must be finite", field="line")
        th = float(self.theta) % TWO_PI
        if th >= TWO_PI:
            th = 0.0
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "x0", float(self.x0))
        object.__setattr__(self, "y0", float(self.y0))

    @property
    def direction(self) -> tuple:
        return math.cos(self.theta), math.sin(self.theta)

    def point(self, u):
        cx, sy = self.direction
        return self.x0 + np.asarray(u) * cx, self.y0 + np.asarray(u) * sy


@dataclass(frozen=True)
class Compactified:
    """Whole-line transport through the point at infinity."""

    steps: Optional[int] = None
    scale: float = 1.0

    @property
    def label(self) -> str:
        return "compactified"


@dataclass(frozen=True)
class Truncated:
    """Transport over ``u in [-L, L]`` measured from the line's base point."""

    L: float
    steps: Optional[int] = None
    scale: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.L) and self.L > 0):
            raise ConfigurationError(f"truncation length must be positive, got {self.L}", field="L")

    @property
    def label(self) -> str:
        return "truncated"


Mode = Union[Compactified, Truncated]


def parse_mode(text: str, steps: Optional[int] = None) -> Mode:
    """``"compactified"`` or ``"truncated:L"``."""
    if text == "compactified":
        return Compactified(steps=steps)
    if text.startswith("truncated"):
        _, _, val = text.partition(":")
        try:
            return Truncated(float(val), steps=steps)
        except ValueError:
            raise ConfigurationError(f"bad transport mode {text!r}; use truncated:<L>", field="mode") from None
    raise ConfigurationError(f"unknown transport mode {text!r}", field="mode")


@dataclass
class TransportResult:
    M: np.ndarray
    truncation: Union[float, str]
    deviation: float
    steps: int
    error_estimate: float
    line: Optional[Line] = None

    def __post_init__(self):
        self.deviation = float(np.linalg.norm(self.M - np.eye(len(self.M))))


# ---------------------------------------------------------------------------
# generator and integrators
# ---------------------------------------------------------------------------


def generator(source: FieldSource, theta, x, y, t) -> np.ndarray:
    """``K = (1 + cos theta)/2 Lx + sin(theta)/2 (Ly + Lt)`` at points."""
    Lx, Ly, Lt = point_currents(source, x, y, np.broadcast_to(t, np.shape(x)))
    c = np.asarray(0.5 * (1 + np.cos(theta)))[..., None, None]
    s = np.asarray(0.5 * np.sin(theta))[..., None, None]
    return c * Lx + s * (Ly + Lt)


class _Chart:
    """Batch of lines with per-line chart parameters.

    ``v(s)`` is the position measured from each line's foot point; the
    chart is either ``tan`` (compactified) or ``sinh`` (truncated).
    """

    def __init__(self, source, t, theta, fx, fy, scale, kind):
        self.source = source
        self.t = t
        self.theta = np.asarray(theta, dtype=float)
        self.ex, self.ey = np.cos(self.theta), np.sin(self.theta)
        self.fx, self.fy = np.asarray(fx, float), np.asarray(fy, float)
        self.scale = scale
        self.kind = kind

    def v(self, s):
        if self.kind == "tan":
            return self.scale * np.tan(0.5 * s)
        return self.scale * np.sinh(s)

    def dv(self, s):
        if self.kind == "tan":
            v = self.scale * np.tan(0.5 * s)
            return 0.5 * self.scale * (1 + (v / self.scale) ** 2)
        return self.scale * np.cosh(s)

    def __call__(self, s) -> np.ndarray:
        """``dF/ds = G(s) F``."""
        v = self.v(s)
        K = generator(self.source, self.theta, self.fx + v * self.ex, self.fy + v * self.ey, self.t)
        G = -K * self.dv(s)[..., None, None]
        if not np.all(np.isfinite(G)):
            bad = ~np.all(np.isfinite(G), axis=(-2, -1))
            k = tuple(np.argwhere(np.atleast_1d(bad))[0])
            vb = float(np.atleast_1d(v)[k])
            raise DataError(f"non-finite transport coefficient at v = {vb:.6g} from the line foot", u=vb)
        return G


def _rk4(gen, s0, s1, n: int, F0: np.ndarray) -> np.ndarray:
    hs = (s1 - s0) / n
    hh = hs[..., None, None]
    F = F0.copy()
    s = s0.copy()
    g0 = gen(s)
    for _ in range(n):
        gm = gen(s + 0.5 * hs)
        g1 = gen(s + hs)
        k1 = matmul(g0, F)
        k2 = matmul(gm, F + 0.5 * hh * k1)
        k3 = matmul(gm, F + 0.5 * hh * k2)
        k4 = matmul(g1, F + hh * k3)
        F = F + hh / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        s = s + hs
        g0 = g1
    return F


def _magnus2(gen, s0, s1, n: int, F0: np.ndarray) -> np.ndarray:
    hs = (s1 - s0) / n
    F = F0.copy()
    s = s0.copy()
    for _ in range(n):
        Om = gen(s + 0.5 * hs) * hs[..., None, None]
        F = matmul(expm(Om), F)
        s = s + hs
    return F


INTEGRATORS = {"rk4": _rk4, "magnus2": _magnus2}


def integrate(gen, s0, s1, N: int, steps: Optional[int] = None, tol: float = DEFAULT_TOL,
              integrator: str = "rk4", start_steps: int = 64):
    """Integrate ``dF/ds = G(s) F`` from ``F(s0) = I`` to ``s1`` for a batch.

    With ``steps`` given, the step count is fixed; otherwise it doubles from
    ``start_steps`` until the largest Frobenius change over the batch drops
    below ``tol``. Returns ``(F, steps, error_estimate)``; the estimate is the
    last doubling change (or ``nan`` for a fixed step count).
    """
    try:
        step = INTEGRATORS[integrator]
    except KeyError:
        raise ConfigurationError(f"unknown integrator {integrator!r}", field="integrator") from None
    s0 = np.asarray(s0, dtype=float)
    s1 = np.asarray(s1, dtype=float)
    shape = np.broadcast_shapes(s0.shape, s1.shape)
    s0, s1 = np.broadcast_to(s0, shape).copy(), np.broadcast_to(s1, shape).copy()
    F0 = np.broadcast_to(np.eye(N, dtype=complex), shape + (N, N)).copy()
    if steps is not None:
        if steps < 1:
            raise ConfigurationError("steps must be positive", field="steps")
        return step(gen, s0, s1, int(steps), F0), int(steps), float("nan")
    n = start_steps
    prev = step(gen, s0, s1, n, F0)
    while True:
        n *= 2
        cur = step(gen, s0, s1, n, F0)
        err = float(np.max(frobenius(cur - prev))) if cur.size else 0.0
        if err < tol or n >= MAX_STEPS:
            if err >= tol:
                warnings.warn(f"transport did not reach tolerance {tol:g} at {n} steps "
                              f"(change {err:.3g})", RuntimeWarning, stacklevel=3)
            return cur, n, err
        prev = cur


# ---------------------------------------------------------------------------
# transport along lines
# ---------------------------------------------------------------------------


def _line_arrays(lines: Sequence[Line], center):
    th = np.array([ln.theta for ln in lines])
    ex, ey = np.cos(th), np.sin(th)
    bx = np.array([ln.x0 for ln in lines]) - center[0]
    by = np.array([ln.y0 for ln in lines]) - center[1]
    vb = bx * ex + by * ey  # base point position measured from the foot
    fx = center[0] + bx - vb * ex
    fy = center[1] + by - vb * ey
    return th, fx, fy, vb


def transport_many(source: FieldSource, lines: Sequence[Line], t: float = 0.0,
                   mode: Optional[Mode] = None, integrator: str = "rk4",
                   tol: float = DEFAULT_TOL, reverse: bool = False,
                   center=(0.0, 0.0)) -> List[TransportResult]:
    """Transport a batch of lines with one shared step count."""
    mode = Compactified() if mode is None else mode
    if not lines:
        return []
    th, fx, fy, vb = _line_arrays(lines, center)
    if isinstance(mode, Compactified):
        chart = _Chart(source, t, th, fx, fy, mode.scale, "tan")
        a = np.full(len(lines), -math.pi + S_EPS)
        b = np.full(len(lines), math.pi - S_EPS)
        label = "compactified"
    elif isinstance(mode, Truncated):
        chart = _Chart(source, t, th, fx, fy, mode.scale, "sinh")
        a = np.arcsinh((vb - mode.L) / mode.scale)
        b = np.arcsinh((vb + mode.L) / mode.scale)
        label = float(mode.L)
    else:
        raise ConfigurationError(f"unknown transport mode {mode!r}", field="mode")
    # reversal runs the same ODE in the opposite direction of the parameter
    s0, s1 = (b, a) if reverse else (a, b)
    M, n, err = integrate(chart, s0, s1, source.N, steps=mode.steps, tol=tol, integrator=integrator)
    return [TransportResult(M=M[k], truncation=label, deviation=0.0, steps=n,
                            error_estimate=err, line=ln) for k, ln in enumerate(lines)]


def transport(source: FieldSource, line: Line, t: float = 0.0, mode: Optional[Mode] = None,
              integrator: str = "rk4", tol: float = DEFAULT_TOL, reverse: bool = False,
              center=(0.0, 0.0)) -> TransportResult:
    """Transport matrix ``M = F(end)`` with ``F(start) = I``.

    ``reverse=True`` integrates the same ODE from the far end back to the
    near end, so the result is the inverse of the forward transport.
    """
    return transport_many(source, [line], t, mode, integrator, tol, reverse, center)[0]


def truncation_error_estimate(source: FieldSource, line: Line, L: float, t: float = 0.0,
                              tol: float = DEFAULT_TOL, center=(0.0, 0.0)) -> float:
    """``|M(L) - M(L/2)|``: the truncated transport's own estimate of its
    distance from the whole-line result under ``1/L`` convergence."""
    full = transport(source, line, t, Truncated(L), tol=tol, center=center)
    half = transport(source, line, t, Truncated(L / 2), tol=tol, center=center)
    return float(np.linalg.norm(full.M - half.M))


DEFAULT_OFFSETS = ((0.0, 0.0), (0.7, -0.4), (-1.5, 2.0), (3.0, 1.0), (-2.0, -3.0))


def default_thetas(n: int = 16) -> list:
    return [TWO_PI * k / n for k in range(n)]


@dataclass
class SweepReport:
    rows: list
    max_deviation: float
    mean_deviation: float
    mode: str

    def to_csv(self) -> str:
        keys = ["theta", "x0", "y0", "mode", "L_or_nodes", "deviation"]
        return csv_text(keys, ([r[k] for k in keys] for r in self.rows))


def null_monodromy_sweep(source: FieldSource, t: float = 0.0, thetas: Optional[Iterable] = None,
                         offsets: Optional[Iterable] = None, mode: Optional[Mode] = None,
                         integrator: str = "rk4", tol: float = DEFAULT_TOL,
                         center=(0.0, 0.0)) -> SweepReport:
    """Deviation ``|M - I|`` over the family of lines ``thetas x offsets``."""
    thetas = default_thetas() if thetas is None else list(thetas)
    offsets = DEFAULT_OFFSETS if offsets is None else [tuple(o) for o in offsets]
    mode = Compactified() if mode is None else mode
    lines = [Line(th, x0, y0) for th in thetas for (x0, y0) in offsets]
    results = transport_many(source, lines, t, mode, integrator, tol, center=center)
    rows = []
    for ln, res in zip(lines, results):
        extent = res.steps if isinstance(mode, Compactified) else float(mode.L)
        rows.append({"theta": ln.theta, "x0": ln.x0, "y0": ln.y0, "mode": mode.label,
                     "L_or_nodes": extent, "deviation": res.deviation})
    devs = np.array([r["deviation"] for r in rows])
    return SweepReport(rows=rows, max_deviation=float(devs.max()),
                       mean_deviation=float(math.fsum(devs) / len(devs)), mode=mode.label)


# ---------------------------------------------------------------------------
# frame fields
# ---------------------------------------------------------------------------


def gate_lines(grid: GridSpec, theta: float) -> list:
    x0, x1, y0, y1 = grid.extent
    pts = [(0.5 * (x0 + x1), 0.5 * (y0 + y1)), (x0, y0), (x1, y0), (x0, y1), (x1, y1)]
    return [Line(theta, px, py) for px, py in pts]


def frame_field(source: FieldSource, theta: float, grid: GridSpec, t: float = 0.0,
                gate: Optional[float] = 1e-2, steps: Optional[int] = None,
                tol: float = DEFAULT_TOL, scale: float = 1.0, center=(0.0, 0.0),
                integrator: str = "rk4") -> MatrixField:
    """Frame ``J_theta`` on ``grid``: at every node, the direction-``theta``
    transport from the far negative end of the line through that node.

    Before integrating, the whole-line monodromy of direction ``theta`` is
    measured on lines through the grid centre and corners; a deviation above
    ``gate`` raises :class:`MonodromyGateError`.
    """
    theta = float(theta) % TWO_PI
    if gate is not None:
        res = transport_many(source, gate_lines(grid, theta), t, Compactified(scale=scale),
                             integrator, tol, center=center)
        dev = max(r.deviation for r in res)
        if dev > gate:
            raise MonodromyGateError(
                f"null-monodromy deviation {dev:.3g} exceeds gate {gate:g} at theta={theta:.6g}",
                deviation=dev)
    X, Y = grid.mesh()
    ex, ey = math.cos(theta), math.sin(theta)
    bx, by = X - center[0], Y - center[1]
    vn = bx * ex + by * ey
    fx, fy = X - vn * ex, Y - vn * ey
    chart = _Chart(source, t, np.full(X.shape, theta), fx, fy, scale, "tan")
    s0 = np.full(X.shape, -math.pi + S_EPS)
    s1 = 2 * np.arctan(vn / scale)
    F, n, err = integrate(chart, s0, s1, source.N, steps=steps, tol=tol, integrator=integrator)
    meta = {"theta": theta, "steps": n}
    if not math.isnan(err):
        meta["error_estimate"] = err
    return MatrixField(grid, F, t=float(t), unitary=source.unitary, meta=meta)


# ---------------------------------------------------------------------------
# abelian (U(1)) line integrals
# ---------------------------------------------------------------------------


@dataclass
class RadonResult:
    I_total: float
    I_fund: float
    dt_radon: float
    nodes: int
    warning: Optional[str] = None

    def to_dict(self) -> dict:
        return {"I_total": self.I_total, "I_fund": self.I_fund, "dt_radon": self.dt_radon,
                "nodes": self.nodes, "warning": self.warning}


_GL_ORDER = 16


def _composite_gl(a: float, b: float, panels: int):
    x, w = np.polynomial.legendre.leggauss(_GL_ORDER)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def line_quadrature(func, a: float, b: float, tol: float = 1e-10, start: int = 8,
                    max_panels: int = 1 << 12):
    """Composite Gauss-Legendre of a vector-valued ``func`` on ``[a, b]``,
    doubling the panel count until every component changes by less than
    ``tol`` (relative to ``1 + |value|``)."""
    panels = start
    nodes, w = _composite_gl(a, b, panels)
    prev = np.tensordot(w, func(nodes), axes=(0, 0))
    while True:
        panels *= 2
        nodes, w = _composite_gl(a, b, panels)
        cur = np.tensordot(w, func(nodes), axes=(0, 0))
        change = np.max(np.abs(cur - prev) / (1 + np.abs(cur)))
        if change < tol or panels >= max_panels:
            return cur, len(nodes), bool(change < tol)
        prev = cur


def radon_u1(scalar, theta: float, base=(0.0, 0.0), t: float = 0.0, mode: Optional[Mode] = None,
             dt: float = 1e-4, tol: float = 1e-10, end_tol: float = 1e-6,
             center=(0.0, 0.0)) -> RadonResult:
    """Line integrals of a scalar field ``j`` along one line.

    ``I_total`` integrates ``(1 + cos theta) jx + sin theta (jy + jt)`` (twice
    the abelian transport exponent), ``I_fund`` integrates the tangential
    derivative ``cos theta jx + sin theta jy``, and ``dt_radon`` integrates the
    centred time difference ``(j(t + dt) - j(t - dt)) / (2 dt)``.
    """
    mode = Compactified() if mode is None else mode
    line = Line(theta, *base)
    th, fx, fy, vb = _line_arrays([line], center)
    ex, ey = math.cos(line.theta), math.sin(line.theta)
    fx, fy, vb = float(fx[0]), float(fy[0]), float(vb[0])
    c = mode.scale
    if isinstance(mode, Compactified):
        kind, a, b = "tan", -math.pi, math.pi
    else:
        kind, a, b = "sinh", math.asinh((vb - mode.L) / c), math.asinh((vb + mode.L) / c)

    def chart(s):
        if kind == "tan":
            v = c * np.tan(0.5 * s)
            return v, 0.5 * c * (1 + (v / c) ** 2)
        return c * np.sinh(s), c * np.cosh(s)

    def integrand(s):
        v, dv = chart(s)
        x, y = fx + v * ex, fy + v * ey
        jx, jy, jt = scalar.gradient(x, y, t)
        jd = (scalar.value(x, y, t + dt) - scalar.value(x, y, t - dt)) / (2 * dt)
        tot = (1 + ex) * jx + ey * (np.asarray(jy) + np.asarray(jt))
        fund = ex * jx + ey * jy
        return np.stack([tot * dv, fund * dv, jd * dv], axis=-1)

    vals, nodes, converged = line_quadrature(integrand, a, b, tol=tol)
    warning = None
    if not converged:
        warning = "line quadrature did not converge"
    if kind == "sinh":
        ends = []
        for s in (a, b):
            v, _ = chart(np.array([s]))
            x, y = fx + v * ex, fy + v * ey
            jx, jy, jt = scalar.gradient(x, y, t)
            ends.append(float(np.max(np.abs([(1 + ex) * jx + ey * (jy + jt)]))))
        if max(ends) > end_tol:
            warning = f"integrand {max(ends):.3g} at the truncation ends exceeds {end_tol:g}"
    if not np.all(np.isfinite(vals)):
        raise DataError("non-finite line integral", u=None)
    return RadonResult(I_total=float(vals[0]), I_fund=float(vals[1]), dt_radon=float(vals[2]),
                       nodes=nodes, warning=warning)
