"""Grids, matrix-valued fields, sampling, finite-difference currents and
unitary projection.

Array layout: a field on a grid is stored as ``data[j, i]`` with ``j``
indexing ``y`` and ``i`` indexing ``x``, followed by the two matrix axes.
Space-time blocks used by the stencil code carry a leading time axis,
``block[k, j, i, :, :]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DegeneracyError, DomainError, InvariantError

SCHEMES = {"order-2": 1, "order-4": 2}

UNITARY_TOL = 1e-10

# Relative step for centred differences of closed-form sources without an
# exact derivative hook; scaled by max(1, r) so far-field differences keep
# their significant digits.
FD_REL_STEP = 1e-4


def scheme_width(scheme: str) -> int:
    """Half-width of the central-difference stencil for ``scheme``."""
    try:
        return SCHEMES[scheme]
    except KeyError:
        raise ConfigurationError(
            f"unknown scheme {scheme!r}; expected one of {sorted(SCHEMES)}", field="scheme"
        ) from None


# ---------------------------------------------------------------------------
# small-matrix algebra on stacks
# ---------------------------------------------------------------------------


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batched product of stacks of small matrices.

    numpy's ``@`` is slow for millions of 2x2 products; an explicit loop over
    the matrix indices vectorizes over the stack instead.
    """
    n, m = a.shape[-2], b.shape[-1]
    k = a.shape[-1]
    if k > 4:
        return a @ b
    out = np.empty(np.broadcast_shapes(a.shape[:-2], b.shape[:-2]) + (n, m),
                   dtype=np.result_type(a, b))
    for i in range(n):
        for j in range(m):
            s = a[..., i, 0] * b[..., 0, j]
            for p in range(1, k):
                s = s + a[..., i, p] * b[..., p, j]
            out[..., i, j] = s
    return out


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return matmul(a, b) - matmul(b, a)


def frobenius(a: np.ndarray) -> np.ndarray:
    """Pointwise Frobenius norm over the trailing matrix axes."""
    return np.sqrt(np.sum(np.abs(a) ** 2, axis=(-2, -1)))


def inverse(J: np.ndarray, unitary: bool) -> np.ndarray:
    return dagger(J) if unitary else np.linalg.inv(J)


def unitarize(M: np.ndarray) -> np.ndarray:
    """Nearest unitary matrix (Frobenius norm) via the polar decomposition.

    Works on a single matrix or on any stack of matrices. The polar factor
    ``M (M^H M)^{-1/2}`` is ``W V^H`` for the SVD ``M = W S V^H``; its
    determinant carries the phase of ``det M``.
    """
    M = np.asarray(M, dtype=complex)
    W, S, Vh = np.linalg.svd(M)
    smin, smax = S[..., -1], S[..., 0]
    bad = ~(smin > 1e-12 * smax)
    if np.any(bad):
        idx = np.argwhere(np.atleast_1d(bad))[0]
        raise DegeneracyError(
            f"matrix is numerically singular (smallest/largest singular value "
            f"ratio <= 1e-12) at stack index {tuple(int(i) for i in idx)}"
        )
    return matmul(W, Vh)


# ---------------------------------------------------------------------------
# grids and snapshots
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Uniform Cartesian grid on the ``t = const`` plane.

    Node ``(i, j)`` sits at ``origin + (i*h, j*h)``.
    """

    nx: int
    ny: int
    h: float
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ConfigurationError("grid point counts must be integers", field="grid")
        if self.nx < 8 or self.ny < 8:
            raise ConfigurationError(
                f"grid needs at least 8x8 nodes, got {self.nx}x{self.ny}", field="grid"
            )
        if not (math.isfinite(self.h) and self.h > 0):
            raise ConfigurationError(f"grid spacing must be positive, got {self.h}", field="h")
        origin = tuple(float(v) for v in self.origin)
        if len(origin) != 2 or not all(math.isfinite(v) for v in origin):
            raise ConfigurationError("grid origin must be a finite pair", field="origin")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))
        object.__setattr__(self, "h", float(self.h))

    @classmethod
    def from_extent(cls, xmin, xmax, ymin, ymax, h) -> "GridSpec":
        nx = int(round((xmax - xmin) / h)) + 1
        ny = int(round((ymax - ymin) / h)) + 1
        return cls(nx, ny, h, (xmin, ymin))

    @classmethod
    def square(cls, half_width: float, h: float) -> "GridSpec":
        """Grid on ``[-half_width, half_width]^2``."""
        return cls.from_extent(-half_width, half_width, -half_width, half_width, h)

    def node(self, i: int, j: int) -> tuple:
        return (self.origin[0] + i * self.h, self.origin[1] + j * self.h)

    @property
    def x(self) -> np.ndarray:
        return self.origin[0] + self.h * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.origin[1] + self.h * np.arange(self.ny)

    @property
    def extent(self) -> tuple:
        return (self.origin[0], self.origin[0] + (self.nx - 1) * self.h,
                self.origin[1], self.origin[1] + (self.ny - 1) * self.h)

    @property
    def area(self) -> float:
        return (self.nx - 1) * (self.ny - 1) * self.h ** 2

    def mesh(self):
        """Coordinate arrays ``X[j, i], Y[j, i]``."""
        return np.meshgrid(self.x, self.y, indexing="xy")

    def shrink(self, k: int) -> "GridSpec":
        """The grid with ``k`` nodes removed from every side."""
        return GridSpec(self.nx - 2 * k, self.ny - 2 * k, self.h,
                        (self.origin[0] + k * self.h, self.origin[1] + k * self.h))

    def trapezoid_weights(self) -> np.ndarray:
        wx = np.full(self.nx, self.h)
        wx[[0, -1]] *= 0.5
        wy = np.full(self.ny, self.h)
        wy[[0, -1]] *= 0.5
        return wy[:, None] * wx[None, :]


@dataclass
class MatrixField:
    """A matrix field sampled on a grid at one time."""

    grid: GridSpec
    data: np.ndarray
    t: float = 0.0
    unitary: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        g = self.grid
        if self.data.ndim != 4 or self.data.shape[:2] != (g.ny, g.nx) \
                or self.data.shape[2] != self.data.shape[3]:
            raise ConfigurationError(
                f"field data shape {self.data.shape} does not match grid "
                f"({g.ny}, {g.nx}, N, N)", field="data"
            )

    @property
    def N(self) -> int:
        return self.data.shape[-1]

    def unitarity_defect(self) -> np.ndarray:
        """Pointwise max-entry norm of ``J^H J - I``."""
        eye = np.eye(self.N)
        return np.max(np.abs(matmul(dagger(self.data), self.data) - eye), axis=(-2, -1))

    def validate(self) -> "MatrixField":
        if not np.all(np.isfinite(self.data)):
            j, i = np.argwhere(~np.all(np.isfinite(self.data), axis=(-2, -1)))[0]
            raise InvariantError(f"non-finite entry at node (i={i}, j={j})", node=(int(i), int(j)))
        if self.unitary:
            defect = self.unitarity_defect()
            j, i = np.unravel_index(int(np.argmax(defect)), defect.shape)
            if defect[j, i] > UNITARY_TOL:
                raise InvariantError(
                    f"field flagged unitary but |J^H J - I| = {defect[j, i]:.3e} "
                    f"at worst node (i={i}, j={j})", node=(int(i), int(j))
                )
        return self


# ---------------------------------------------------------------------------
# field sources
# ---------------------------------------------------------------------------


class FieldSource:
    """A matrix field ``J(x, y, t)`` that can be evaluated at arbitrary points.

    Subclasses implement :meth:`evaluate`; closed-form sources may also
    implement :meth:`derivatives` for exact first derivatives.
    """

    N: int = 2
    unitary: bool = True
    special: bool = False
    time_step: Optional[float] = None
    grid_step: Optional[float] = None

    def evaluate(self, x, y, t) -> np.ndarray:
        raise NotImplementedError

    def derivatives(self, x, y, t):
        """Return ``(J, Jx, Jy, Jt)`` or ``None`` when no exact hook exists."""
        return None

    @property
    def has_derivatives(self) -> bool:
        return type(self).derivatives is not FieldSource.derivatives

    def __call__(self, x, y, t):
        return self.evaluate(x, y, t)


class AnalyticSource(FieldSource):
    """Closed-form source built from callables.

    ``func(x, y, t)`` returns the field with shape ``broadcast + (N, N)``;
    ``deriv(x, y, t)`` optionally returns ``(J, Jx, Jy, Jt)``.
    """

    def __init__(self, func: Callable, N: int, deriv: Optional[Callable] = None,
                 unitary: bool = True, special: bool = False, name: str = "analytic"):
        self._func = func
        self._deriv = deriv
        self.N = N
        self.unitary = unitary
        self.special = special
        self.name = name

    def evaluate(self, x, y, t):
        x, y, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, t)))
        return np.asarray(self._func(x, y, t), dtype=complex)

    def derivatives(self, x, y, t):
        if self._deriv is None:
            return None
        x, y, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, t)))
        return tuple(np.asarray(a, dtype=complex) for a in self._deriv(x, y, t))

    @property
    def has_derivatives(self) -> bool:
        return self._deriv is not None

    def __repr__(self):
        return f"AnalyticSource({self.name!r}, N={self.N})"


class LeftTranslated(FieldSource):
    """The field ``U0 @ J`` for a constant matrix ``U0``; currents are unchanged."""

    def __init__(self, source: FieldSource, U0):
        self.source = source
        self.U0 = np.asarray(U0, dtype=complex)
        self.N = source.N
        self.unitary = source.unitary
        self.special = source.special and abs(np.linalg.det(self.U0) - 1) < 1e-12
        self.time_step = source.time_step
        self.grid_step = source.grid_step

    def evaluate(self, x, y, t):
        return matmul(self.U0, self.source.evaluate(x, y, t))

    def derivatives(self, x, y, t):
        d = self.source.derivatives(x, y, t)
        if d is None:
            return None
        return tuple(matmul(self.U0, a) for a in d)

    @property
    def has_derivatives(self) -> bool:
        return self.source.has_derivatives


def _catmull_rom_weights(s: np.ndarray) -> np.ndarray:
    s2, s3 = s * s, s * s * s
    return np.stack([
        0.5 * (-s3 + 2 * s2 - s),
        0.5 * (3 * s3 - 5 * s2 + 2),
        0.5 * (-3 * s3 + 4 * s2 + s),
        0.5 * (s3 - s2),
    ], axis=-1)


def _linear_weights(s: np.ndarray) -> np.ndarray:
    z = np.zeros_like(s)
    return np.stack([z, 1 - s, s, z], axis=-1)


class SampledSource(FieldSource):
    """A trajectory of snapshots at uniform time steps, interpolated in space-time.

    Interpolation is tensor-product linear (``order=1``) or Catmull-Rom cubic
    (``order=3``, C^1 and exact at the nodes). A single snapshot is a static
    field: it answers every time. Queries outside the space-time hull raise
    :class:`DomainError`.
    """

    def __init__(self, trajectory: Sequence[MatrixField], order: int = 3):
        if not trajectory:
            raise ConfigurationError("empty trajectory", field="trajectory")
        if order not in (1, 3):
            raise ConfigurationError("interpolation order must be 1 or 3", field="order")
        grid = trajectory[0].grid
        for f in trajectory:
            if f.grid != grid:
                raise ConfigurationError("trajectory slices must share one grid", field="trajectory")
        times = np.array([f.t for f in trajectory], dtype=float)
        if len(times) > 1:
            dts = np.diff(times)
            dt = float(np.mean(dts))
            if dt == 0 or np.max(np.abs(dts - dt)) > 1e-9 * abs(dt):
                raise ConfigurationError("trajectory time steps must be uniform", field="trajectory")
            if dt < 0:
                trajectory = list(reversed(trajectory))
                times = times[::-1]
                dt = -dt
            self.time_step = dt
        else:
            self.time_step = None
        self.trajectory = list(trajectory)
        self.grid = grid
        self.grid_step = grid.h
        self.order = order
        self.times = times
        self.N = trajectory[0].N
        self.unitary = all(f.unitary for f in trajectory)
        self.special = False
        data = np.stack([f.data for f in self.trajectory])
        self._data = self._pad_linear(data)

    @staticmethod
    def _pad_linear(data: np.ndarray) -> np.ndarray:
        # one ghost layer per interpolation axis, by linear extrapolation
        for ax in range(3):
            n = data.shape[ax]
            first = np.take(data, [0], axis=ax)
            last = np.take(data, [n - 1], axis=ax)
            if n > 1:
                lo = 2 * first - np.take(data, [1], axis=ax)
                hi = 2 * last - np.take(data, [n - 2], axis=ax)
            else:
                lo, hi = first, last
            data = np.concatenate([lo, data, hi], axis=ax)
        return data

    @property
    def hull(self) -> tuple:
        x0, x1, y0, y1 = self.grid.extent
        return (x0, x1, y0, y1, float(self.times[0]), float(self.times[-1]))

    def contains(self, x, y, t) -> np.ndarray:
        x0, x1, y0, y1, t0, t1 = self.hull
        ex = 1e-9 * self.grid.h
        inside = (x >= x0 - ex) & (x <= x1 + ex) & (y >= y0 - ex) & (y <= y1 + ex)
        if len(self.times) == 1:
            return inside
        et = 1e-9 * self.time_step
        return inside & (t >= t0 - et) & (t <= t1 + et)

    def _locate(self, p: np.ndarray, n: int):
        near = np.rint(p)
        snap = np.abs(p - near) < 1e-9
        p = np.where(snap, near, p)
        i = np.clip(np.floor(p), 0, max(n - 2, 0)).astype(int)
        s = p - i
        weights = _catmull_rom_weights(s) if self.order == 3 else _linear_weights(s)
        if n == 1:
            weights = np.zeros(p.shape + (4,))
            weights[..., 1] = 1.0
        return i, weights

    def evaluate(self, x, y, t):
        x, y, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, t)))
        inside = self.contains(x, y, t)
        if not np.all(inside):
            k = np.argwhere(~np.atleast_1d(inside))[0]
            xs, ys, ts = (np.atleast_1d(v)[tuple(k)] for v in (x, y, t))
            raise DomainError(
                f"query ({xs:.6g}, {ys:.6g}, {ts:.6g}) outside sampled hull "
                f"x in [{self.hull[0]:.6g}, {self.hull[1]:.6g}], "
                f"y in [{self.hull[2]:.6g}, {self.hull[3]:.6g}], "
                f"t in [{self.hull[4]:.6g}, {self.hull[5]:.6g}]", hull=self.hull
            )
        g = self.grid
        nt = len(self.times)
        ix, wx = self._locate((x - g.origin[0]) / g.h, g.nx)
        iy, wy = self._locate((y - g.origin[1]) / g.h, g.ny)
        if nt > 1:
            it, wt = self._locate((t - self.times[0]) / self.time_step, nt)
        else:
            it, wt = self._locate(np.zeros_like(t), 1)
        out = np.zeros(x.shape + (self.N, self.N), dtype=complex)
        D = self._data
        for a in range(4):
            wa = wt[..., a]
            if not np.any(wa):
                continue
            for b in range(4):
                wab = wa * wy[..., b]
                if not np.any(wab):
                    continue
                for c in range(4):
                    w = wab * wx[..., c]
                    if not np.any(w):
                        continue
                    # ghost padding shifts every index by one
                    out += w[..., None, None] * D[it + a, iy + b, ix + c]
        if self.unitary and nt >= 1:
            exact = np.all((wt == 1) | (wt == 0), axis=-1) & np.all((wy == 1) | (wy == 0), axis=-1) \
                & np.all((wx == 1) | (wx == 0), axis=-1)
            if not np.all(exact):
                out = np.where(exact[..., None, None], out, unitarize(out))
        return out

    def slice_at(self, k: int) -> MatrixField:
        return self.trajectory[k]


def sample(source: FieldSource, x, y, t) -> np.ndarray:
    """``J(x, y, t)``; vectorizes over array arguments."""
    return source.evaluate(x, y, t)


def sample_field(source: FieldSource, grid: GridSpec, t: float) -> MatrixField:
    X, Y = grid.mesh()
    data = source.evaluate(X, Y, np.full_like(X, t))
    return MatrixField(grid, data, t=float(t), unitary=source.unitary)


def point_currents(source: FieldSource, x, y, t):
    """Currents ``(Lx, Ly, Lt) = J^{-1} dJ`` at arbitrary points.

    Uses the exact derivative hook when the source has one; otherwise centred
    differences (step ``h`` and ``dt`` for sampled sources, a small relative
    step for closed forms).
    """
    x, y, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, t)))
    d = source.derivatives(x, y, t) if source.has_derivatives else None
    if d is not None:
        J, Jx, Jy, Jt = d
    else:
        J = source.evaluate(x, y, t)
        if source.grid_step is not None:
            hx = np.full(x.shape, source.grid_step)
        else:
            hx = FD_REL_STEP * np.maximum(1.0, np.hypot(x, y))
        ht = np.full(x.shape, source.time_step) if source.time_step is not None else hx
        hx_, ht_ = hx[..., None, None], ht[..., None, None]
        Jx = (source.evaluate(x + hx, y, t) - source.evaluate(x - hx, y, t)) / (2 * hx_)
        Jy = (source.evaluate(x, y + hx, t) - source.evaluate(x, y - hx, t)) / (2 * hx_)
        Jt = (source.evaluate(x, y, t + ht) - source.evaluate(x, y, t - ht)) / (2 * ht_)
    Ji = inverse(J, source.unitary)
    return matmul(Ji, Jx), matmul(Ji, Jy), matmul(Ji, Jt)


# ---------------------------------------------------------------------------
# space-time stencil blocks
# ---------------------------------------------------------------------------


def block_coordinates(grid: GridSpec, t: float, pad: int, tpad: int, dt: float):
    xs = grid.origin[0] + grid.h * np.arange(-pad, grid.nx + pad)
    ys = grid.origin[1] + grid.h * np.arange(-pad, grid.ny + pad)
    ts = t + dt * np.arange(-tpad, tpad + 1)
    T, Y, X = np.meshgrid(ts, ys, xs, indexing="ij")
    return X, Y, T


def time_spacing(source: FieldSource, grid: GridSpec) -> float:
    """Time step used for stencils: the trajectory's own dt, else the grid h."""
    return source.time_step if source.time_step is not None else grid.h


def sample_block(source: FieldSource, grid: GridSpec, t: float, pad: int,
                 tpad: Optional[int] = None, dt: Optional[float] = None) -> np.ndarray:
    """Evaluate the source on the grid padded by ``pad`` nodes and ``tpad``
    time levels each side; shape ``(2*tpad+1, ny+2*pad, nx+2*pad, N, N)``."""
    tpad = pad if tpad is None else tpad
    dt = time_spacing(source, grid) if dt is None else dt
    X, Y, T = block_coordinates(grid, t, pad, tpad, dt)
    return source.evaluate(X, Y, T)


def cdiff(a: np.ndarray, axis: int, step: float, width: int) -> np.ndarray:
    """Central difference along block axis ``axis``; that axis shrinks by
    ``width`` on each side."""
    n = a.shape[axis]
    if n < 2 * width + 1:
        raise DomainError(f"stencil of half-width {width} needs {2 * width + 1} samples "
                          f"along axis {axis}, have {n}")

    def sl(k):
        idx = [slice(None)] * a.ndim
        idx[axis] = slice(width + k, n - width + k)
        return a[tuple(idx)]

    if width == 1:
        return (sl(1) - sl(-1)) / (2 * step)
    if width == 2:
        return (8 * (sl(1) - sl(-1)) - (sl(2) - sl(-2))) / (12 * step)
    raise ConfigurationError(f"unsupported stencil width {width}")


def align(*arrays):
    """Centre-crop block arrays to their common (smallest) shape on axes 0-2."""
    target = [min(a.shape[ax] for a in arrays) for ax in range(3)]
    out = []
    for a in arrays:
        idx = []
        for ax in range(3):
            extra = a.shape[ax] - target[ax]
            if extra % 2:
                raise ValueError("block arrays are not concentric")
            k = extra // 2
            idx.append(slice(k, a.shape[ax] - k))
        out.append(a[tuple(idx)])
    return out if len(out) > 1 else out[0]


def project_algebra(L: np.ndarray, special: bool = False) -> np.ndarray:
    """Anti-hermitian part of ``L`` (traceless too when ``special``).

    Difference quotients of a unitary field are anti-hermitian only up to the
    truncation error; projecting removes that O(h^2) component so the
    currents lie in the Lie algebra exactly.
    """
    A = 0.5 * (L - dagger(L))
    if special:
        n = L.shape[-1]
        tr = np.trace(A, axis1=-2, axis2=-1)
        A = A - (tr / n)[..., None, None] * np.eye(n)
    return A


def current_block(Jb: np.ndarray, h: float, dt: float, width: int, unitary: bool = True,
                  special: bool = False):
    """Currents on a space-time block; every axis shrinks by ``width``.

    For unitary fields the difference quotients are projected onto the Lie
    algebra (see :func:`project_algebra`).
    """
    Jx = cdiff(Jb, 2, h, width)
    Jy = cdiff(Jb, 1, h, width)
    Jt = cdiff(Jb, 0, dt, width)
    Jc, Jx, Jy, Jt = align(Jb, Jx, Jy, Jt)
    Ji = inverse(Jc, unitary)
    out = (matmul(Ji, Jx), matmul(Ji, Jy), matmul(Ji, Jt))
    if unitary:
        out = tuple(project_algebra(L, special) for L in out)
    return out


@dataclass
class CurrentSet:
    """Lie-algebra currents ``J^{-1} d_mu J`` on one time slice."""

    Lx: np.ndarray
    Ly: np.ndarray
    Lt: np.ndarray
    grid: GridSpec
    t: float
    special: bool = False

    def antihermitian_defect(self) -> float:
        """Largest ``sup|L + L^H| / (1 + sup|L|)`` over the three currents."""
        worst = 0.0
        for L in (self.Lx, self.Ly, self.Lt):
            worst = max(worst, float(np.max(np.abs(L + dagger(L)))) / (1 + float(np.max(np.abs(L)))))
        return worst

    def trace_defect(self) -> float:
        worst = 0.0
        for L in (self.Lx, self.Ly, self.Lt):
            tr = np.abs(np.trace(L, axis1=-2, axis2=-1))
            worst = max(worst, float(np.max(tr)) / (1 + float(np.max(np.abs(L)))))
        return worst


def currents(source: FieldSource, grid: GridSpec, t: float, scheme: str = "order-2") -> CurrentSet:
    """Finite-difference currents on ``grid`` at time ``t``.

    Central differences of the chosen order in x, y and t; the time spacing is
    the trajectory step for sampled sources and the grid spacing otherwise.
    """
    w = scheme_width(scheme)
    dt = time_spacing(source, grid)
    Jb = sample_block(source, grid, t, pad=w, tpad=w, dt=dt)
    Lx, Ly, Lt = current_block(Jb, grid.h, dt, w, source.unitary, source.special)
    return CurrentSet(Lx[0], Ly[0], Lt[0], grid, float(t), special=source.special)
