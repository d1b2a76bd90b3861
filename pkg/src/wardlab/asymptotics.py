"""Far-field behaviour: the ``1/r`` boundary coefficient ``J1(theta)`` and the
decay rate of the energy density."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import energy_density_at
from .errors import ConfigurationError
from .io import csv_text
from .field import FieldSource, frobenius

DEGENERATE_LEVEL = 1e-13


class DegenerateFitWarning(UserWarning):
    """The sampled quantity vanishes at every radius, so no power law is defined."""


def _check_radii(radii) -> np.ndarray:
    r = np.asarray(radii, dtype=float)
    if r.ndim != 1 or len(r) < 3:
        raise ConfigurationError("need at least three radii", field="radii")
    if not np.all(np.isfinite(r)) or np.any(r <= 0) or np.any(np.diff(r) <= 0):
        raise ConfigurationError("radii must be positive and strictly increasing", field="radii")
    return r


def _thetas(n_theta: int) -> np.ndarray:
    if n_theta < 1:
        raise ConfigurationError("n_theta must be positive", field="n_theta")
    return 2 * math.pi * np.arange(n_theta) / n_theta


def loglog_slope(r: np.ndarray, values: np.ndarray):
    """Unweighted least-squares slope of ``log(values)`` against ``log(r)``
    and the RMS residual of the fit."""
    lr, lv = np.log(r), np.log(values)
    A = np.stack([lr, np.ones_like(lr)], axis=1)
    coef, *_ = np.linalg.lstsq(A, lv, rcond=None)
    resid = lv - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(resid ** 2)))


def richardson_j1(A1: np.ndarray, A2: np.ndarray, q: float) -> np.ndarray:
    """Eliminate the ``1/r`` correction from ``A(r) = r (J - I)`` sampled at
    ``r1`` and ``r2 = q r1``."""
    return (q * A2 - A1) / (q - 1)


@dataclass
class BoundaryFit:
    thetas: np.ndarray
    radii: np.ndarray
    J1_samples: np.ndarray
    exponent: float
    residual_of_fit: float
    exponents: np.ndarray
    degenerate: bool = False

    def continuity(self) -> float:
        """Largest jump of ``J1`` between adjacent angles, relative to ``max |J1|``."""
        J1 = self.J1_samples
        jumps = frobenius(np.roll(J1, -1, axis=0) - J1)
        scale = float(np.max(frobenius(J1)))
        return float(np.max(jumps) / scale) if scale > 0 else 0.0

    def antihermitian_defect(self) -> float:
        """``max |J1 + J1^H| / max |J1|``."""
        J1 = self.J1_samples
        scale = float(np.max(frobenius(J1)))
        d = frobenius(J1 + np.conj(np.swapaxes(J1, -1, -2)))
        return float(np.max(d) / scale) if scale > 0 else 0.0


def _samples(source: FieldSource, t: float, radii: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    R, TH = np.meshgrid(radii, thetas, indexing="ij")
    J = source.evaluate(R * np.cos(TH), R * np.sin(TH), np.full(R.shape, float(t)))
    return J - np.eye(source.N)


def boundary_profile(source: FieldSource, t: float = 0.0, radii: Sequence[float] = (25, 50, 100, 200),
                     n_theta: int = 64) -> BoundaryFit:
    """Fit ``|J - I| ~ r^p`` per angle and extrapolate ``J1(theta)``.

    The exponent is the mean of the per-angle slopes. ``J1`` comes from the
    two largest radii by Richardson extrapolation of ``r (J - I)``.
    """
    r = _check_radii(radii)
    th = _thetas(n_theta)
    D = _samples(source, t, r, th)  # (n_r, n_theta, N, N)
    norms = frobenius(D)
    q = r[-1] / r[-2]
    J1 = richardson_j1(r[-2] * D[-2], r[-1] * D[-1], q)
    if np.all(norms < DEGENERATE_LEVEL):
        warnings.warn("field is trivial at the sampled radii; decay exponent undefined",
                      DegenerateFitWarning, stacklevel=2)
        return BoundaryFit(th, r, J1, float("nan"), float("nan"),
                           np.full(len(th), np.nan), degenerate=True)
    slopes, resids = [], []
    for k in range(len(th)):
        col = np.maximum(norms[:, k], 1e-300)
        s, e = loglog_slope(r, col)
        slopes.append(s)
        resids.append(e)
    slopes = np.array(slopes)
    return BoundaryFit(th, r, J1, float(np.mean(slopes)), float(np.max(resids)), slopes)


@dataclass
class DecayProfile:
    radii: np.ndarray
    density: np.ndarray
    slope: float
    residual_of_fit: float
    degenerate: bool = False

    def to_csv(self) -> str:
        return csv_text(["r", "theta_avg_energy", "fit_slope"],
                        ((r, e, self.slope) for r, e in zip(self.radii, self.density)))


def decay_profile(source: FieldSource, t: float = 0.0, radii: Sequence[float] = (25, 50, 100, 200),
                  n_theta: int = 64) -> DecayProfile:
    """Angle-averaged energy density on circles and its log-log slope."""
    r = _check_radii(radii)
    th = _thetas(n_theta)
    R, TH = np.meshgrid(r, th, indexing="ij")
    dens = energy_density_at(source, R * np.cos(TH), R * np.sin(TH), float(t))
    avg = np.array([math.fsum(row) / len(row) for row in dens])
    if np.all(np.abs(avg) <= 0.0) or np.all(avg < 1e-300):
        warnings.warn("energy density vanishes at every sampled radius; decay slope undefined",
                      DegenerateFitWarning, stacklevel=2)
        return DecayProfile(r, avg, float("nan"), float("nan"), degenerate=True)
    slope, resid = loglog_slope(r, np.maximum(avg, 1e-300))
    return DecayProfile(r, avg, slope, resid)


def decay_exponent(source: FieldSource, t: float = 0.0, radii: Sequence[float] = (25, 50, 100, 200),
                   n_theta: int = 64) -> float:
    """Log-log slope of the angle-averaged energy density (``nan`` if degenerate)."""
    return decay_profile(source, t, radii, n_theta).slope
