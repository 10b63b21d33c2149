"""Kernel density estimates and distances between sampled distributions."""

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import trapezoid

from . import _kernels
from .errors import InvalidArgumentError

MIN_SAMPLES = 100


@dataclass(frozen=True)
class DensityCurve:
    """Density on a grid.

    A sample set with zero spread has no density; it is reported as a point
    mass at ``point_mass`` and ``density`` is all zeros.
    """

    grid: np.ndarray
    density: np.ndarray
    bandwidth: float
    point_mass: Optional[float] = None

    @property
    def is_point_mass(self):
        return self.point_mass is not None

    def integral(self):
        return 1.0 if self.is_point_mass else float(trapezoid(self.density, self.grid))


def silverman_bandwidth(samples):
    """``0.9 min(std, IQR / 1.34) n^(-1/5)``; falls back to std when the IQR is zero."""
    x = np.asarray(samples, dtype=float)
    std = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(std, (q75 - q25) / 1.34) if q75 > q25 else std
    return 0.9 * spread * x.size ** -0.2


def default_grid(*sample_sets, n=512, width=6.0):
    """Uniform grid covering mean +- ``width`` std of every sample set."""
    if not sample_sets:
        raise InvalidArgumentError("need at least one sample set")
    lo, hi = np.inf, -np.inf
    for s in sample_sets:
        s = np.asarray(s, dtype=float)
        m, sd = float(np.mean(s)), float(np.std(s))
        lo, hi = min(lo, m - width * sd), max(hi, m + width * sd)
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    return np.linspace(lo, hi, n)


def kde(samples, grid, bandwidth=None):
    """Gaussian kernel density estimate evaluated on ``grid``."""
    x = np.asarray(samples, dtype=float).ravel()
    grid = np.asarray(grid, dtype=float)
    if x.size < MIN_SAMPLES:
        raise InvalidArgumentError(f"kde needs at least {MIN_SAMPLES} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("samples contain non-finite values")
    if np.ptp(x) == 0.0:
        return DensityCurve(grid, np.zeros_like(grid), 0.0, point_mass=float(x[0]))
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    if not h > 0:
        h = float(np.std(x)) * x.size ** -0.2
    return DensityCurve(grid, _kernels.kde_gauss(x, grid, h), h)


def pdf_l1_distance(a, b):
    """Trapezoidal ``int |p_a - p_b|`` on a shared grid; in [0, 2].

    Point masses are mutually singular with any density, so the distance
    is 2 unless both are point masses at the same location.
    """
    if a.grid.shape != b.grid.shape or not np.array_equal(a.grid, b.grid):
        raise InvalidArgumentError("curves are not on the same grid")
    if a.is_point_mass or b.is_point_mass:
        same = a.is_point_mass and b.is_point_mass and a.point_mass == b.point_mass
        return 0.0 if same else 2.0
    return float(min(2.0, trapezoid(np.abs(a.density - b.density), a.grid)))


def write_curve_csv(curve, path):
    """Two columns: value, density."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["value", "density"])
        for g, p in zip(curve.grid, curve.density):
            w.writerow([format(float(g), ".17g"), format(float(p), ".17g")])


def read_curve_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return DensityCurve(data[:, 0], data[:, 1], float("nan"))
