"""Uniform space-time grids with central differences and trapezoidal quadrature."""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class SpaceTimeGrid:
    Nt: int = 101
    Nx: int = 51
    x_max: float = 2.0
    t_max: float = 1.0

    def __post_init__(self):
        if self.Nt < 2 or self.Nx < 3:
            raise InvalidArgumentError(f"grid too small: Nt={self.Nt}, Nx={self.Nx}")
        if self.x_max <= 0 or self.t_max <= 0:
            raise InvalidArgumentError("grid extents must be positive")

    @property
    def dx(self):
        return self.x_max / (self.Nx - 1)

    @property
    def dt(self):
        return self.t_max / (self.Nt - 1)

    @property
    def x(self):
        return np.linspace(0.0, self.x_max, self.Nx)

    @property
    def t(self):
        return np.linspace(0.0, self.t_max, self.Nt)

    def trapezoid_weights(self):
        """(Nt, Nx) weights so that ``(w * f).sum()`` is the 2D trapezoid rule."""
        wt = np.full(self.Nt, self.dt)
        wt[[0, -1]] *= 0.5
        wx = np.full(self.Nx, self.dx)
        wx[[0, -1]] *= 0.5
        return np.outer(wt, wx)

    def index(self, x, t):
        """Nearest grid indices (i_t, i_x) of a probe point."""
        if not (0 <= x <= self.x_max and 0 <= t <= self.t_max):
            raise InvalidArgumentError(f"probe ({x}, {t}) outside the grid")
        return int(round(t / self.dt)), int(round(x / self.dx))


@dataclass
class SpaceTimeField:
    """Values on a grid, rows are time slices: shape (Nt, Nx)."""

    values: np.ndarray
    dx: float
    dt: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 2 or v.shape[1] < 3:
            raise InvalidArgumentError(f"bad field shape {v.shape}")
        if self.dx <= 0 or self.dt <= 0:
            raise InvalidArgumentError("spacings must be positive")
        self.values = v

    @classmethod
    def on(cls, grid, values):
        return cls(values, grid.dx, grid.dt)


def _wrap(field, values):
    return SpaceTimeField(values, field.dx, field.dt)


def ddx_values(values, dx):
    return np.gradient(values, dx, axis=-1, edge_order=2)


def ddt_values(values, dt):
    return np.gradient(values, dt, axis=-2, edge_order=2)


def ddx(field):
    """Second-order central differences in x, second-order one-sided at the ends."""
    return _wrap(field, ddx_values(field.values, field.dx))


def ddt(field):
    return _wrap(field, ddt_values(field.values, field.dt))


def integrate_xt(field):
    """Trapezoidal rule in t and in x."""
    inner = trapezoid(field.values, dx=field.dx, axis=1)
    return float(trapezoid(inner, dx=field.dt))
