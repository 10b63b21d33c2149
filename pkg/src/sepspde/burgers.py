"""Adapter for the inviscid Burgers equation with Brownian forcing

    u_t + (u^2 / 2)_x = gamma u_xx + f(t, theta),   (x, t) in [0, 2] x [0, 1],

with ``f = sqrt(2) sigma_f sum_j xi_j sin((j-1/2) pi t) / ((j-1/2) pi)``.

Initial and boundary data are not given with the equation; the defaults
here are ``u(x, 0) = 0`` and linear extrapolation (outflow) at both ends.

A nonzero initial profile is handled by lifting: the unforced solution
``ubar`` from ``u0`` enters the expansion as a fixed first couple with
``lambda = 1``, so every enrichment mode starts from ``d(x, 0) = 0``.  The
stochastic update only sees the equation residual, never the initial
condition, so without the lift the initial data would not be enforced.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels, klexp, sampling
from .errors import DegenerateError, InvalidArgumentError, NearSingularSampleError, StabilityError
from .fdgrid import SpaceTimeGrid, ddt_values, ddx_values
from .separated import SeparatedSolution


def _zero_profile(x):
    return np.zeros_like(x)


@dataclass
class BurgersConfig:
    M: int = 1000
    grid: SpaceTimeGrid = field(default_factory=SpaceTimeGrid)
    gamma: float = 0.0
    sigma_f: float = klexp.SIGMA_F
    initial_profile: Callable = _zero_profile
    cfl_limit: float = 1.0

    def __post_init__(self):
        if not self.sigma_f > 0:
            raise InvalidArgumentError("sigma_f must be positive")
        if self.gamma < 0:
            raise InvalidArgumentError("gamma must be non-negative")

    def u0(self):
        return np.asarray(self.initial_profile(self.grid.x), dtype=float)


def sine_profile(amplitude):
    def profile(x):
        return amplitude * np.sin(np.pi * x)
    return profile


def force_samples(config, ensemble):
    """(N, Nt) table of f(t_m, theta_n) for an explicit ensemble."""
    if ensemble.M != config.M:
        raise InvalidArgumentError(f"ensemble M={ensemble.M} does not match config M={config.M}")
    phi = klexp.brownian_basis(config.M, config.grid.t, config.sigma_f)
    return ensemble.samples @ phi.T


def force_table(config, N, seed, stream=sampling.SOLVER_STREAM, block=128):
    """Same table as :func:`force_samples` but streamed over column blocks,
    so the (N, M) ensemble is never held in memory."""
    t = config.grid.t
    out = np.zeros((N, t.size))
    for j0, tab in sampling.iter_column_blocks(sampling.Distribution.NORMAL, N, config.M, seed,
                                               block=block, stream=stream):
        w = (np.arange(j0 + 1, j0 + tab.shape[1] + 1) - 0.5) * np.pi
        phi = np.sqrt(2.0) * config.sigma_f * np.sin(np.outer(t, w)) / w[None, :]
        out += tab @ phi.T
    return out


class BurgersProblem:
    """Sample-based Galerkin updates; fields are (Nt, Nx) arrays."""

    def __init__(self, config, forces):
        self.config = config
        self.grid = config.grid
        self.forces = np.asarray(forces, dtype=float)
        if self.forces.shape[1] != self.grid.Nt:
            raise InvalidArgumentError("force table does not match the time grid")
        self.n_samples = self.forces.shape[0]
        self.W = self.grid.trapezoid_weights()
        self.u0 = config.u0()
        # dense difference matrices, identical stencils to fdgrid
        g = self.grid
        self.Dx = ddx_values(np.eye(g.Nx), g.dx).T
        self.Dt = ddt_values(np.eye(g.Nt), g.dt)
        self.Dxx = self.Dx @ self.Dx
        self.vertex_count = 0
        self.max_vertex_residual = 0.0

    def inner(self, a, b):
        return float(np.sum(self.W * a * b))

    def _dx(self, v):
        return v @ self.Dx.T

    def _dt(self, v):
        return self.Dt @ v

    def _dxx(self, v):
        return v @ self.Dxx.T

    # -- deterministic update ----------------------------------------------

    def _stack(self, sol):
        return np.stack(sol.modes), sol.lambda_matrix()

    def coefficients(self, lam, sol):
        """h1, h2 (scalars) and h3, h4 (space-time fields).

        Sums over couples are contracted before differentiating, so the cost
        is one derivative per term rather than one per pair of couples.
        """
        lam = np.asarray(lam, dtype=float)
        N = self.n_samples
        h1 = float(np.mean(lam * lam))
        h2 = 0.5 * float(np.mean(lam ** 3))
        h4 = np.repeat(((lam @ self.forces) / N)[:, None], self.grid.Nx, axis=1)
        if len(sol) == 0:
            return h1, h2, np.zeros_like(h4), h4
        D, L = self._stack(sol)
        h3 = np.tensordot(L @ (lam * lam) / N, D, axes=1)
        e = L @ lam / N
        ed = np.tensordot(e, D, axes=1)
        h4 -= self._dt(ed)
        if self.config.gamma:
            h4 += self.config.gamma * self._dxx(ed)
        wm = (L * lam) @ L.T / N
        h4 -= 0.5 * self._dx(np.einsum("il,itx,ltx->tx", wm, D, D, optimize=True))
        return h1, h2, h3, h4

    def initial_slice(self, lam, sol, h1):
        """Projection of the initial-condition residual onto lambda."""
        r0 = np.mean(lam) * self.u0
        for li, di in zip(sol.lambdas, sol.modes):
            r0 = r0 - float(np.mean(lam * li)) * di[0]
        return r0 / h1

    def deterministic_update(self, lam, sol):
        h1, h2, h3, h4 = self.coefficients(lam, sol)
        if not h1 > 0.0:
            raise DegenerateError("h_k1 = E{lambda_k^2} must be positive")
        d0 = self.initial_slice(lam, sol, h1)
        g = self.grid
        out, bad = _kernels.march(d0[None, :], np.array([h1]), np.array([h2]), h3, h4,
                                  np.zeros((1, g.Nt)), self.config.gamma * h1, g.dx, g.dt,
                                  self.config.cfl_limit)
        if bad >= 0:
            raise StabilityError(f"CFL limit exceeded at time step {bad}", step=bad)
        return out[0]

    def initial_solution(self):
        """Lifted starting expansion, or ``None`` when ``u0 == 0``."""
        if not np.any(self.u0):
            return None
        g = self.grid
        zero = np.zeros((g.Nt, g.Nx))
        out, bad = _kernels.march(self.u0[None, :], np.ones(1), np.full(1, 0.5), zero, zero,
                                  np.zeros((1, g.Nt)), self.config.gamma, g.dx, g.dt,
                                  self.config.cfl_limit)
        if bad >= 0:
            raise StabilityError(f"CFL limit exceeded at time step {bad} in the lifted solution", step=bad)
        return SeparatedSolution().with_couple(np.ones(self.n_samples), out[0], self.inner)

    # -- stochastic update --------------------------------------------------

    def quadratic_coefficients(self, d, sol):
        """Scalar ``a`` and per-sample ``b``, ``c`` of ``a l^2 + b l + c = 0``.

        Every integral ``int d * Op(v)`` with a linear difference operator is
        evaluated as ``sum(Op^T(W d) * v)``, so products of couples are never
        differentiated one pair at a time.
        """
        gam = self.config.gamma
        wd = self.W * d
        zx = wd @ self.Dx
        zt = self.Dt.T @ wd
        a = 0.5 * float(np.sum(zx * d * d))
        b0 = float(np.sum(zt * d))
        zxx = wd @ self.Dxx if gam else None
        if gam:
            b0 -= gam * float(np.sum(zxx * d))
        c = -(self.forces @ wd.sum(axis=1))
        if len(sol) == 0:
            return a, np.full(self.n_samples, b0), c
        D, L = self._stack(sol)
        B = np.einsum("tx,itx->i", zx * d, D)
        C = np.einsum("tx,itx->i", zt, D)
        if gam:
            C -= gam * np.einsum("tx,itx->i", zxx, D)
        Q = 0.5 * np.einsum("tx,itx,ltx->il", zx, D, D, optimize=True)
        b = b0 + B @ L
        c = c + C @ L + np.einsum("in,il,ln->n", L, Q, L, optimize=True)
        return a, b, c

    def stochastic_update(self, d, sol, lam_prev=None):
        a, b, c = self.quadratic_coefficients(d, sol)
        has_prev = lam_prev is not None
        prev = lam_prev if has_prev else np.zeros(self.n_samples)
        lam, status = _kernels.quadratic_select(a, b, c, prev, has_prev)
        bad = np.flatnonzero(status == _kernels.ROOT_INCONSISTENT)
        if bad.size:
            n = int(bad[0])
            raise NearSingularSampleError(f"inconsistent quadratic at sample {n}: a~0, b~0, c={c[n]:.3e}", n)
        vert = status == _kernels.ROOT_VERTEX
        self.vertex_count = int(vert.sum())
        if self.vertex_count:
            res = np.abs((a * lam[vert] + b[vert]) * lam[vert] + c[vert])
            self.max_vertex_residual = float(res.max())
        return lam

    # -- diagnostics --------------------------------------------------------

    def probe_samples(self, sol, x=1.0, t=0.5):
        it, ix = self.grid.index(x, t)
        return sol.combine([d[it, ix] for d in sol.modes])

    def spatial_variance(self, sol, samples=None):
        """Max over (n, t) of the variance in x of ``u_k(., t, theta_n)``."""
        if len(sol) == 0:
            return 0.0
        dev = np.stack([d - d.mean(axis=1, keepdims=True) for d in sol.modes])  # (k, Nt, Nx)
        L = sol.lambda_matrix()
        if samples is not None:
            L = L[:, samples]
        worst = 0.0
        for start in range(0, L.shape[1], 2048):
            u = np.tensordot(L[:, start:start + 2048].T, dev, axes=(1, 0))  # (n, Nt, Nx)
            worst = max(worst, float((u * u).mean(axis=2).max()))
        return worst


def build_burgers(M, N, seed, grid=None, gamma=0.0, initial_profile=None, sigma_f=klexp.SIGMA_F):
    cfg = BurgersConfig(M=M, grid=grid or SpaceTimeGrid(), gamma=gamma, sigma_f=sigma_f,
                        initial_profile=initial_profile or _zero_profile)
    return BurgersProblem(cfg, force_table(cfg, N, seed))


def solve_samples(config, forces, batch=1024):
    """Per-sample march of the full Burgers equation; returns (N, Nt, Nx) lazily by batch.

    Yields ``(start, block)`` with ``block`` of shape (b, Nt, Nx).
    """
    g = config.grid
    u0 = config.u0()
    zero_field = np.zeros((g.Nt, g.Nx))
    for start in range(0, forces.shape[0], batch):
        f = forces[start:start + batch]
        B = f.shape[0]
        out, bad = _kernels.march(np.repeat(u0[None, :], B, axis=0), np.ones(B), np.full(B, 0.5),
                                  zero_field, zero_field, f, config.gamma, g.dx, g.dt,
                                  config.cfl_limit)
        yield start, out, bad
