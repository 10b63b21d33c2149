"""Adapter for the wave equation on the unit disk with a random initial shape

    u_tt - c Delta u = 0,   u(r, 0) = sqrt(2) sum_j xi_j sin(j pi r),   u_t(., 0) = 0,

with ``xi_j`` standard normal and ``u = 0`` on the unit circle.  Space is
P1 finite elements with the consistent mass matrix; time is the central
difference scheme.

The operator is deterministic, so the Galerkin projection in theta of the
deterministic update is a single deterministic wave solve from a projected
initial shape, and the stochastic update is a projection of the initial
condition residual.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse.linalg as spla
from scipy.integrate import trapezoid

from . import fem2d, klexp, sampling
from .errors import DegenerateError, InvalidArgumentError, StabilityError

DEGENERATE_SLICE = 1e-14


@dataclass
class WaveConfig:
    """Disk mesh, time grid and wave speed.

    ``c`` is a nodal array or a scalar; only ``c = 1`` is exercised by the
    benchmark.
    """

    mesh: fem2d.TriMesh = field(default_factory=fem2d.mesh_disk)
    Nt: int = 201
    t_max: float = 2.0
    c: object = 1.0
    M: int = 1000

    def __post_init__(self):
        if self.Nt < 3:
            raise InvalidArgumentError("Nt must be >= 3")
        if self.t_max <= 0:
            raise InvalidArgumentError("t_max must be positive")
        if self.M < 1:
            raise InvalidArgumentError("M must be >= 1")

    @property
    def dt(self):
        return self.t_max / (self.Nt - 1)

    @property
    def t(self):
        return np.linspace(0.0, self.t_max, self.Nt)


class WaveSolver:
    """Central-difference march ``M u'' + K u = 0`` on the interior nodes."""

    def __init__(self, config):
        self.config = config
        mesh = config.mesh
        self.pattern = fem2d.Pattern(mesh)
        cn = np.broadcast_to(np.asarray(config.c, dtype=float), (mesh.n_nodes,))
        self.K_data = fem2d.assemble_stiffness(self.pattern, np.ascontiguousarray(cn))
        self.M_data = fem2d.assemble_mass(self.pattern)
        self.K = self.pattern.matrix(self.K_data).tocsr()
        self.M = self.pattern.matrix(self.M_data).tocsc()
        self._lu = spla.splu(self.M)
        self.lambda_max = float(spla.eigsh(self.K, k=1, M=self.M, which="LM",
                                           return_eigenvectors=False, tol=1e-6)[0])
        self.dt_max = 2.0 / math.sqrt(self.lambda_max)
        if config.dt > self.dt_max:
            raise StabilityError(f"dt={config.dt:.4g} exceeds the central-difference bound {self.dt_max:.4g}",
                                 step=0)

    @property
    def n(self):
        return self.pattern.n

    def accel(self, u):
        """``-M^{-1} K u`` for a vector or an (n, B) block."""
        return -self._lu.solve(np.asarray(self.K @ u))

    def step(self, g):
        """All time slices from initial shape ``g`` and zero initial velocity.

        ``g`` is (n,) or (n, B); the result is (Nt, n) or (Nt, n, B).
        """
        g = np.asarray(g, dtype=float)
        if g.shape[0] != self.n:
            raise InvalidArgumentError(f"initial shape has {g.shape[0]} rows, expected {self.n}")
        Nt, dt2 = self.config.Nt, self.config.dt ** 2
        out = np.empty((Nt,) + g.shape)
        out[0] = g
        out[1] = g + 0.5 * dt2 * self.accel(g)
        for m in range(1, Nt - 1):
            out[m + 1] = 2.0 * out[m] - out[m - 1] + dt2 * self.accel(out[m])
        return out

    def residual(self, u):
        """Max-norm residual of the discrete scheme at interior time steps."""
        dt2 = self.config.dt ** 2
        r = self.M @ (u[2:] - 2.0 * u[1:-1] + u[:-2]).T + dt2 * (self.K @ u[1:-1].T)
        return float(np.abs(r).max()) if r.size else 0.0

    def energy(self, u):
        """``0.5 (v' M v' + v K v)`` at t_1..t_{Nt-2}, velocity by central differences."""
        v = (u[2:] - u[:-2]) / (2.0 * self.config.dt)
        w = u[1:-1]
        kin = np.einsum("ti,ti->t", v, (self.M @ v.T).T)
        pot = np.einsum("ti,ti->t", w, (self.K @ w.T).T)
        return 0.5 * (kin + pot)

    def mass_inner(self, a, b):
        return float(self.pattern.quad(self.M_data, a, b))

    def spacetime_inner(self, a, b):
        per_t = np.einsum("ti,ti->t", a, (self.M @ b.T).T)
        return float(trapezoid(per_t, dx=self.config.dt))


def wave_step(config_or_solver, g):
    """Space-time field from initial displacement ``g`` with zero initial velocity."""
    solver = config_or_solver if isinstance(config_or_solver, WaveSolver) else WaveSolver(config_or_solver)
    return solver.step(g)


class WaveProblem:
    """Galerkin updates; modes are (Nt, n_interior) arrays."""

    def __init__(self, solver, ensemble):
        if ensemble.M != solver.config.M:
            raise InvalidArgumentError(f"ensemble has M={ensemble.M}, config has M={solver.config.M}")
        self.solver = solver
        self.config = solver.config
        self.ensemble = ensemble
        self.xi = ensemble.samples
        self.n_samples = ensemble.N
        mesh = self.config.mesh
        free = solver.pattern.free
        r = np.hypot(mesh.nodes[free, 0], mesh.nodes[free, 1])
        self.S = klexp.wave_ic_basis(self.config.M, r)  # (n, M)

    def inner(self, a, b):
        return self.solver.spacetime_inner(a, b)

    def initial_shape(self, n):
        return self.S @ self.xi[n]

    def projected_shape(self, lam, sol):
        lam = np.asarray(lam, dtype=float)
        h = float(np.mean(lam * lam))
        if not h > 0.0:
            raise DegenerateError("E{lambda_k^2} = 0: lambda_k is identically zero")
        g = self.S @ sampling.weighted_means(lam, self.xi)
        for li, di in zip(sol.lambdas, sol.modes):
            g = g - float(np.mean(lam * li)) * di[0]
        return g / h

    def deterministic_update(self, lam, sol):
        return self.solver.step(self.projected_shape(lam, sol))

    def stochastic_update(self, d, sol, lam_prev=None):
        d0 = d[0]
        md0 = self.solver.M @ d0
        nrm = float(d0 @ md0)
        if nrm < DEGENERATE_SLICE:
            raise DegenerateError(f"initial slice of d_k is degenerate (<d, d>_M = {nrm:.3e})")
        lam = self.xi @ (self.S.T @ md0)
        for li, di in zip(sol.lambdas, sol.modes):
            lam = lam - li * float(di[0] @ md0)
        return lam / nrm

    def probe_functional(self, x, y):
        idx, wts = self.config.mesh.point_weights(x, y)
        w = np.zeros(self.solver.n)
        for i, wt in zip(idx, wts):
            loc = self.solver.pattern.local[i]
            if loc >= 0:
                w[loc] += wt
        return w

    def time_index(self, t):
        if not 0 <= t <= self.config.t_max:
            raise InvalidArgumentError(f"t={t} outside [0, {self.config.t_max}]")
        return int(round(t / self.config.dt))

    def probe_samples(self, sol, x=0.0, y=0.0, t=1.0):
        w = self.probe_functional(x, y)
        it = self.time_index(t)
        return sol.combine([w @ d[it] for d in sol.modes])


def build_wave(M, N, seed, mesh=None, Nt=201, t_max=2.0):
    cfg = WaveConfig(mesh=mesh if mesh is not None else fem2d.mesh_disk(), Nt=Nt, t_max=t_max, M=M)
    ens = sampling.generate(sampling.Distribution.NORMAL, N, M, seed)
    return WaveProblem(WaveSolver(cfg), ens)
