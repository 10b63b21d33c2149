"""Adapter for the elliptic problem

    -div(c(x, y, theta) grad u) + 8 u = 150   on [0, 1]^2,   u = 0 on the boundary,
    c = 50 + 0.3 * sum_j xi_j nu_j c_j(x, y),  xi_j ~ U(-0.5, 0.5).

After P1 discretization the system is ``(K_0 + sum_j xi_j K_j) u = F``.
"""

import numpy as np

from . import fem2d, klexp, sampling
from .errors import DegenerateError, NearSingularSampleError, SolverError
from .separated import evaluate_at_sample


class EllipticProblem:
    """Sample-based Galerkin updates for the affine stochastic FEM system.

    Fields ``d`` are vectors over the interior nodes of ``op.pattern``; the
    inner product is the P1 mass matrix.
    """

    def __init__(self, op, ensemble):
        if ensemble.M != op.M:
            raise ValueError(f"ensemble has M={ensemble.M}, operator has M={op.M}")
        self.op = op
        self.pattern = op.pattern
        self.ensemble = ensemble
        self.xi = ensemble.samples
        self.n_samples = ensemble.N

    # -- helpers ----------------------------------------------------------

    def inner(self, a, b):
        return float(self.pattern.quad(self.op.mass, a, b))

    def _xi_dot(self, vec):
        if self.op.M == 0:
            return np.zeros(self.n_samples)
        return self.xi @ vec

    def e_tensor(self, di, dk):
        """``e[j] = d_i^T K_j d_k`` for j = 0..M (index 0 is the mean operator)."""
        w = di[self.pattern.rows] * dk[self.pattern.indices]
        return np.concatenate([[w @ self.op.K0], w @ self.op.Kj])

    def c_coeffs(self, wgt):
        """``E{w xi_j}`` for j = 0..M with xi_0 = 1."""
        return float(np.mean(wgt)), sampling.weighted_means(wgt, self.xi)

    # -- Galerkin updates ---------------------------------------------------

    def deterministic_update(self, lam, sol):
        lam = np.asarray(lam, dtype=float)
        c0, cj = self.c_coeffs(lam * lam)
        if not c0 > 0.0:
            raise DegenerateError("E{lambda_k^2} = 0: deterministic system is singular")
        K = self.op.combine(c0, cj)
        F = np.mean(lam) * self.op.F
        for lam_i, d_i in zip(sol.lambdas, sol.modes):
            a0, aj = self.c_coeffs(lam * lam_i)
            F = F - self.pattern.matvec(self.op.combine(a0, aj), d_i)
        try:
            return fem2d.solve_sparse(self.pattern.matrix(K), F)
        except SolverError as exc:
            raise DegenerateError(f"deterministic system is singular: {exc}") from exc

    def stochastic_update(self, d, sol, lam_prev=None):
        e_kk = self.e_tensor(d, d)
        b = e_kk[0] + self._xi_dot(e_kk[1:])
        a = np.full(self.n_samples, float(d @ self.op.F))
        for lam_i, d_i in zip(sol.lambdas, sol.modes):
            e_ki = self.e_tensor(d, d_i)
            a -= lam_i * (e_ki[0] + self._xi_dot(e_ki[1:]))
        small = np.abs(b) < 1e-12 * abs(e_kk[0])
        if np.any(small):
            n = int(np.flatnonzero(small)[0])
            raise NearSingularSampleError(f"b_k(theta_{n}) = {b[n]:.3e} is near zero", n)
        return a / b

    # -- per-sample diagnostics -----------------------------------------------

    def sample_matrix_data(self, n):
        return self.op.combine(1.0, self.xi[n] if self.op.M else np.zeros(0))

    def direct_solve(self, n):
        """Per-sample solve of ``K(theta_n) u = F``."""
        return fem2d.solve_sparse(self.pattern.matrix(self.sample_matrix_data(n)), self.op.F)

    def sample_residual(self, sol, n):
        """``||K(theta_n) u_n - F|| / ||F||``."""
        u = evaluate_at_sample(sol, n, zero=self.op.F)
        r = self.pattern.matvec(self.sample_matrix_data(n), u) - self.op.F
        return float(np.linalg.norm(r) / np.linalg.norm(self.op.F))

    def probe_functional(self, x, y):
        """Interior-vector ``w`` with ``w @ d`` = barycentric value of ``d`` at (x, y)."""
        idx, wts = self.pattern.mesh.point_weights(x, y)
        w = np.zeros(self.pattern.n)
        for i, wt in zip(idx, wts):
            loc = self.pattern.local[i]
            if loc >= 0:
                w[loc] += wt
        return w

    def probe_samples(self, sol, x=0.5, y=0.5):
        w = self.probe_functional(x, y)
        return sol.combine([w @ d for d in sol.modes])

    def full_field(self, d):
        return fem2d.full_field(self.pattern, d)


def build_elliptic(M, N, seed, mesh_nodes=808, mesh=None, kl=None, scale=0.3):
    """Mesh, KL basis, operator family and ensemble for the elliptic benchmark."""
    mesh = fem2d.mesh_square(mesh_nodes) if mesh is None else mesh
    if M > 0 and kl is None:
        kl = klexp.exp_kernel_eigenpairs(mesh, M)
    op = fem2d.assemble_affine_operator(mesh, kl if M > 0 else None, scale=scale)
    ens = sampling.make_ensemble(sampling.Distribution.UNIFORM, N, M, seed)
    return EllipticProblem(op, ens)
