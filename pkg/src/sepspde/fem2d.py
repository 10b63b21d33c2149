"""Linear triangular finite elements on the unit square and the unit disk.

Assembly is vectorized over elements.  Every operator assembled on a mesh
shares one CSR sparsity pattern over the interior (non-Dirichlet) nodes, so
an operator is just a value vector on that pattern and linear combinations
of operators are plain array arithmetic.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import Delaunay

from .errors import InvalidArgumentError, SepSPDEError, SolverError


@dataclass
class TriMesh:
    nodes: np.ndarray  # (n, 2)
    triangles: np.ndarray  # (t, 3) int, counter-clockwise
    boundary_nodes: np.ndarray  # sorted int indices

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    @property
    def interior_nodes(self):
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.boundary_nodes] = False
        return np.flatnonzero(mask)

    def areas(self):
        p = self.nodes[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def h_min(self):
        p = self.nodes[self.triangles]
        edges = np.concatenate([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]])
        return float(np.sqrt((edges ** 2).sum(axis=1)).min())

    def locate(self, x, y):
        """Containing triangle and barycentric weights of point (x, y)."""
        p = self.nodes[self.triangles]
        v0, v1, v2 = p[:, 0], p[:, 1], p[:, 2]
        det = (v1[:, 0] - v0[:, 0]) * (v2[:, 1] - v0[:, 1]) - (v2[:, 0] - v0[:, 0]) * (v1[:, 1] - v0[:, 1])
        l1 = ((x - v0[:, 0]) * (v2[:, 1] - v0[:, 1]) - (v2[:, 0] - v0[:, 0]) * (y - v0[:, 1])) / det
        l2 = ((v1[:, 0] - v0[:, 0]) * (y - v0[:, 1]) - (x - v0[:, 0]) * (v1[:, 1] - v0[:, 1])) / det
        l0 = 1.0 - l1 - l2
        bary = np.stack([l0, l1, l2], axis=1)
        worst = bary.min(axis=1)
        t = int(np.argmax(worst))
        if worst[t] < -1e-10:
            raise InvalidArgumentError(f"point ({x}, {y}) lies outside the mesh")
        return t, np.clip(bary[t], 0.0, 1.0)

    def point_weights(self, x, y):
        """Sparse interpolation row: (node indices, weights)."""
        t, w = self.locate(x, y)
        return self.triangles[t].copy(), w

    def save(self, path):
        """Plain-text dump: one record per line, ``v x y`` or ``t i j k``."""
        bset = set(self.boundary_nodes.tolist())
        with open(path, "w") as fh:
            for i, (x, y) in enumerate(self.nodes):
                fh.write(f"v {float(x)!r} {float(y)!r} {int(i in bset)}\n")
            for a, b, c in self.triangles:
                fh.write(f"t {a} {b} {c}\n")

    @classmethod
    def load(cls, path):
        nodes, flags, tris = [], [], []
        with open(path) as fh:
            for line in fh:
                parts = line.split()
                if not parts:
                    continue
                if parts[0] == "v":
                    nodes.append((float(parts[1]), float(parts[2])))
                    flags.append(int(parts[3]))
                elif parts[0] == "t":
                    tris.append(tuple(int(v) for v in parts[1:4]))
        return cls(np.array(nodes), np.array(tris, dtype=np.int64),
                   np.flatnonzero(np.array(flags, dtype=bool)))


def _orient(nodes, tris):
    p = nodes[tris]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    tris = tris.copy()
    neg = area < 0
    tris[neg] = tris[neg][:, [0, 2, 1]]
    if np.any(np.abs(area) <= 1e-14):
        raise SepSPDEError("degenerate triangle in mesh")
    return tris


def mesh_square(target_nodes=808):
    """Structured triangulation of [0, 1]^2 with about ``target_nodes`` nodes.

    Diagonals alternate between cells so the mesh has no preferred direction.
    """
    if target_nodes < 4:
        raise InvalidArgumentError("target_nodes must be >= 4")
    n = max(2, int(round(math.sqrt(target_nodes))))
    xs = np.linspace(0.0, 1.0, n)
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    tris = []
    for j in range(n - 1):
        for i in range(n - 1):
            a = j * n + i
            b, c, d = a + 1, a + n, a + n + 1
            if (i + j) % 2 == 0:
                tris += [(a, b, d), (a, d, c)]
            else:
                tris += [(a, b, c), (b, d, c)]
    tris = _orient(nodes, np.array(tris, dtype=np.int64))
    on_edge = (np.isclose(nodes[:, 0], 0) | np.isclose(nodes[:, 0], 1)
               | np.isclose(nodes[:, 1], 0) | np.isclose(nodes[:, 1], 1))
    return TriMesh(nodes, tris, np.flatnonzero(on_edge))


def mesh_disk(target_nodes=549):
    """Unit disk from concentric rings of 6k nodes, Delaunay-triangulated.

    ``R`` rings give ``1 + 3R(R+1)`` nodes and ``6R^2`` triangles.
    """
    if target_nodes < 4:
        raise InvalidArgumentError("target_nodes must be >= 4")
    R = max(1, int(round((-3 + math.sqrt(9 + 12 * (target_nodes - 1))) / 6)))
    pts = [(0.0, 0.0)]
    bnd = []
    for k in range(1, R + 1):
        r = k / R
        m = 6 * k
        th = 2 * math.pi * np.arange(m) / m
        start = len(pts)
        pts += list(zip(r * np.cos(th), r * np.sin(th)))
        if k == R:
            bnd = list(range(start, start + m))
    nodes = np.array(pts)
    tris = Delaunay(nodes).simplices.astype(np.int64)
    tris = _orient(nodes, tris)
    return TriMesh(nodes, tris, np.array(bnd, dtype=np.int64))


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


def _gradients(mesh):
    """Per-element P1 basis gradients (t, 3, 2) and areas (t,)."""
    p = mesh.nodes[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    # grad phi_i = (y_j - y_k, x_k - x_j) / (2A) with (i, j, k) cyclic
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    g = np.stack([b, c], axis=2) / (2 * area)[:, None, None]
    return g, area


class Pattern:
    """CSR sparsity pattern of P1 operators restricted to a set of free nodes.

    ``scatter`` maps the 9 local entries of every element to positions in the
    CSR value array (-1 for entries touching a Dirichlet node).
    """

    def __init__(self, mesh, free=None):
        self.mesh = mesh
        self.free = mesh.interior_nodes if free is None else np.asarray(free)
        n = mesh.n_nodes
        self.local = np.full(n, -1, dtype=np.int64)
        self.local[self.free] = np.arange(self.free.size)
        self.n = self.free.size
        tri = self.local[mesh.triangles]
        rows = np.repeat(tri, 3, axis=1).ravel()
        cols = np.tile(tri, (1, 3)).ravel()
        keep = (rows >= 0) & (cols >= 0)
        A = sp.csr_matrix((np.ones(keep.sum()), (rows[keep], cols[keep])), shape=(self.n, self.n))
        A.sum_duplicates()
        A.sort_indices()
        self.indptr = A.indptr
        self.indices = A.indices
        self.nnz = A.nnz
        self.rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        # position of each (row, col) in the CSR value array
        pos = np.full(rows.size, -1, dtype=np.int64)
        r, c = rows[keep], cols[keep]
        start = self.indptr[r]
        stop = self.indptr[r + 1]
        key = r.astype(np.int64) * self.n + c
        order_keys = self.rows.astype(np.int64) * self.n + self.indices
        pos_keep = np.searchsorted(order_keys, key)
        assert np.all((pos_keep >= start) & (pos_keep < stop))
        pos[keep] = pos_keep
        self.scatter = pos.reshape(-1, 9)
        self.transpose_perm = self._transpose_perm()

    def _transpose_perm(self):
        order_keys = self.rows.astype(np.int64) * self.n + self.indices
        tkeys = self.indices.astype(np.int64) * self.n + self.rows
        return np.searchsorted(order_keys, tkeys)

    def reduce(self, local_values):
        """Sum (t, 9) element contributions into a CSR value vector."""
        v = local_values.ravel()
        s = self.scatter.ravel()
        keep = s >= 0
        return np.bincount(s[keep], weights=v[keep], minlength=self.nnz)

    def matrix(self, data):
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def matvec(self, data, x):
        """``A @ x`` for one value vector, or a batch (nnz, m) -> (n, m)."""
        if data.ndim == 1:
            return np.bincount(self.rows, weights=data * x[self.indices], minlength=self.n)
        prod = data * x[self.indices][:, None]
        return _rowsum(self.rows, prod, self.n)

    def quad(self, data, u, v):
        """``u^T A v`` for value vector(s) ``data``; batch (nnz, m) -> (m,)."""
        w = u[self.rows] * v[self.indices]
        return w @ data


def _rowsum(rows, prod, n):
    out = np.zeros((n, prod.shape[1]))
    np.add.at(out, rows, prod)
    return out


def stiffness_locals(mesh, coeff_nodal):
    """Local diffusion matrices with a P1-interpolated coefficient.

    ``coeff_nodal`` is (n_nodes,) or (n_nodes, m).  The coefficient times
    constant P1 gradients integrates exactly to area * mean of the three
    vertex values (the edge-midpoint three-point rule gives the same).
    Returns (t, 9) or (t, 9, m).
    """
    g, area = _gradients(mesh)
    gg = np.einsum("tik,tjk->tij", g, g).reshape(-1, 9) * area[:, None]
    cv = np.asarray(coeff_nodal, dtype=float)
    cmean = cv[mesh.triangles].mean(axis=1)
    if cv.ndim == 1:
        return gg * cmean[:, None]
    return gg[:, :, None] * cmean[:, None, :]


def mass_locals(mesh, coeff=1.0):
    _, area = _gradients(mesh)
    ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    return area[:, None] * ref.ravel()[None, :] * coeff


def load_vector(mesh, f_nodal):
    """Consistent P1 load for a P1-interpolated source, full nodal vector."""
    _, area = _gradients(mesh)
    fv = np.broadcast_to(np.asarray(f_nodal, dtype=float), (mesh.n_nodes,))
    ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    loc = area[:, None] * (fv[mesh.triangles] @ ref)
    return np.bincount(mesh.triangles.ravel(), weights=loc.ravel(), minlength=mesh.n_nodes)


def coefficient_map(pattern):
    """Sparse (nnz, n_nodes) map taking a nodal diffusion coefficient to the
    CSR values of its stiffness matrix."""
    mesh = pattern.mesh
    g, area = _gradients(mesh)
    gg = np.einsum("tik,tjk->tij", g, g).reshape(-1, 9) * area[:, None] / 3.0
    s = pattern.scatter
    keep = s >= 0
    t_idx, l_idx = np.nonzero(keep)
    rows = np.repeat(s[keep], 3)
    cols = mesh.triangles[t_idx].ravel()
    vals = np.repeat(gg[t_idx, l_idx], 3)
    P = sp.csr_matrix((vals, (rows, cols)), shape=(pattern.nnz, mesh.n_nodes))
    P.sum_duplicates()
    return P


def assemble_stiffness(pattern, coeff_nodal):
    """Stiffness values on ``pattern``; ``coeff_nodal`` (n,) or (n, m)."""
    cv = np.asarray(coeff_nodal, dtype=float)
    if cv.ndim == 1:
        return pattern.reduce(stiffness_locals(pattern.mesh, cv))
    return np.asarray(coefficient_map(pattern) @ cv)


def assemble_mass(pattern, coeff=1.0):
    return pattern.reduce(mass_locals(pattern.mesh, coeff))


@dataclass
class StochasticOperator:
    """Affine family ``K(xi) = K_0 + sum_j xi_j K_j`` and load ``F``.

    ``K0`` is (nnz,), ``Kj`` is (nnz, M); ``F`` and ``mass`` live on the
    free (interior) nodes of ``pattern``.
    """

    pattern: Pattern
    K0: np.ndarray
    Kj: np.ndarray
    F: np.ndarray
    mass: np.ndarray

    @property
    def M(self):
        return self.Kj.shape[1]

    def combine(self, c0, cj):
        """Value vector of ``c0*K_0 + sum_j cj[j] K_j``."""
        out = c0 * self.K0
        if self.M:
            out = out + self.Kj @ cj
        return out

    def matrix(self, j):
        return self.pattern.matrix(self.K0 if j == 0 else self.Kj[:, j - 1])


def assemble_affine_operator(mesh, kl, a=8.0, f=150.0, mean_coeff=50.0, scale=0.3):
    """Stiffness family for ``-div(c grad u) + a u = f`` with
    ``c = mean_coeff + scale * sum_j xi_j nu_j c_j(x, y)``.

    ``kl`` may be ``None`` for the deterministic problem (M = 0).
    """
    pattern = Pattern(mesh)
    if kl is not None:
        if kl.modes is None or kl.modes.shape[0] != mesh.n_nodes:
            raise InvalidArgumentError("KL basis was not evaluated on this mesh")
        coeffs = scale * kl.modes * kl.nu[None, :]
        Kj = assemble_stiffness(pattern, coeffs)
    else:
        Kj = np.zeros((pattern.nnz, 0))
    K0 = assemble_stiffness(pattern, np.full(mesh.n_nodes, float(mean_coeff)))
    K0 = K0 + assemble_mass(pattern, a)
    F = load_vector(mesh, f)[pattern.free]
    mass = assemble_mass(pattern)
    return StochasticOperator(pattern, K0, Kj, F, mass)


def solve_sparse(K, rhs):
    """Direct sparse solve; ``K`` is a scipy sparse matrix.

    Raises :class:`SolverError` on a singular or badly conditioned system;
    the error carries a 1-norm condition estimate when one is available.
    """
    K = sp.csc_matrix(K)
    rhs = np.asarray(rhs, dtype=float)
    if K.shape[0] != K.shape[1] or K.shape[0] != rhs.shape[0]:
        raise InvalidArgumentError(f"shape mismatch {K.shape} vs {rhs.shape}")
    if K.nnz == 0 or not np.any(K.data):
        raise SolverError("matrix is identically zero", condition=math.inf)
    try:
        lu = spla.splu(K)
    except RuntimeError as exc:
        raise SolverError(f"sparse factorization failed: {exc}", condition=math.inf) from exc
    x = lu.solve(rhs)
    resid = np.linalg.norm(K @ x - rhs)
    scale = np.linalg.norm(rhs)
    if not np.all(np.isfinite(x)) or (scale > 0 and resid > 1e-8 * scale):
        cond = _condest(K, lu)
        raise SolverError(f"inaccurate solve (relative residual {resid / max(scale, 1e-300):.2e})",
                          condition=cond)
    return x


def _condest(K, lu):
    try:
        inv = spla.LinearOperator(K.shape, matvec=lu.solve, rmatvec=lambda v: lu.solve(v, trans="T"))
        return float(spla.norm(K, 1) * spla.onenormest(inv))
    except Exception:  # pragma: no cover - diagnostic only
        return math.inf


def full_field(pattern, values):
    """Embed interior values into a full nodal vector (zero on the boundary)."""
    values = np.asarray(values)
    out = np.zeros((pattern.mesh.n_nodes,) + values.shape[1:])
    out[pattern.free] = values
    return out
