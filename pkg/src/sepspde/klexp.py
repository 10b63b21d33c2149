"""Karhunen-Loeve machinery.

* eigenpairs of the separable exponential kernel ``exp(-|x1-x2| - |y1-y2|)``
  on the unit square, built from the analytic 1D eigenpairs;
* the truncated KL series of a Brownian forcing in time;
* the radial sine series used as a random initial displacement.
"""

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, SepSPDEError


class KLRootError(SepSPDEError, RuntimeError):
    def __init__(self, message, index):
        super().__init__(message)
        self.index = index


def _char_fun(omega, m, c, a):
    # even modes (m even): c cos(wa) - w sin(wa); odd modes: w cos(wa) + c sin(wa)
    s, co = np.sin(omega * a), np.cos(omega * a)
    even = (m % 2) == 0
    f = np.where(even, c * co - omega * s, omega * co + c * s)
    fp = np.where(even,
                  -c * a * s - s - omega * a * co,
                  co - omega * a * s + c * a * co)
    return f, fp


def exp_kernel_1d(n, corr_length=1.0, length=1.0, tol=1e-12):
    """Leading ``n`` eigenpairs of ``exp(-|x-s|/corr_length)`` on ``[0, length]``.

    Returns ``(eigvals, omegas)``; eigenvalues are descending.  Root ``m`` is
    bracketed in ``(m*pi, (m+1)*pi) / length``: even ``m`` gives the cosine
    family, odd ``m`` the sine family.
    """
    if n < 1:
        raise InvalidArgumentError("need at least one eigenpair")
    a = 0.5 * length
    c = 1.0 / corr_length
    m = np.arange(n)
    lo = m * math.pi / (2 * a)
    hi = (m + 1) * math.pi / (2 * a)
    flo, _ = _char_fun(lo, m, c, a)
    fhi, _ = _char_fun(hi, m, c, a)
    bad = np.nonzero(np.sign(flo) * np.sign(fhi) >= 0)[0]
    if bad.size:
        raise KLRootError(f"cannot bracket 1D eigenvalue root {int(bad[0])}", int(bad[0]))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm, _ = _char_fun(mid, m, c, a)
        left = np.sign(fm) == np.sign(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)
        if np.max((hi - lo) / (1.0 + hi)) <= 1e-3 * tol:
            break
    omega = 0.5 * (lo + hi)
    for _ in range(3):
        f, fp = _char_fun(omega, m, c, a)
        step = f / fp
        cand = omega - step
        omega = np.where((cand > lo - tol) & (cand < hi + tol), cand, omega)
    f, _ = _char_fun(omega, m, c, a)
    scale = np.maximum(1.0, omega)
    bad = np.nonzero(np.abs(f) > 1e-9 * scale)[0]
    if bad.size:
        raise KLRootError(f"root {int(bad[0])} did not converge", int(bad[0]))
    lam = 2.0 * c / (omega ** 2 + c ** 2)
    return lam, omega


def eval_mode_1d(x, m, omega, length=1.0):
    """L2-normalized 1D eigenfunction ``m`` at points ``x``, sign fixed by ``phi(0) > 0``."""
    a = 0.5 * length
    s = np.asarray(x, dtype=float) - a
    if m % 2 == 0:
        phi = np.cos(omega * s) / math.sqrt(a + math.sin(2 * omega * a) / (2 * omega))
        sgn = math.copysign(1.0, math.cos(omega * a))
    else:
        phi = np.sin(omega * s) / math.sqrt(a - math.sin(2 * omega * a) / (2 * omega))
        sgn = math.copysign(1.0, -math.sin(omega * a))
    return sgn * phi


def top_tensor_pairs(eig1d, M):
    """Indices (i, j) of the M largest products ``eig1d[i]*eig1d[j]``.

    Ties are broken lexicographically on (i, j).
    """
    n = len(eig1d)
    heap = [(-eig1d[0] * eig1d[0], 0, 0)]
    seen = {(0, 0)}
    out = []
    while len(out) < M:
        if not heap:
            raise InvalidArgumentError(f"only {len(out)} tensor pairs available from {n} 1D modes")
        _, i, j = heapq.heappop(heap)
        out.append((i, j))
        for ii, jj in ((i + 1, j), (i, j + 1)):
            if ii < n and jj < n and (ii, jj) not in seen:
                seen.add((ii, jj))
                heapq.heappush(heap, (-eig1d[ii] * eig1d[jj], ii, jj))
    return np.array(out, dtype=np.int64).reshape(-1, 2)


@dataclass
class KLBasis:
    """Tensor-product KL eigenpairs on the unit square.

    ``nu[j]**2`` is the j-th kernel eigenvalue, ``pairs[j] = (p, q)`` the 1D
    indices so that ``c_j(x, y) = phi_p(x) * phi_q(y)``.  ``modes`` holds the
    nodal values (n_nodes, M) when the basis was built on a mesh; ``signs``
    records the flips applied so that each nodal mode starts positive.
    """

    nu: np.ndarray
    pairs: np.ndarray
    omega1d: np.ndarray
    corr_length: float = 1.0
    modes: np.ndarray = None
    signs: np.ndarray = None
    corr_model: str = field(default="exp(-|dx|/l - |dy|/l), l=1")

    @property
    def M(self):
        return len(self.nu)

    def evaluate(self, x, y):
        """Mode values at points; shape (len(x), M)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        used = np.unique(self.pairs)
        phx = {int(p): eval_mode_1d(x, int(p), self.omega1d[p]) for p in used}
        phy = {int(p): eval_mode_1d(y, int(p), self.omega1d[p]) for p in used}
        out = np.empty((x.size, self.M))
        for j, (p, q) in enumerate(self.pairs):
            out[:, j] = phx[int(p)] * phy[int(q)]
        if self.signs is not None:
            out *= self.signs[None, :]
        return out


def exp_kernel_eigenpairs(mesh, M, corr_length=1.0):
    """The M dominant eigenpairs of the separable exponential kernel.

    ``mesh`` may be ``None`` to skip nodal evaluation.  Each nodal mode is
    flipped so that its first nonzero nodal value is positive.
    """
    M = int(M)
    if M < 1:
        raise InvalidArgumentError(f"M must be >= 1, got {M}")
    # the M largest products never use a 1D index beyond M - 1
    eig1d, omega = exp_kernel_1d(M + 1, corr_length)
    pairs = top_tensor_pairs(eig1d, M)
    nu = np.sqrt(eig1d[pairs[:, 0]] * eig1d[pairs[:, 1]])
    basis = KLBasis(nu=nu, pairs=pairs, omega1d=omega, corr_length=corr_length)
    if mesh is not None:
        vals = basis.evaluate(mesh.nodes[:, 0], mesh.nodes[:, 1])
        signs = np.ones(M)
        for j in range(M):
            nz = np.flatnonzero(np.abs(vals[:, j]) > 1e-14)
            if nz.size and vals[nz[0], j] < 0:
                signs[j] = -1.0
        basis.signs = signs
        basis.modes = vals * signs[None, :]
    return basis


# ---------------------------------------------------------------------------
# closed-form series
# ---------------------------------------------------------------------------

SIGMA_F = 0.2


def brownian_basis(M, t, sigma_f=SIGMA_F):
    """Matrix ``Phi[t, j]`` with ``f(t) = sum_j xi_j Phi[t, j]``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    w = (np.arange(1, M + 1) - 0.5) * math.pi
    return math.sqrt(2.0) * sigma_f * np.sin(np.outer(t, w)) / w[None, :]


def brownian_force_eval(xi_row, t, sigma_f=SIGMA_F):
    """Brownian forcing at time(s) ``t`` for one realization ``xi_row``.

    Independent of x; variance at ``t`` tends to ``sigma_f**2 * t``.
    """
    xi_row = np.asarray(xi_row, dtype=float)
    vals = brownian_basis(xi_row.size, t, sigma_f) @ xi_row
    return float(vals[0]) if np.ndim(t) == 0 else vals


def wave_ic_basis(M, r):
    """Matrix ``S[r, j] = sqrt(2) sin(j pi r)``, j = 1..M."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    return math.sqrt(2.0) * np.sin(np.outer(r, np.arange(1, M + 1) * math.pi))


def wave_ic_eval(xi_row, r):
    xi_row = np.asarray(xi_row, dtype=float)
    vals = wave_ic_basis(xi_row.size, r) @ xi_row
    return float(vals[0]) if np.ndim(r) == 0 else vals
