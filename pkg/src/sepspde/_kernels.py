"""Hot inner loops, each with a numba and a pure-numpy implementation.

The numba path is used when numba imports and ``SEPSPDE_DISABLE_NUMBA`` is
unset (or ``0``).  Both paths are kept importable under explicit names
(``*_numba`` / ``*_numpy``) so tests and the benchmark can compare them.
"""

import math
import os
import warnings

import numpy as np

# numba probes for TBB on first parallel launch and warns about old versions
warnings.filterwarnings("ignore", message=".*TBB.*")

try:  # pragma: no cover - exercised implicitly
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

_flag = os.environ.get("SEPSPDE_DISABLE_NUMBA", "").strip().lower()
USE_NUMBA = HAVE_NUMBA and _flag in ("", "0", "false", "no")

# status codes returned per sample by the quadratic kernel
ROOT_REAL = 0
ROOT_LINEAR = 1
ROOT_VERTEX = 2
ROOT_TRIVIAL = 3
ROOT_INCONSISTENT = -1

_REL_ZERO = 1e-14

# ---------------------------------------------------------------------------
# quadratic a*x**2 + b*x + c = 0, one equation per sample
# ---------------------------------------------------------------------------


def quadratic_select_numpy(a, b, c, prev, has_prev):
    """Solve ``a*x**2 + b*x + c = 0`` per sample and pick one root.

    Real roots come from the cancellation-free form ``q = -(b + sign(b) sqrt(D))/2``,
    roots ``q/a`` and ``c/q``.  The root closest to ``prev`` is taken when
    ``has_prev`` is set, otherwise the one of smaller magnitude.  ``a == 0``
    falls back to the linear root; a negative discriminant returns the vertex
    ``-b/(2a)``, which minimizes the squared residual.

    Returns ``(lam, status)`` with status codes ``ROOT_*``.
    """
    a = np.broadcast_to(np.asarray(a, dtype=float), np.shape(b))
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    prev = np.broadcast_to(np.asarray(prev, dtype=float), b.shape)
    lam = np.zeros(b.shape)
    status = np.full(b.shape, ROOT_REAL, dtype=np.int8)

    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), np.abs(c))
    trivial = scale == 0.0
    a_small = (np.abs(a) <= _REL_ZERO * scale) & ~trivial
    b_small = np.abs(b) <= _REL_ZERO * scale
    inconsistent = a_small & b_small
    linear = a_small & ~b_small & (a == 0.0)
    quad = ~(trivial | inconsistent | linear)

    with np.errstate(divide="ignore", invalid="ignore"):
        disc = b * b - 4.0 * a * c
        vertex = quad & (disc < 0.0)
        real = quad & ~vertex
        sq = np.sqrt(np.where(real, disc, 0.0))
        q = -0.5 * (b + np.copysign(sq, b))
        r1 = q / a
        r2 = np.where(q != 0.0, c / q, r1)
        if has_prev:
            e1, e2 = np.abs(r1 - prev), np.abs(r2 - prev)
        else:
            e1, e2 = np.abs(r1), np.abs(r2)
        pick2 = (e2 < e1) | ((e2 == e1) & (np.abs(r2) < np.abs(r1)))
        root = np.where(pick2, r2, r1)
        f = (a * root + b) * root + c
        fp = 2.0 * a * root + b
        cand = root - f / np.where(fp != 0.0, fp, 1.0)
        better = (fp != 0.0) & (np.abs((a * cand + b) * cand + c) < np.abs(f))
        root = np.where(better, cand, root)

        lam = np.where(real, root, lam)
        lam = np.where(vertex, -b / (2.0 * a), lam)
        lam = np.where(linear, -c / np.where(linear, b, 1.0), lam)
    lam = np.where(trivial, prev if has_prev else 0.0, lam)
    lam = np.where(inconsistent, np.nan, lam)

    status[vertex] = ROOT_VERTEX
    status[linear] = ROOT_LINEAR
    status[trivial] = ROOT_TRIVIAL
    status[inconsistent] = ROOT_INCONSISTENT
    return lam, status


# ---------------------------------------------------------------------------
# Gaussian kernel density sum
# ---------------------------------------------------------------------------


def kde_gauss_numpy(samples, grid, bandwidth, chunk=256):
    samples = np.asarray(samples, dtype=float)
    grid = np.asarray(grid, dtype=float)
    out = np.empty(grid.size)
    norm = 1.0 / (samples.size * bandwidth * math.sqrt(2.0 * math.pi))
    for start in range(0, grid.size, chunk):
        g = grid[start:start + chunk, None]
        z = (g - samples[None, :]) / bandwidth
        out[start:start + chunk] = np.exp(-0.5 * z * z).sum(axis=1) * norm
    return out


# ---------------------------------------------------------------------------
# explicit march of  h1 d_t + (h2 d^2 + h3 d)_x = src + gamma d_xx
# ---------------------------------------------------------------------------


def march_numpy(d0, h1, h2, h3, src_field, src_t, gamma, dx, dt, cfl_limit=1.0):
    """Leapfrog march for a batch of independent fields.

    Parameters
    ----------
    d0 : (B, Nx) initial slices
    h1, h2 : (B,) scalar coefficients per batch member
    h3 : (Nt, Nx) advecting field shared by the batch
    src_field : (Nt, Nx) shared source
    src_t : (B, Nt) x-uniform per-member source

    Returns
    -------
    out : (B, Nt, Nx)
    bad_step : int, first time index violating the CFL limit, or -1
    """
    d0 = np.asarray(d0, dtype=float)
    B, Nx = d0.shape
    Nt = h3.shape[0]
    h1 = np.asarray(h1, dtype=float)[:, None]
    h2 = np.asarray(h2, dtype=float)[:, None]
    out = np.empty((B, Nt, Nx))
    out[:, 0] = d0
    inv2dx = 0.5 / dx
    invdx2 = 1.0 / (dx * dx)

    def rhs(d, h3row, srow, strow, dlag):
        flux = h2 * d * d + h3row[None, :] * d
        r = np.zeros_like(d)
        r[:, 1:-1] = (srow[None, 1:-1] + strow[:, None]
                      - (flux[:, 2:] - flux[:, :-2]) * inv2dx)
        if gamma != 0.0:
            r[:, 1:-1] += gamma * (dlag[:, 2:] - 2.0 * dlag[:, 1:-1] + dlag[:, :-2]) * invdx2
        return r / h1

    def extrap(d):
        d[:, 0] = 2.0 * d[:, 1] - d[:, 2]
        d[:, -1] = 2.0 * d[:, -2] - d[:, -3]

    def cfl_ok(d, h3row):
        v = np.abs(2.0 * h2 * d + h3row[None, :]) / np.abs(h1)
        return v.max() * dt / dx <= cfl_limit

    if not cfl_ok(d0, h3[0]):
        return out, 0
    if Nt == 1:
        return out, -1
    h3h = 0.5 * (h3[0] + h3[1])
    sh = 0.5 * (src_field[0] + src_field[1])
    sth = 0.5 * (src_t[:, 0] + src_t[:, 1])
    half = d0 + 0.5 * dt * rhs(d0, h3[0], src_field[0], src_t[:, 0], d0)
    extrap(half)
    cur = d0 + dt * rhs(half, h3h, sh, sth, half)
    extrap(cur)
    out[:, 1] = cur
    for n in range(1, Nt - 1):
        if not cfl_ok(out[:, n], h3[n]):
            return out, n
        nxt = out[:, n - 1] + 2.0 * dt * rhs(out[:, n], h3[n], src_field[n], src_t[:, n], out[:, n - 1])
        extrap(nxt)
        out[:, n + 1] = nxt
    if not cfl_ok(out[:, Nt - 1], h3[Nt - 1]):
        return out, Nt - 1
    return out, -1


if HAVE_NUMBA:

    @njit(cache=True)
    def _quadratic_select_nb(a, b, c, prev, has_prev, lam, status):
        for i in range(b.size):
            ai = a[i]
            bi = b[i]
            ci = c[i]
            scale = max(abs(ai), abs(bi), abs(ci))
            if scale == 0.0:
                lam[i] = prev[i] if has_prev else 0.0
                status[i] = ROOT_TRIVIAL
                continue
            if abs(ai) <= _REL_ZERO * scale:
                if abs(bi) <= _REL_ZERO * scale:
                    lam[i] = np.nan
                    status[i] = ROOT_INCONSISTENT
                    continue
                if ai == 0.0:
                    lam[i] = -ci / bi
                    status[i] = ROOT_LINEAR
                    continue
            disc = bi * bi - 4.0 * ai * ci
            if disc < 0.0:
                lam[i] = -bi / (2.0 * ai)
                status[i] = ROOT_VERTEX
                continue
            sq = math.sqrt(disc)
            q = -0.5 * (bi + math.copysign(sq, bi))
            r1 = q / ai
            r2 = ci / q if q != 0.0 else r1
            if has_prev:
                e1 = abs(r1 - prev[i])
                e2 = abs(r2 - prev[i])
            else:
                e1 = abs(r1)
                e2 = abs(r2)
            if e2 < e1 or (e2 == e1 and abs(r2) < abs(r1)):
                root = r2
            else:
                root = r1
            f = (ai * root + bi) * root + ci
            fp = 2.0 * ai * root + bi
            if fp != 0.0:
                cand = root - f / fp
                if abs((ai * cand + bi) * cand + ci) < abs(f):
                    root = cand
            lam[i] = root
            status[i] = ROOT_REAL

    @njit(parallel=True, cache=True)
    def _kde_gauss_nb(sorted_samples, grid, bandwidth, out):
        n = sorted_samples.size
        norm = 1.0 / (n * bandwidth * math.sqrt(2.0 * math.pi))
        reach = 9.0 * bandwidth
        for g in prange(grid.size):
            x = grid[g]
            lo = np.searchsorted(sorted_samples, x - reach)
            hi = np.searchsorted(sorted_samples, x + reach)
            acc = 0.0
            for k in range(lo, hi):
                z = (x - sorted_samples[k]) / bandwidth
                acc += math.exp(-0.5 * z * z)
            out[g] = acc * norm

    @njit(cache=True)
    def _rhs_nb(d, h1, h2, h3row, srow, st, dlag, gamma, dx, r):
        Nx = d.size
        inv2dx = 0.5 / dx
        invdx2 = 1.0 / (dx * dx)
        r[0] = 0.0
        r[Nx - 1] = 0.0
        for i in range(1, Nx - 1):
            fp = h2 * d[i + 1] * d[i + 1] + h3row[i + 1] * d[i + 1]
            fm = h2 * d[i - 1] * d[i - 1] + h3row[i - 1] * d[i - 1]
            v = srow[i] + st - (fp - fm) * inv2dx
            if gamma != 0.0:
                v += gamma * (dlag[i + 1] - 2.0 * dlag[i] + dlag[i - 1]) * invdx2
            r[i] = v / h1

    @njit(cache=True)
    def _cfl_nb(d, h1, h2, h3row, dt, dx, limit):
        vmax = 0.0
        for i in range(d.size):
            v = abs(2.0 * h2 * d[i] + h3row[i]) / abs(h1)
            if v > vmax:
                vmax = v
        return vmax * dt / dx <= limit

    @njit(cache=True)
    def _extrap_nb(d):
        n = d.size
        d[0] = 2.0 * d[1] - d[2]
        d[n - 1] = 2.0 * d[n - 2] - d[n - 3]

    @njit(parallel=True, cache=True)
    def _march_nb(d0, h1, h2, h3, src_field, src_t, gamma, dx, dt, limit, out, bad):
        B, Nx = d0.shape
        Nt = h3.shape[0]
        h3h = 0.5 * (h3[0] + h3[1]) if Nt > 1 else h3[0].copy()
        sh = 0.5 * (src_field[0] + src_field[1]) if Nt > 1 else src_field[0].copy()
        for b in prange(B):
            bad[b] = -1
            r = np.empty(Nx)
            for i in range(Nx):
                out[b, 0, i] = d0[b, i]
            if not _cfl_nb(out[b, 0], h1[b], h2[b], h3[0], dt, dx, limit):
                bad[b] = 0
                continue
            if Nt == 1:
                continue
            _rhs_nb(out[b, 0], h1[b], h2[b], h3[0], src_field[0], src_t[b, 0],
                    out[b, 0], gamma, dx, r)
            half = out[b, 0] + 0.5 * dt * r
            _extrap_nb(half)
            sth = 0.5 * (src_t[b, 0] + src_t[b, 1])
            _rhs_nb(half, h1[b], h2[b], h3h, sh, sth, half, gamma, dx, r)
            for i in range(Nx):
                out[b, 1, i] = out[b, 0, i] + dt * r[i]
            _extrap_nb(out[b, 1])
            for n in range(1, Nt - 1):
                if not _cfl_nb(out[b, n], h1[b], h2[b], h3[n], dt, dx, limit):
                    bad[b] = n
                    break
                _rhs_nb(out[b, n], h1[b], h2[b], h3[n], src_field[n], src_t[b, n],
                        out[b, n - 1], gamma, dx, r)
                for i in range(Nx):
                    out[b, n + 1, i] = out[b, n - 1, i] + 2.0 * dt * r[i]
                _extrap_nb(out[b, n + 1])
            if bad[b] < 0 and not _cfl_nb(out[b, Nt - 1], h1[b], h2[b], h3[Nt - 1], dt, dx, limit):
                bad[b] = Nt - 1

    def quadratic_select_numba(a, b, c, prev, has_prev):
        b = np.ascontiguousarray(b, dtype=np.float64)
        a = np.ascontiguousarray(np.broadcast_to(np.asarray(a, dtype=np.float64), b.shape))
        c = np.ascontiguousarray(c, dtype=np.float64)
        prev = np.ascontiguousarray(np.broadcast_to(np.asarray(prev, dtype=np.float64), b.shape))
        lam = np.empty(b.shape)
        status = np.empty(b.shape, dtype=np.int8)
        _quadratic_select_nb(a.ravel(), b.ravel(), c.ravel(), prev.ravel(), bool(has_prev),
                             lam.reshape(-1), status.reshape(-1))
        return lam, status

    def kde_gauss_numba(samples, grid, bandwidth):
        s = np.sort(np.asarray(samples, dtype=np.float64))
        grid = np.ascontiguousarray(grid, dtype=np.float64)
        out = np.empty(grid.size)
        _kde_gauss_nb(s, grid, float(bandwidth), out)
        return out

    def march_numba(d0, h1, h2, h3, src_field, src_t, gamma, dx, dt, cfl_limit=1.0):
        d0 = np.ascontiguousarray(d0, dtype=np.float64)
        B, Nx = d0.shape
        Nt = h3.shape[0]
        out = np.empty((B, Nt, Nx))
        bad = np.empty(B, dtype=np.int64)
        _march_nb(d0, np.ascontiguousarray(h1, dtype=np.float64),
                  np.ascontiguousarray(h2, dtype=np.float64),
                  np.ascontiguousarray(h3, dtype=np.float64),
                  np.ascontiguousarray(src_field, dtype=np.float64),
                  np.ascontiguousarray(src_t, dtype=np.float64),
                  float(gamma), float(dx), float(dt), float(cfl_limit), out, bad)
        hit = bad[bad >= 0]
        return out, (int(hit.min()) if hit.size else -1)

    def set_threads(n):
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))

else:  # pragma: no cover
    quadratic_select_numba = kde_gauss_numba = march_numba = None

    def set_threads(n):
        pass


if USE_NUMBA:
    quadratic_select = quadratic_select_numba
    kde_gauss = kde_gauss_numba
    march = march_numba
else:  # pragma: no cover
    quadratic_select = quadratic_select_numpy
    kde_gauss = kde_gauss_numpy
    march = march_numpy


def backend():
    return "numba" if USE_NUMBA else "numpy"
