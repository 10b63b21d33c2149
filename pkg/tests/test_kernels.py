import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import trapezoid

from sepspde import _kernels

finite = st.floats(-1e3, 1e3, allow_nan=False).filter(lambda v: v == 0 or abs(v) > 1e-6)


def test_backend_name():
    assert _kernels.backend() in ("numba", "numpy")


def test_quadratic_known_roots(kernels):
    # (x - 1)(x - 3) = x^2 - 4x + 3
    lam, st_ = kernels.quadratic_select(np.array([1.0]), np.array([-4.0]), np.array([3.0]),
                                        np.zeros(1), False)
    assert lam[0] == pytest.approx(1.0) and st_[0] == _kernels.ROOT_REAL
    lam, _ = kernels.quadratic_select(np.array([1.0]), np.array([-4.0]), np.array([3.0]),
                                      np.array([2.9]), True)
    assert lam[0] == pytest.approx(3.0)


def test_quadratic_special_cases(kernels):
    a = np.array([0.0, 1.0, 0.0, 0.0])
    b = np.array([2.0, 0.0, 0.0, 0.0])
    c = np.array([-4.0, 1.0, 5.0, 0.0])
    lam, status = kernels.quadratic_select(a, b, c, np.full(4, 7.0), True)
    assert status.tolist() == [_kernels.ROOT_LINEAR, _kernels.ROOT_VERTEX,
                               _kernels.ROOT_INCONSISTENT, _kernels.ROOT_TRIVIAL]
    assert lam[0] == 2.0 and lam[1] == 0.0
    assert math.isnan(lam[2]) and lam[3] == 7.0


def test_quadratic_no_cancellation(kernels):
    # roots 1e-9 and 1e9: naive formula loses the small one entirely
    lam, _ = kernels.quadratic_select(np.array([1.0]), np.array([-(1e9 + 1e-9)]), np.array([1.0]),
                                      np.zeros(1), False)
    assert lam[0] == pytest.approx(1e-9, rel=1e-12)


def test_backends_agree_on_quadratic(rng):
    if not _kernels.HAVE_NUMBA:
        pytest.skip("numba not installed")
    a, b, c, p = rng.normal(size=(4, 5000))
    l1, s1 = _kernels.quadratic_select_numpy(a, b, c, p, True)
    l2, s2 = _kernels.quadratic_select_numba(a, b, c, p, True)
    np.testing.assert_array_equal(s1, s2)
    np.testing.assert_allclose(l1, l2, rtol=1e-14, atol=0)


@given(finite, finite, finite, finite)
@settings(max_examples=300, deadline=None)
def test_quadratic_real_root_residual(a, b, c, p):
    lam, status = _kernels.quadratic_select(np.array([a]), np.array([b]), np.array([c]),
                                            np.array([p]), True)
    if status[0] == _kernels.ROOT_REAL:
        scale = max(abs(a), abs(b), abs(c))
        x = lam[0]
        assert abs((a * x + b) * x + c) <= 1e-10 * scale * max(1.0, x * x)


@given(finite, finite, finite, st.floats(-30, 30))
@settings(max_examples=200, deadline=None)
def test_quadratic_scale_invariant(a, b, c, logs):
    s = 2.0 ** logs
    l1, s1 = _kernels.quadratic_select(np.array([a]), np.array([b]), np.array([c]), np.zeros(1), False)
    l2, s2 = _kernels.quadratic_select(np.array([s * a]), np.array([s * b]), np.array([s * c]),
                                       np.zeros(1), False)
    assert s1[0] == s2[0]
    if s1[0] != _kernels.ROOT_INCONSISTENT:
        assert l2[0] == pytest.approx(l1[0], rel=1e-12, abs=1e-300)


def test_kde_normalized_and_backends_agree(kernels, rng):
    x = rng.normal(size=4000)
    grid = np.linspace(-7, 7, 801)
    d = kernels.kde_gauss(x, grid, 0.2)
    assert np.all(d >= 0)
    assert trapezoid(d, grid) == pytest.approx(1.0, abs=1e-6)
    ref = _kernels.kde_gauss_numpy(x, grid, 0.2)
    np.testing.assert_allclose(d, ref, rtol=1e-9, atol=1e-15)


def _march_args(B=3, Nt=101, Nx=51):
    dx, dt = 2.0 / (Nx - 1), 1.0 / (Nt - 1)
    zero = np.zeros((Nt, Nx))
    return B, Nt, Nx, dx, dt, zero


def test_march_uniform_source_integrates_exactly(kernels):
    B, Nt, Nx, dx, dt, zero = _march_args()
    t = np.linspace(0, 1, Nt)
    src = np.outer([1.0, -2.0, 0.5], np.ones(Nt))  # constant source per member
    out, bad = kernels.march(np.zeros((B, Nx)), np.ones(B), np.full(B, 0.5), zero, zero, src,
                             0.0, dx, dt)
    assert bad == -1
    # u = s t stays uniform in x
    for b, s in enumerate([1.0, -2.0, 0.5]):
        np.testing.assert_allclose(out[b], np.outer(s * t, np.ones(Nx)), atol=1e-12)


def test_march_backends_agree(rng):
    if not _kernels.HAVE_NUMBA:
        pytest.skip("numba not installed")
    B, Nt, Nx, dx, dt, zero = _march_args(B=4)
    x = np.linspace(0, 2, Nx)
    d0 = 0.2 * np.sin(np.pi * x)[None, :] * rng.uniform(0.5, 1.5, (B, 1))
    h3 = 0.1 * rng.normal(size=(Nt, Nx))
    src = 0.05 * rng.normal(size=(Nt, Nx))
    st_ = 0.1 * rng.normal(size=(B, Nt))
    args = (d0, rng.uniform(0.5, 1.5, B), rng.uniform(0.2, 0.6, B), h3, src, st_, 0.01, dx, dt)
    o1, b1 = _kernels.march_numpy(*args)
    o2, b2 = _kernels.march_numba(*args)
    assert b1 == b2 == -1
    np.testing.assert_allclose(o1, o2, rtol=1e-12, atol=1e-14)


def test_march_reports_cfl_violation(kernels):
    B, Nt, Nx, dx, dt, zero = _march_args(B=1)
    d0 = np.full((1, Nx), 10.0)  # speed 10 with dt/dx = 0.25 -> Courant number 2.5
    _, bad = kernels.march(d0, np.ones(1), np.full(1, 0.5), zero, zero, np.zeros((1, Nt)),
                           0.0, dx, dt)
    assert bad == 0
