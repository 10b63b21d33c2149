import csv
import math
import warnings

import numpy as np
import pytest

from sepspde import separated
from sepspde.errors import DegenerateError, InvalidArgumentError, NonConvergenceError
from sepspde.separated import (SeparatedSolution, StagnationWarning, enrich_until_converged,
                               evaluate_at_sample, global_error, local_error)


class ProjectionProblem:
    """L2 projection of a known field ``T[n] = sum_j a_j(theta_n) phi_j``.

    The alternation is then a power iteration, and a rank-r target is
    recovered exactly after r couples.
    """

    def __init__(self, coeffs, phis):
        self.T = coeffs @ phis  # (N, nx)
        self.n_samples = coeffs.shape[0]

    def inner(self, a, b):
        return float(a @ b)

    def _resid(self, sol):
        R = self.T.copy()
        for lam, d in zip(sol.lambdas, sol.modes):
            R -= np.outer(lam, d)
        return R

    def deterministic_update(self, lam, sol):
        h = np.mean(lam * lam)
        if h == 0:
            raise DegenerateError("zero lambda")
        return lam @ self._resid(sol) / self.n_samples / h

    def stochastic_update(self, d, sol, lam_prev=None):
        return self._resid(sol) @ d / (d @ d)


def _rank2(N=200, nx=30, seed=0):
    rng = np.random.default_rng(seed)
    phis = np.linalg.qr(rng.normal(size=(nx, 2)))[0].T
    coeffs = rng.normal(size=(N, 2)) * np.array([3.0, 1.0]) + np.array([1.0, 0.0])
    return ProjectionProblem(coeffs, phis)


def _unit(v):
    return v / math.sqrt(v @ v)


def dot(a, b):
    return float(a @ b)


def test_local_error_identities():
    rng = np.random.default_rng(1)
    d = _unit(rng.normal(size=50))
    e = rng.normal(size=50)
    e = _unit(e - (e @ d) * d)
    assert local_error(d, d, dot) == pytest.approx(0.0, abs=1e-12)
    assert local_error(d, e, dot) == pytest.approx(2.0, abs=1e-12)
    assert local_error(d, -d, dot) == pytest.approx(4.0, abs=1e-12)


def test_local_error_rejects_unnormalized():
    with pytest.raises(InvalidArgumentError):
        local_error(np.array([2.0, 0.0]), np.array([1.0, 0.0]), dot)


def test_global_error_first_couple_is_one():
    sol = SeparatedSolution().with_couple(np.array([1.0, -2.0, 0.5]), np.array([0.3, 0.4]), dot)
    assert global_error(sol, SeparatedSolution()) == 1.0


def test_global_error_zero_energy():
    with pytest.raises(DegenerateError):
        global_error(SeparatedSolution(), SeparatedSolution())


def test_energy_from_gram_matrices():
    rng = np.random.default_rng(2)
    sol = SeparatedSolution()
    for _ in range(3):
        sol = sol.with_couple(rng.normal(size=40), rng.normal(size=7), dot)
    U = sol.lambda_matrix().T @ np.vstack(sol.modes)  # (N, nx)
    assert sol.energy() == pytest.approx(np.mean(np.sum(U * U, axis=1)), rel=1e-12)
    np.testing.assert_allclose(evaluate_at_sample(sol, 5), U[5], atol=1e-14)
    with pytest.raises(IndexError):
        evaluate_at_sample(sol, 40)


def test_rank_two_target_recovered_exactly():
    prob = _rank2()
    sol = enrich_until_converged(prob, 1e-12, 1e-10, max_inner=200)
    assert len(sol) == 2
    assert sol.history[0].eps_global == 1.0
    assert sol.history[-1].eps_global == 0.0  # exact-residual stop record
    U = sol.lambda_matrix().T @ np.vstack(sol.modes)
    np.testing.assert_allclose(U, prob.T, atol=1e-8)


def test_modes_are_normalized():
    sol = enrich_until_converged(_rank2(), 1e-12, 1e-10, max_inner=200)
    for d in sol.modes:
        assert d @ d == pytest.approx(1.0, abs=1e-12)


def test_zero_target_is_degenerate():
    prob = ProjectionProblem(np.zeros((10, 1)), np.ones((1, 4)))
    with pytest.raises(DegenerateError):
        enrich_until_converged(prob, 1e-3, 1e-3)


def test_stagnation_warns():
    with pytest.warns(StagnationWarning):
        enrich_until_converged(_rank2(), 1e-12, 1e-14, max_inner=2)


def test_nonconvergence_carries_partial_solution():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StagnationWarning)
        with pytest.raises(NonConvergenceError) as ei:
            enrich_until_converged(_rank2(), 1e-12, 1e-10, max_outer=1, max_inner=200)
    assert len(ei.value.solution) == 1


@pytest.mark.parametrize("kw", [dict(eps1=0.0, eps2=1e-3), dict(eps1=1e-3, eps2=-1.0),
                                dict(eps1=1e-3, eps2=1e-3, max_outer=0)])
def test_invalid_arguments(kw):
    with pytest.raises(InvalidArgumentError):
        enrich_until_converged(_rank2(), **kw)


def test_history_csv(tmp_path):
    sol = enrich_until_converged(_rank2(), 1e-12, 1e-10, max_inner=200)
    p = tmp_path / "c.csv"
    separated.write_history_csv(sol, p)
    rows = list(csv.reader(open(p)))
    assert rows[0] == ["k", "inner_iter", "eps_local", "eps_global"]
    assert rows[1][3] == "1"
    assert len(rows) == 1 + len(sol.history)
    separated.write_local_trace_csv(sol, tmp_path / "l.csv")
    trace = list(csv.reader(open(tmp_path / "l.csv")))
    assert len(trace) - 1 == sum(len(r.eps_local) for r in sol.history)
