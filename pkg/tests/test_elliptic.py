import numpy as np
import pytest

from sepspde import elliptic, fem2d, sampling
from sepspde.elliptic import EllipticProblem
from sepspde.errors import NearSingularSampleError
from sepspde.separated import SeparatedSolution, enrich_until_converged, evaluate_at_sample


@pytest.fixture(scope="module")
def small():
    return elliptic.build_elliptic(2, 1000, seed=3, mesh=fem2d.mesh_square(25))


def test_deterministic_problem_takes_one_term():
    p = elliptic.build_elliptic(0, 50, seed=0, mesh=fem2d.mesh_square(64))
    sol = enrich_until_converged(p, 1e-8, 1e-6)
    assert len(sol) == 1
    np.testing.assert_allclose(sol.lambdas[0], sol.lambdas[0][0])
    u = evaluate_at_sample(sol, 7)
    np.testing.assert_allclose(u, p.direct_solve(7), rtol=1e-10)


def test_first_deterministic_update_uses_mean_operator(small):
    d = small.deterministic_update(np.ones(small.n_samples), SeparatedSolution())
    xi_mean = small.xi.mean(axis=0)
    K = small.pattern.matrix(small.op.combine(1.0, xi_mean))
    np.testing.assert_allclose(K @ d, small.op.F, atol=1e-10)


def test_first_stochastic_update_is_rayleigh_ratio(small):
    d = small.deterministic_update(np.ones(small.n_samples), SeparatedSolution())
    lam = small.stochastic_update(d, SeparatedSolution())
    for n in (0, 17, 999):
        K = small.pattern.matrix(small.sample_matrix_data(n))
        assert lam[n] == pytest.approx((d @ small.op.F) / (d @ (K @ d)), rel=1e-12)


def test_e_tensor_matches_matrices(small, rng):
    a, b = rng.normal(size=(2, small.pattern.n))
    e = small.e_tensor(a, b)
    for j in range(3):
        assert e[j] == pytest.approx(a @ (small.op.matrix(j) @ b), rel=1e-12)


def test_converged_expansion_matches_direct_solves(small):
    sol = enrich_until_converged(small, 1e-8, 1e-3)
    errs = []
    for n in range(0, small.n_samples, 10):
        u = small.direct_solve(n)
        errs.append(np.linalg.norm(evaluate_at_sample(sol, n) - u) / np.linalg.norm(u))
    assert np.median(errs) <= 1e-3
    assert small.sample_residual(sol, 0) < 1e-3


def test_near_singular_sample_detected():
    mesh = fem2d.mesh_square(25)
    op0 = fem2d.assemble_affine_operator(mesh, None)
    # K(xi) = K0 (1 + 2 xi) vanishes at xi = -0.5
    op = fem2d.StochasticOperator(op0.pattern, op0.K0, 2.0 * op0.K0[:, None], op0.F, op0.mass)
    xi = np.array([[0.1], [-0.5], [0.3]])
    ens = sampling.SampleEnsemble(np.asfortranarray(xi), sampling.Distribution.UNIFORM, seed=0)
    p = EllipticProblem(op, ens)
    d = p.deterministic_update(np.ones(3), SeparatedSolution())
    with pytest.raises(NearSingularSampleError) as ei:
        p.stochastic_update(d / np.sqrt(p.inner(d, d)), SeparatedSolution())
    assert ei.value.sample_index == 1


def test_probe_samples_match_point_evaluation(small):
    sol = enrich_until_converged(small, 1e-6, 1e-3)
    vals = small.probe_samples(sol, 0.5, 0.5)
    full = small.full_field(evaluate_at_sample(sol, 4))
    idx, w = small.pattern.mesh.point_weights(0.5, 0.5)
    assert vals[4] == pytest.approx(w @ full[idx], rel=1e-12)


def test_mismatched_ensemble_rejected(small):
    ens = sampling.generate("uniform", 10, 3, seed=0)
    with pytest.raises(ValueError):
        EllipticProblem(small.op, ens)
