"""Greedy rank-one enrichment of a separated expansion

    u_k(x, theta) = sum_{i<=k} lambda_i(theta) d_i(x)

driven by a problem adapter that supplies the two alternating Galerkin
updates.  Random variables are represented by their values on a fixed
sample ensemble; every expectation is a sample mean over that ensemble.
"""

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .errors import DegenerateError, InvalidArgumentError, NonConvergenceError

log = logging.getLogger(__name__)

NORM_TOL = 1e-6
# a mode this small relative to the current solution is round-off, not an increment
ZERO_REL = 1e-12


class StagnationWarning(RuntimeWarning):
    """The inner alternation hit its iteration cap before eps_local < eps2."""


class ProblemAdapter(Protocol):
    n_samples: int

    def inner(self, a, b) -> float: ...

    def deterministic_update(self, lam, sol): ...

    def stochastic_update(self, d, sol, lam_prev=None): ...


@dataclass(frozen=True)
class CoupleRecord:
    k: int
    inner_iterations: int
    eps_local: tuple
    eps_global: float
    stagnated: bool = False


@dataclass(frozen=True)
class SeparatedSolution:
    """Truncated expansion plus its convergence history.

    ``gram_d[i, j] = <d_i, d_j>`` and ``gram_lam[i, j] = E{lambda_i lambda_j}``
    are kept up to date so energies never need the N full fields.
    """

    lambdas: tuple = ()
    modes: tuple = ()
    gram_d: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    gram_lam: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    history: tuple = ()

    def __len__(self):
        return len(self.modes)

    @property
    def n_samples(self):
        return self.lambdas[0].size if self.lambdas else 0

    def with_couple(self, lam, d, inner):
        lam = np.asarray(lam, dtype=float)
        k = len(self)
        gd = np.zeros((k + 1, k + 1))
        gl = np.zeros((k + 1, k + 1))
        gd[:k, :k] = self.gram_d
        gl[:k, :k] = self.gram_lam
        for i in range(k):
            gd[i, k] = gd[k, i] = inner(self.modes[i], d)
            gl[i, k] = gl[k, i] = float(np.mean(self.lambdas[i] * lam))
        gd[k, k] = inner(d, d)
        gl[k, k] = float(np.mean(lam * lam))
        return SeparatedSolution(self.lambdas + (lam,), self.modes + (d,), gd, gl, self.history)

    def with_record(self, record):
        return SeparatedSolution(self.lambdas, self.modes, self.gram_d, self.gram_lam,
                                 self.history + (record,))

    def energy(self):
        """``E{ int u_k^2 dx }`` from the Gram matrices."""
        return float(np.sum(self.gram_d * self.gram_lam))

    def lambda_matrix(self):
        """(k, N) array of stochastic coefficients."""
        if not self.lambdas:
            return np.zeros((0, 0))
        return np.vstack(self.lambdas)

    def combine(self, per_mode):
        """Sample values of a linear functional: ``sum_i lambda_i * per_mode[i]``."""
        per_mode = np.asarray(per_mode, dtype=float)
        if not self.lambdas:
            return np.zeros(0)
        return per_mode @ self.lambda_matrix()

    def eps_global_trace(self):
        return [r.eps_global for r in self.history]


def evaluate_at_sample(sol, n, zero=None):
    """``u_k(., theta_n) = sum_i lambda_i(theta_n) d_i``.

    With no couples, returns ``zero`` (a zero field of the right shape) or 0.0.
    """
    if len(sol) == 0:
        return np.zeros_like(zero) if zero is not None else 0.0
    if not 0 <= n < sol.n_samples:
        raise IndexError(f"sample index {n} out of range [0, {sol.n_samples})")
    out = np.zeros_like(sol.modes[0], dtype=float)
    for lam, d in zip(sol.lambdas, sol.modes):
        out = out + lam[n] * d
    return out


def global_error(u_k, u_km1):
    """Relative energy added by the newest increment.

    ``|E[u_k^2] - E[u_{k-1}^2]| / E[u_k^2]`` with spatial integrals taken in
    the adapter's inner product; the absolute value keeps the stopping test
    meaningful once round-off dominates the numerator.
    """
    ek = u_k.energy()
    if not ek > 0.0:
        raise DegenerateError("global error undefined for an identically zero solution")
    return abs(ek - u_km1.energy()) / ek


def local_error(d_new, d_old, inner):
    """``2 - 2 <d_new, d_old>`` for unit-norm fields."""
    for name, d in (("d_new", d_new), ("d_old", d_old)):
        nrm = math.sqrt(max(inner(d, d), 0.0))
        if abs(nrm - 1.0) > NORM_TOL:
            raise InvalidArgumentError(f"{name} is not normalized (norm {nrm:.6g})")
    return 2.0 - 2.0 * inner(d_new, d_old)


def enrich_until_converged(adapter, eps1, eps2, max_outer=50, max_inner=25, callback=None,
                           initial=None):
    """Build couples until the newest one adds less than ``eps1`` relative energy.

    Each couple starts from ``lambda = 1`` on every sample and alternates the
    adapter's deterministic and stochastic updates until the mode moves by
    less than ``eps2`` (in the local error).  The couple that brings the
    global error to ``eps1`` or below is kept.

    ``initial`` is an optional starting expansion ``u_0`` (default: zero);
    ``max_outer`` counts only the couples added to it.

    Raises
    ------
    NonConvergenceError
        ``max_outer`` couples were built without reaching ``eps1``.  The
        partial expansion is attached as ``exc.solution``.
    """
    if not (eps1 > 0 and eps2 > 0):
        raise InvalidArgumentError("eps1 and eps2 must be positive")
    if max_outer < 1 or max_inner < 1:
        raise InvalidArgumentError("iteration caps must be >= 1")
    N = adapter.n_samples
    inner = adapter.inner
    sol = SeparatedSolution() if initial is None else initial
    k0 = len(sol)
    for k in range(k0 + 1, k0 + max_outer + 1):
        lam = np.ones(N)
        d_prev = None
        trace = []
        stagnated = True
        iters = 0
        for it in range(1, max_inner + 1):
            iters = it
            d = adapter.deterministic_update(lam, sol)
            nrm = math.sqrt(max(inner(d, d), 0.0))
            if not np.isfinite(nrm):
                raise DegenerateError(f"non-finite mode at k={k}, inner iteration {it}")
            if nrm <= ZERO_REL * math.sqrt(sol.energy()) or nrm == 0.0:
                if len(sol) == 0:
                    raise DegenerateError("deterministic update returned a zero field at k=1")
                log.info("k=%d: zero residual, expansion is exact", k)
                return sol.with_record(CoupleRecord(k, it, tuple(trace), 0.0))
            d = d / nrm
            lam = adapter.stochastic_update(d, sol, lam_prev=lam if it > 1 else None)
            if d_prev is not None:
                e = local_error(d, d_prev, inner)
                trace.append(e)
                if e < eps2:
                    stagnated = False
                    break
            d_prev = d
        if stagnated:
            msg = f"k={k}: inner loop reached {max_inner} iterations (eps_local={trace[-1] if trace else float('nan'):.3e})"
            log.warning(msg)
            warnings.warn(msg, StagnationWarning, stacklevel=2)
        new = sol.with_couple(lam, d, inner)
        eps_g = global_error(new, sol)
        sol = new.with_record(CoupleRecord(k, iters, tuple(trace), eps_g, stagnated))
        log.info("k=%d inner=%d eps_local=%s eps_global=%.3e", k, iters,
                 f"{trace[-1]:.3e}" if trace else "-", eps_g)
        if callback is not None:
            callback(sol)
        if eps_g <= eps1:
            return sol
    raise NonConvergenceError(
        f"eps_global={sol.history[-1].eps_global:.3e} > eps1={eps1:g} after {max_outer} couples",
        solution=sol)


def _fmt(x):
    return format(float(x), ".17g")


def write_history_csv(sol, path):
    """One row per couple: ``k, inner_iter, eps_local, eps_global``.

    ``eps_local`` is the last value of the couple's inner loop (empty when the
    loop ran a single iteration).
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "inner_iter", "eps_local", "eps_global"])
        for r in sol.history:
            w.writerow([r.k, r.inner_iterations, _fmt(r.eps_local[-1]) if r.eps_local else "",
                        _fmt(r.eps_global)])


def write_local_trace_csv(sol, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "iter", "eps_local"])
        for r in sol.history:
            for j, e in enumerate(r.eps_local, start=2):
                w.writerow([r.k, j, _fmt(e)])
