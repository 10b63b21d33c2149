"""Brute-force Monte Carlo reference: one deterministic solve per sample.

Samples come from their own stream (:data:`sampling.ORACLE_STREAM`), so an
oracle never shares draws with the separated solver it is checking.
"""

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from . import burgers, fem2d, sampling
from .wave import WaveProblem
from .errors import InvalidArgumentError, OracleError, SolverError

log = logging.getLogger(__name__)

MAX_FAILURE_FRACTION = 0.01


@dataclass(frozen=True)
class MCResult:
    problem: str
    values: np.ndarray
    seed: int
    failures: int = 0
    failed_indices: tuple = ()
    extra: dict = field(default_factory=dict)

    @property
    def n_mc(self):
        return self.values.size

    @property
    def mean(self):
        return float(np.mean(self.values))

    @property
    def std(self):
        return float(np.std(self.values, ddof=1))


def _finish(problem, values, seed, failed, n_mc):
    if len(failed) > MAX_FAILURE_FRACTION * n_mc:
        raise OracleError(f"{problem} oracle: {len(failed)} of {n_mc} samples failed")
    if failed:
        log.warning("%s oracle: skipped %d failed samples", problem, len(failed))
    return MCResult(problem, np.asarray(values, dtype=float), seed, len(failed), tuple(failed))


def mc_elliptic(op, probe_w, n_mc, seed):
    """Probe values ``probe_w @ u(theta_n)`` from sparse solves of ``K(xi_n) u = F``."""
    if n_mc < 1:
        raise InvalidArgumentError("n_mc must be >= 1")
    ens = sampling.make_ensemble(sampling.Distribution.UNIFORM, max(n_mc, 2), op.M, seed,
                                 stream=sampling.ORACLE_STREAM)
    pat = op.pattern
    values, failed = [], []
    for n in range(n_mc):
        data = op.combine(1.0, ens.samples[n] if op.M else np.zeros(0))
        try:
            u = fem2d.solve_sparse(pat.matrix(data), op.F)
        except SolverError:
            failed.append(n)
            continue
        values.append(float(probe_w @ u))
    return _finish("elliptic", values, seed, failed, n_mc)


def mc_burgers(config, n_mc, seed, x=1.0, t=0.5, batch=1024):
    """Probe values from per-sample marches of the full nonlinear equation."""
    if n_mc < 1:
        raise InvalidArgumentError("n_mc must be >= 1")
    it, ix = config.grid.index(x, t)
    forces = burgers.force_table(config, n_mc, seed, stream=sampling.ORACLE_STREAM)
    values, failed = [], []
    for start, out, bad in burgers.solve_samples(config, forces, batch=batch):
        if bad < 0:
            values.extend(out[:, it, ix])
            continue
        # some member broke the CFL limit; find out which
        for n in range(start, start + out.shape[0]):
            for _, one, b1 in burgers.solve_samples(config, forces[n:n + 1]):
                if b1 < 0:
                    values.append(float(one[0, it, ix]))
                else:
                    failed.append(n)
    return _finish("burgers", values, seed, failed, n_mc)


def mc_wave(solver, n_mc, seed, x=0.0, y=0.0, t=1.0, batch=1000):
    """Probe values from per-sample wave solves of the sampled initial shape."""
    if n_mc < 1:
        raise InvalidArgumentError("n_mc must be >= 1")
    cfg = solver.config
    ens = sampling.generate(sampling.Distribution.NORMAL, max(n_mc, 2), cfg.M, seed,
                            stream=sampling.ORACLE_STREAM)
    view = WaveProblem(solver, ens)
    w = view.probe_functional(x, y)
    it = view.time_index(t)
    values = []
    for start in range(0, n_mc, batch):
        G = view.S @ ens.samples[start:min(n_mc, start + batch)].T
        U = solver.step(G)
        values.extend(w @ U[it])
    vals = np.asarray(values)
    failed = [int(i) for i in np.flatnonzero(~np.isfinite(vals))]
    return _finish("wave", vals[np.isfinite(vals)], seed, failed, n_mc)


def write_csv(result, path):
    with open(path, "w", newline="") as fh:
        fh.write(f"# problem={result.problem} n_mc={result.n_mc} seed={result.seed} failures={result.failures}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample", "value"])
        for i, v in enumerate(result.values):
            w.writerow([i, format(float(v), ".17g")])


def read_csv(path):
    with open(path) as fh:
        head = fh.readline().lstrip("# ").split()
    meta = dict(kv.split("=", 1) for kv in head)
    data = np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2)
    return MCResult(meta["problem"], data[:, 1], int(meta["seed"]), int(meta["failures"]))
