"""Reproducible sample ensembles and empirical expectations.

Column ``j`` of an ensemble is drawn from its own PCG64 stream keyed by
``(seed, stream, j)``, so a column never changes when ``M`` grows and the
oracle can use a disjoint ``stream`` without sharing draws with the solver.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidArgumentError

SOLVER_STREAM = 0
ORACLE_STREAM = 1


class Distribution(str, Enum):
    UNIFORM = "uniform"  # uniform on [-0.5, 0.5]
    NORMAL = "standard_normal"


def _as_distribution(distribution):
    try:
        return Distribution(distribution)
    except ValueError:
        raise InvalidArgumentError(f"unknown distribution {distribution!r}") from None


def column_rng(seed, j, stream=SOLVER_STREAM):
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), int(j)))
    return np.random.Generator(np.random.PCG64(ss))


def draw_column(distribution, N, seed, j, stream=SOLVER_STREAM):
    """Draw column ``j`` (zero-based) of the ensemble."""
    rng = column_rng(seed, j, stream)
    if _as_distribution(distribution) is Distribution.UNIFORM:
        return rng.random(N) - 0.5
    return rng.standard_normal(N)


@dataclass(frozen=True)
class SampleEnsemble:
    """N realizations of M independent random variables.

    ``samples`` has shape (N, M).  An ensemble with ``M == 0`` is allowed and
    represents a deterministic problem (only the implicit constant column).
    """

    samples: np.ndarray
    distribution: Distribution
    seed: int
    stream: int = SOLVER_STREAM

    @property
    def N(self):
        return self.samples.shape[0]

    @property
    def M(self):
        return self.samples.shape[1]

    def row(self, n):
        return self.samples[n]


def generate(distribution, N, M, seed, stream=SOLVER_STREAM):
    """Generate an (N, M) ensemble.

    Raises
    ------
    InvalidArgumentError
        If ``N < 2`` or ``M < 1``.  Use :func:`deterministic_ensemble` for
        problems without random variables.
    """
    dist = _as_distribution(distribution)
    if int(N) < 2:
        raise InvalidArgumentError(f"N must be >= 2, got {N}")
    if int(M) < 1:
        raise InvalidArgumentError(f"M must be >= 1, got {M}")
    N, M = int(N), int(M)
    table = np.empty((N, M), order="F")
    for j in range(M):
        table[:, j] = draw_column(dist, N, seed, j, stream)
    return SampleEnsemble(table, dist, int(seed), int(stream))


def deterministic_ensemble(N, distribution=Distribution.UNIFORM, seed=0):
    """An (N, 0) ensemble: only the implicit constant variable xi_0 = 1."""
    if int(N) < 2:
        raise InvalidArgumentError(f"N must be >= 2, got {N}")
    return SampleEnsemble(np.empty((int(N), 0), order="F"), _as_distribution(distribution), int(seed))


def make_ensemble(distribution, N, M, seed, stream=SOLVER_STREAM):
    """:func:`generate` that also accepts ``M == 0``."""
    if int(M) == 0:
        return deterministic_ensemble(N, distribution, seed)
    return generate(distribution, N, M, seed, stream)


def iter_column_blocks(distribution, N, M, seed, block=64, stream=SOLVER_STREAM):
    """Yield ``(j0, block_table)`` without materializing the full N x M table."""
    for j0 in range(0, M, block):
        j1 = min(M, j0 + block)
        tab = np.empty((N, j1 - j0), order="F")
        for j in range(j0, j1):
            tab[:, j - j0] = draw_column(distribution, N, seed, j, stream)
        yield j0, tab


def _check_nonempty(x):
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise InvalidArgumentError("expectation of an empty sample list")
    return x


def expectation(f_samples):
    """Sample mean (numpy's pairwise summation, so the order is deterministic)."""
    return float(np.mean(_check_nonempty(f_samples)))


def expectation_product(a, b, c):
    """Sample mean of the elementwise triple product ``a*b*c``."""
    a = _check_nonempty(a)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    if not (a.shape == b.shape == c.shape):
        raise InvalidArgumentError(
            f"length mismatch: {a.shape}, {b.shape}, {c.shape}")
    return float(np.mean(a * b * c))


def weighted_means(weights, table):
    """``E{w * xi_j}`` for every column j of ``table`` at once, as a length-M array."""
    w = np.asarray(weights, dtype=float)
    if table.shape[1] == 0:
        return np.zeros(0)
    return (w @ table) / w.size
