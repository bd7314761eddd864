"""
sampler.py
========================
With-replacement subsampling and the weighted subsample least squares estimator.

Random streams use numpy's Philox counter-based bit generator. A draw is fully determined by (pi, r, seed), and
per-replicate seeds are derived from a master seed with :func:`derive_seed`, so results reproduce across platforms
and do not depend on scheduling.
"""
import itertools
import logging
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
import scipy.linalg as scl
from scipy import stats

from levsample.errors import DimensionMismatch, InvalidSize, InvalidSpec, SingularSubsample, ZeroProbability
from levsample.linalg import as_design, as_response, thin_qr
from levsample.probs import ProbabilityVector, SchemeSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SubsampleDraw:
    counts: np.ndarray  # K_i, number of times row i was drawn
    r: int
    seed: int

    @property
    def indices(self) -> np.ndarray:
        """Distinct rows that were drawn at least once."""
        return np.flatnonzero(self.counts)


@dataclass(frozen=True)
class SubsampleEstimate:
    beta_tilde: np.ndarray
    draw: SubsampleDraw
    scheme: SchemeSpec


def derive_seed(master_seed: int, *key: int) -> int:
    """
    Derives an independent 64-bit seed for the stream identified by ``key`` (for example scheme, sample size and
    replicate index). Distinct keys give statistically independent streams.
    """
    if int(master_seed) < 0 or any(int(k) < 0 for k in key):
        raise InvalidSpec(f"Seeds and seed keys must be nonnegative, got {master_seed} and {key}")
    sequence = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def make_generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def _alias_table(pi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Walker/Vose alias table for a distribution with strictly positive entries.
    Returns acceptance thresholds and alias indices.
    """
    m = pi.shape[0]
    scaled = pi * (m / pi.sum())
    threshold = np.ones(m)
    alias = np.arange(m)

    small = [i for i in range(m) if scaled[i] < 1.0]
    large = [i for i in range(m) if scaled[i] >= 1.0]
    while small and large:
        s = small.pop()
        g = large.pop()
        threshold[s] = scaled[s]
        alias[s] = g
        scaled[g] = scaled[g] - (1.0 - scaled[s])
        if scaled[g] < 1.0:
            small.append(g)
        else:
            large.append(g)
    # leftovers are 1 up to rounding and keep threshold 1
    return threshold, alias


def _categorical_alias(pi: np.ndarray, r: int, rng: np.random.Generator) -> np.ndarray:
    support = np.flatnonzero(pi > 0)
    threshold, alias = _alias_table(pi[support])
    columns = rng.integers(0, support.shape[0], size=r)
    accept = rng.random(r) < threshold[columns]
    picked = np.where(accept, columns, alias[columns])
    return support[picked]


def _categorical_inverse_cdf(pi: np.ndarray, r: int, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(pi)
    u = rng.random(r) * cdf[-1]
    # side="right" never lands on a zero-probability row, since such rows do not increase the cdf
    return np.minimum(np.searchsorted(cdf, u, side="right"), pi.shape[0] - 1)


def draw_subsample(pi: ProbabilityVector, r: int, seed: int) -> SubsampleDraw:
    """
    Draws r row indices independently from the categorical distribution pi and returns their counts, which follow
    Multinomial(r, pi). Uses the alias method if r >= n and inverse-cdf binary search otherwise.
    """
    if int(r) < 1:
        raise InvalidSize(f"Subsample size must be at least 1, got {r}")
    if int(seed) < 0:
        raise InvalidSize(f"Subsample seed must be nonnegative, got {seed}")
    r = int(r)
    probabilities = np.asarray(pi.pi, dtype=np.float64)
    n = probabilities.shape[0]
    rng = make_generator(seed)

    if r >= n:
        indices = _categorical_alias(probabilities, r, rng)
    else:
        indices = _categorical_inverse_cdf(probabilities, r, rng)

    counts = np.bincount(indices, minlength=n)
    counts.setflags(write=False)
    return SubsampleDraw(counts=counts, r=r, seed=int(seed))


def reweighting_diagonal(draw: SubsampleDraw, pi: ProbabilityVector) -> np.ndarray:
    """Diagonal of W = Omega K, i.e. K_i / (r pi_i). Rows that cannot be drawn get weight 0."""
    probabilities = np.asarray(pi.pi, dtype=np.float64)
    if np.any((draw.counts > 0) & (probabilities <= 0)):
        raise ZeroProbability("Draw contains rows with zero sampling probability")
    weights = np.zeros(probabilities.shape[0])
    np.divide(draw.counts, draw.r * probabilities, out=weights, where=probabilities > 0)
    return weights


def weighted_ls(X, Y, draw: SubsampleDraw, pi: ProbabilityVector) -> SubsampleEstimate:
    """
    Solves the weighted subsample problem min ||Phi* Y* - Phi* X* beta|| with Phi* = diag(1/sqrt(r pi*)).

    A row drawn K_i times enters once, scaled by sqrt(K_i / (r pi_i)); this gives the same normal equations as
    repeating it.
    """
    X = as_design(X)
    n, p = X.shape
    Y = as_response(Y, n)
    if draw.counts.shape[0] != n:
        raise DimensionMismatch(f"Draw has {draw.counts.shape[0]} counts, but the design has {n} rows")

    rows = draw.indices
    if rows.shape[0] < p:
        raise SingularSubsample(f"Only {rows.shape[0]} distinct rows drawn for {p} predictors")

    scale = np.sqrt(reweighting_diagonal(draw, pi)[rows])
    Q, R = thin_qr(X[rows] * scale[:, None], error=SingularSubsample)
    beta_tilde = scl.solve_triangular(R, Q.T @ (Y[rows] * scale))
    beta_tilde.setflags(write=False)
    return SubsampleEstimate(beta_tilde=beta_tilde, draw=draw, scheme=pi.scheme)


def weighted_ls_matrix_form(X, Y, draw: SubsampleDraw, pi: ProbabilityVector) -> SubsampleEstimate:
    """beta = (X^T W X)^{-1} X^T W Y over the full design, with W = Omega K."""
    X = as_design(X)
    n, p = X.shape
    Y = as_response(Y, n)
    if draw.counts.shape[0] != n:
        raise DimensionMismatch(f"Draw has {draw.counts.shape[0]} counts, but the design has {n} rows")

    W = reweighting_diagonal(draw, pi)
    A = X.T @ (W[:, None] * X)
    b = X.T @ (W * Y)
    if np.linalg.matrix_rank(A) < p:
        raise SingularSubsample("Weighted subsample Gram matrix is singular")
    try:
        beta_tilde = scl.solve(A, b, assume_a="pos")
    except (np.linalg.LinAlgError, scl.LinAlgError) as e:
        raise SingularSubsample(f"Weighted subsample Gram matrix is singular: {e}")
    beta_tilde.setflags(write=False)
    return SubsampleEstimate(beta_tilde=beta_tilde, draw=draw, scheme=pi.scheme)


def _count_vectors(n: int, r: int):
    for cut in itertools.combinations(range(r + n - 1), n - 1):
        bounds = (-1,) + cut + (r + n - 1,)
        yield tuple(bounds[i + 1] - bounds[i] - 1 for i in range(n))


def multinomial_law(pi, r: int) -> Dict[Tuple[int, ...], float]:
    """Exact law of Multinomial(r, pi) over all count vectors summing to r."""
    pi = np.asarray(getattr(pi, "pi", pi), dtype=np.float64)
    return {k: float(stats.multinomial.pmf(k, n=r, p=pi)) for k in _count_vectors(pi.shape[0], r)}


def conditioned_poisson_law(pi, r: int) -> Dict[Tuple[int, ...], float]:
    """
    Exact law of independent Poisson(r pi_i) counts conditioned on their total being r. Equals
    :func:`multinomial_law` for the same arguments.
    """
    pi = np.asarray(getattr(pi, "pi", pi), dtype=np.float64)
    total = stats.poisson.pmf(r, r * pi.sum())
    return {
        k: float(np.prod(stats.poisson.pmf(np.array(k), r * pi)) / total)
        for k in _count_vectors(pi.shape[0], r)
    }
