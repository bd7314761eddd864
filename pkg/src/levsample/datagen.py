"""
datagen.py
========================
Synthetic regression designs: multivariate normal (MN), multivariate t with 3 or 1 degrees of freedom (T3, T1) and
log-normal (LN), all centered at the vector of ones with scale matrix D_ij = rho^|i - j|.

Normal variates come from numpy's ziggurat sampler (``Generator.standard_normal``) on a Philox stream, so a spec
always yields the same matrix.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
import scipy.linalg as scl

from levsample.errors import DimensionMismatch, InvalidSpec, TooSmall
from levsample.linalg import as_design
from levsample.sampler import derive_seed, make_generator

logger = logging.getLogger(__name__)


class Distribution(str, Enum):
    MN = "mn"
    T3 = "t3"
    LN = "ln"
    T1 = "t1"


_DEGREES_OF_FREEDOM = {Distribution.T3: 3, Distribution.T1: 1}


@dataclass(frozen=True)
class DataSpec:
    """
    :param noncentral: for T3/T1, shift before scaling ((1 + Z) / sqrt(S / nu)) instead of the location-shifted
        multivariate t (1 + Z / sqrt(S / nu))
    """
    dist: Distribution
    n: int
    p: int
    seed: int = 0
    rho: float = 0.7
    sigma: float = 1.0
    noncentral: bool = False

    def __post_init__(self):
        try:
            object.__setattr__(self, "dist", Distribution(self.dist))
        except ValueError:
            raise InvalidSpec(f"Unknown distribution {self.dist!r}")
        if self.p < 1 or self.n <= self.p:
            raise InvalidSpec(f"Data spec requires n > p >= 1, got n={self.n}, p={self.p}")
        if not -1.0 < self.rho < 1.0:
            raise InvalidSpec(f"Correlation must lie in (-1, 1), got {self.rho}")
        if self.sigma < 0:
            raise InvalidSpec(f"Noise standard deviation must be nonnegative, got {self.sigma}")
        if self.seed < 0:
            raise InvalidSpec(f"Seed must be nonnegative, got {self.seed}")


def scale_matrix(p: int, rho: float) -> np.ndarray:
    return scl.toeplitz(rho ** np.arange(p))


def gen_design(spec: DataSpec) -> np.ndarray:
    rng = make_generator(derive_seed(spec.seed, 0))
    L = scl.cholesky(scale_matrix(spec.p, spec.rho), lower=True)
    Z = rng.standard_normal((spec.n, spec.p)) @ L.T

    if spec.dist == Distribution.MN:
        X = 1.0 + Z
    elif spec.dist == Distribution.LN:
        X = np.exp(1.0 + Z)
    else:
        nu = _DEGREES_OF_FREEDOM[spec.dist]
        # one chi-square variate per row, shared by all its coordinates
        scale = np.sqrt(rng.chisquare(nu, size=spec.n) / nu)[:, None]
        X = (1.0 + Z) / scale if spec.noncentral else 1.0 + Z / scale

    logger.debug("Generated %s design of shape %s from seed %d", spec.dist.value, X.shape, spec.seed)
    return as_design(X)


def default_beta0(p: int) -> np.ndarray:
    """The first two and last two coefficients are 1, all others 0.1."""
    if p < 4:
        raise TooSmall(f"Default coefficient vector needs p >= 4, got {p}")
    beta0 = np.full(p, 0.1)
    beta0[[0, 1, -2, -1]] = 1.0
    return beta0


def gen_response(X, beta0, sigma: float, seed: int) -> np.ndarray:
    """Y = X beta0 + eps with eps_i iid N(0, sigma^2)."""
    X = np.asarray(X, dtype=np.float64)
    beta0 = np.asarray(beta0, dtype=np.float64).ravel()
    if beta0.shape[0] != X.shape[1]:
        raise DimensionMismatch(f"Coefficient vector has length {beta0.shape[0]}, design has {X.shape[1]} columns")
    rng = make_generator(derive_seed(seed, 1))
    Y = X @ beta0 + sigma * rng.standard_normal(X.shape[0])
    Y.setflags(write=False)
    return Y


def gen_dataset(spec: DataSpec, beta0: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Design, response and coefficient vector for a spec. The default coefficients are :func:`default_beta0`."""
    beta0 = default_beta0(spec.p) if beta0 is None else np.asarray(beta0, dtype=np.float64)
    X = gen_design(spec)
    return X, gen_response(X, beta0, spec.sigma, spec.seed), beta0
