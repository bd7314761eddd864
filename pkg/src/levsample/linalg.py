"""
linalg.py
========================
Dense linear algebra kernel: the full sample OLS fit, leverage scores and the row statistics the sampling schemes
are built from. All solves go through a thin QR factorization of the design matrix.

The inverse Gram matrix (X^T X)^{-1} is stored explicitly in :class:`OlsFit`. This costs O(p^2) memory, which is
negligible for the tall designs this package targets (p is at most a few dozen).
"""
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.linalg as scl

from levsample.errors import DimensionMismatch, InvalidSpec, RankDeficient

logger = logging.getLogger(__name__)

RANK_TOLERANCE = 1e-10


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def as_design(X) -> np.ndarray:
    """
    Validates a design matrix and returns it as a read-only float array of shape (n, p).
    """
    X = np.array(X, dtype=np.float64, ndmin=2)
    if X.ndim != 2:
        raise InvalidSpec(f"Design matrix must be two dimensional, got {X.ndim} dimensions")
    n, p = X.shape
    if p < 1 or n < p:
        raise InvalidSpec(f"Design matrix must satisfy n >= p >= 1, got n={n}, p={p}")
    if not np.all(np.isfinite(X)):
        raise InvalidSpec("Design matrix contains non-finite entries")
    return _readonly(X)


def as_response(Y, n: int) -> np.ndarray:
    Y = np.array(Y, dtype=np.float64).ravel()
    if Y.shape[0] != n:
        raise DimensionMismatch(f"Response has length {Y.shape[0]}, but the design matrix has {n} rows")
    if not np.all(np.isfinite(Y)):
        raise InvalidSpec("Response contains non-finite entries")
    return _readonly(Y)


def thin_qr(X: np.ndarray, error=RankDeficient) -> Tuple[np.ndarray, np.ndarray]:
    """
    Computes the thin QR factorization X = QR and checks the numerical rank.

    :param error: exception class raised if a diagonal entry of R falls below RANK_TOLERANCE times the largest one
    """
    Q, R = scl.qr(X, mode="economic")
    diagonal = np.abs(np.diag(R))
    if diagonal.size == 0 or diagonal.max() == 0.0 or diagonal.min() < RANK_TOLERANCE * diagonal.max():
        raise error(f"Matrix of shape {X.shape} is numerically rank deficient")
    return Q, R


def _inverse_factor(R: np.ndarray) -> np.ndarray:
    return scl.solve_triangular(R, np.eye(R.shape[0]))


@dataclass(frozen=True)
class OlsFit:
    beta_hat: np.ndarray
    residuals: np.ndarray
    leverage: np.ndarray
    sigma2_hat: float
    gram_inverse: np.ndarray

    @property
    def n(self) -> int:
        return self.residuals.shape[0]

    @property
    def p(self) -> int:
        return self.beta_hat.shape[0]


def ols_fit(X, Y) -> OlsFit:
    """
    Fits the full sample ordinary least squares problem min ||Y - X beta||.

    The coefficients are obtained from the QR factors by a triangular solve. The leverage scores are the squared row
    norms of Q and sum to p. If n == p the fit interpolates and the noise variance estimate is 0.
    """
    X = as_design(X)
    n, p = X.shape
    Y = as_response(Y, n)

    Q, R = thin_qr(X)
    beta_hat = scl.solve_triangular(R, Q.T @ Y)
    residuals = Y - X @ beta_hat
    leverage = np.einsum("ij,ij->i", Q, Q)
    sigma2_hat = float(residuals @ residuals / (n - p)) if n > p else 0.0

    R_inv = _inverse_factor(R)
    gram_inverse = R_inv @ R_inv.T
    gram_inverse = (gram_inverse + gram_inverse.T) / 2

    logger.debug("OLS fit on %d x %d design, sigma2_hat=%g", n, p, sigma2_hat)
    return OlsFit(
        beta_hat=_readonly(beta_hat),
        residuals=_readonly(residuals),
        leverage=_readonly(leverage),
        sigma2_hat=sigma2_hat,
        gram_inverse=_readonly(gram_inverse),
    )


def leverage_scores(X) -> np.ndarray:
    """h_i = x_i^T (X^T X)^{-1} x_i, computed as squared row norms of the orthogonal factor."""
    Q, _ = thin_qr(as_design(X))
    return _readonly(np.einsum("ij,ij->i", Q, Q))


def gram_inverse(X) -> np.ndarray:
    _, R = thin_qr(as_design(X))
    R_inv = _inverse_factor(R)
    G = R_inv @ R_inv.T
    return _readonly((G + G.T) / 2)


def gram_inverse_row_norms(X) -> np.ndarray:
    """
    Returns ||(X^T X)^{-1} x_i|| for every row.

    With x_i^T = q_i^T R we have (X^T X)^{-1} x_i = R^{-1} q_i, so no explicit inverse is needed.
    """
    Q, R = thin_qr(as_design(X))
    rows = scl.solve_triangular(R, Q.T).T
    return _readonly(np.linalg.norm(rows, axis=1))


def row_norms(X) -> np.ndarray:
    X = np.array(X, dtype=np.float64, ndmin=2)
    return _readonly(np.linalg.norm(X, axis=1))
