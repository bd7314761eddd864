"""
asymptotics.py
========================
Asymptotic covariance matrices of the subsample estimator, the AMSE and EAMSE criteria, confidence intervals,
regularity diagnostics and the Monte Carlo checks of asymptotic normality.

Unconditional inference targets the true parameter beta_0, so both the noise and the sampling are random.
Conditional inference keeps the full sample fixed and targets the OLS solution, so only the sampling is random.

All evaluators take the noise variance explicitly. Simulations pass the true sigma^2, real data analyses pass
``fit.sigma2_hat``.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np
import scipy.linalg as scl
from scipy import stats

from levsample.errors import InvalidLevel, ZeroProbability
from levsample.linalg import OlsFit, as_design, gram_inverse, row_norms
from levsample.probs import OPTIMAL_SCHEME, Mode, ProbabilityVector, SchemeSpec, Target, build_probs
from levsample.sampler import SubsampleEstimate, make_generator

logger = logging.getLogger(__name__)

__all__ = [
    "AsymptoticCovariance", "RegularityDiagnostics", "OptimalityReport", "NormalityReport", "Mode", "Target",
    "sigma0", "sigma_c", "amse", "eamse", "optimal_probs_verify", "confidence_intervals", "check_regularity",
    "standardize", "ks_normality", "projection_ks", "interval_coverage",
]


@dataclass(frozen=True)
class AsymptoticCovariance:
    matrix: np.ndarray
    mode: Mode


@dataclass(frozen=True)
class RegularityDiagnostics:
    lambda_min: float
    lambda_max: float
    pi_min: float
    pi_max: float
    r_over_n: float
    flags: List[str] = field(default_factory=list)


@dataclass(frozen=True)
class OptimalityReport:
    scheme: SchemeSpec
    mode: Mode
    target: Target
    optimal_objective: float
    objectives: np.ndarray  # objective at each random simplex point
    min_gap: float  # min over trials of (random objective - optimal objective)
    strict_fraction: float

    @property
    def passed(self) -> bool:
        return self.min_gap >= -1e-12 * abs(self.optimal_objective)


@dataclass(frozen=True)
class NormalityReport:
    statistics: np.ndarray
    pvalues: np.ndarray
    alpha: float

    @property
    def passed(self) -> bool:
        # Bonferroni over the tested coordinates
        return bool(np.all(self.pvalues >= self.alpha / self.pvalues.shape[0]))


def _probabilities(pi: Union[ProbabilityVector, np.ndarray]) -> np.ndarray:
    pi = np.asarray(getattr(pi, "pi", pi), dtype=np.float64)
    if np.any(pi <= 0):
        raise ZeroProbability(f"{np.count_nonzero(pi <= 0)} sampling probabilities are zero")
    return pi


def _target_scores(X: np.ndarray, G: np.ndarray, target: Target) -> np.ndarray:
    """
    Row weights s_i with tr(L Omega-term L^T) = sum_i s_i / (r pi_i) for the target's linear map L:
    ||(X^T X)^{-1} x_i||^2 for beta, h_ii = ||X (X^T X)^{-1} x_i||^2 for X beta and ||x_i||^2 for X^T X beta.
    """
    target = Target(target)
    if target == Target.COEF:
        return np.sum((X @ G) ** 2, axis=1)
    if target == Target.FIT:
        return np.einsum("ij,jk,ik->i", X, G, X)
    return row_norms(X) ** 2


def sigma0(X, pi, r: int, sigma2: float) -> AsymptoticCovariance:
    """
    Unconditional asymptotic covariance sigma^2 [(X^T X)^{-1} + (X^T X)^{-1} X^T Omega X (X^T X)^{-1}] with
    Omega = diag(1/(r pi_i)). The first term is the variance of the full sample OLS estimator.
    """
    X = as_design(X)
    pi = _probabilities(pi)
    G = gram_inverse(X)
    middle = X.T @ (X / (r * pi)[:, None])
    matrix = sigma2 * (G + G @ middle @ G)
    return AsymptoticCovariance(matrix=(matrix + matrix.T) / 2, mode=Mode.UNCONDITIONAL)


def sigma_c(X, residuals, pi, r: int) -> AsymptoticCovariance:
    """
    Conditional sandwich (1/r) (X^T X)^{-1} (sum_i e_i^2 / pi_i x_i x_i^T) (X^T X)^{-1}.

    The residuals carry the noise scale, so the result is the covariance of the subsample estimator around the
    OLS solution itself.
    """
    X = as_design(X)
    pi = _probabilities(pi)
    e = np.asarray(residuals, dtype=np.float64)
    G = gram_inverse(X)
    middle = X.T @ (X * (e ** 2 / pi)[:, None])
    matrix = G @ middle @ G / r
    return AsymptoticCovariance(matrix=(matrix + matrix.T) / 2, mode=Mode.CONDITIONAL)


def amse(X, pi, r: int, sigma2: float, target: Target) -> float:
    """
    AMSE of the target around its true value: sigma^2 tr(L (X^T X)^{-1} L^T) + (sigma^2 / r) sum_i s_i / pi_i,
    which is p sigma^2 for X beta and sigma^2 tr(X^T X) for X^T X beta in the first term.
    """
    X = as_design(X)
    pi = _probabilities(pi)
    G = gram_inverse(X)
    target = Target(target)
    if target == Target.COEF:
        full_sample = np.trace(G)
    elif target == Target.FIT:
        full_sample = X.shape[1]
    else:
        full_sample = np.sum(X ** 2)
    return float(sigma2 * full_sample + sigma2 / r * np.sum(_target_scores(X, G, target) / pi))


def eamse(X, fit: OlsFit, pi, r: int, target: Target, sigma2: Optional[float] = None) -> float:
    """
    Expected AMSE around the OLS solution, replacing e_i^2 by its expectation (1 - h_ii) sigma^2:
    (1/r) sum_i (1 - h_ii) sigma^2 / pi_i s_i. Uses ``fit.sigma2_hat`` unless sigma2 is given.
    """
    X = as_design(X)
    pi = _probabilities(pi)
    if sigma2 is None:
        sigma2 = fit.sigma2_hat
        logger.debug("EAMSE uses the residual variance estimate sigma2_hat = %g", sigma2)
    else:
        logger.debug("EAMSE uses the given sigma2 = %g", sigma2)
    h = np.clip(fit.leverage, 0.0, 1.0)
    scores = _target_scores(X, fit.gram_inverse, target)
    return float(np.sum((1.0 - h) * sigma2 / pi * scores) / r)


def _objective(X, fit: OlsFit, pi: np.ndarray, r: int, sigma2: float, target: Target, mode: Mode) -> float:
    if mode == Mode.UNCONDITIONAL:
        return amse(X, pi, r, sigma2, target)
    return eamse(X, fit, pi, r, target, sigma2=sigma2)


def optimal_probs_verify(X, fit: OlsFit, r: int, sigma2: float, target: Target, mode: Mode, trials: int,
                         seed: int) -> OptimalityReport:
    """
    Compares the objective (AMSE for unconditional, EAMSE for conditional inference) at the closed-form optimal
    probabilities against ``trials`` points drawn uniformly from the probability simplex.
    """
    X = as_design(X)
    mode, target = Mode(mode), Target(target)
    spec = SchemeSpec(OPTIMAL_SCHEME[(mode, target)])
    optimal = _objective(X, fit, build_probs(X, fit, spec).pi, r, sigma2, target, mode)

    rng = make_generator(seed)
    n = X.shape[0]
    objectives = np.empty(trials)
    for t in range(trials):
        candidate = rng.dirichlet(np.ones(n))
        # dirichlet draws may underflow to exactly 0 in single coordinates
        candidate = np.maximum(candidate, np.finfo(float).tiny)
        objectives[t] = _objective(X, fit, candidate / candidate.sum(), r, sigma2, target, mode)

    gaps = objectives - optimal
    report = OptimalityReport(
        scheme=spec, mode=mode, target=target, optimal_objective=optimal, objectives=objectives,
        min_gap=float(gaps.min()) if trials else 0.0,
        strict_fraction=float(np.mean(gaps > 0)) if trials else 1.0,
    )
    logger.info("%s optimality for %s/%s: min gap %g over %d trials", spec.label, mode.value, target.value,
                report.min_gap, trials)
    return report


def confidence_intervals(estimate: SubsampleEstimate, cov: AsymptoticCovariance, level: float) -> np.ndarray:
    """
    Normal intervals beta_j -/+ z sqrt(cov_jj) with z the (1 + level)/2 standard normal quantile.
    Returns an array of shape (p, 2) holding lower and upper bounds.
    """
    if not 0.0 < level < 1.0:
        raise InvalidLevel(f"Confidence level must lie in (0, 1), got {level}")
    z = stats.norm.ppf((1.0 + level) / 2.0)
    half_width = z * np.sqrt(np.clip(np.diag(cov.matrix), 0.0, None))
    beta = np.asarray(estimate.beta_tilde)
    return np.column_stack([beta - half_width, beta + half_width])


def check_regularity(X, pi, r: int, min_sampling_mass: float = 1.0) -> RegularityDiagnostics:
    """
    Raw quantities behind the regularity conditions: eigenvalue extremes of X^T X / n, probability extremes and r/n.

    The conditions themselves are asymptotic rates and cannot be checked on one dataset. Flags are heuristics:
    ``NonzeroProbability`` if some pi_i = 0, ``SmallSamplingProbability`` if pi_min r n < min_sampling_mass and
    ``IllConditioned`` if lambda_min is negligible relative to lambda_max.
    """
    X = as_design(X)
    n = X.shape[0]
    pi = np.asarray(getattr(pi, "pi", pi), dtype=np.float64)
    eigenvalues = scl.eigvalsh(X.T @ X / n)
    lambda_min, lambda_max = float(eigenvalues[0]), float(eigenvalues[-1])
    pi_min, pi_max = float(pi.min()), float(pi.max())

    flags = []
    if pi_min <= 0.0:
        flags.append("NonzeroProbability")
    elif pi_min * r * n < min_sampling_mass:
        flags.append("SmallSamplingProbability")
    if lambda_min <= 1e-10 * lambda_max:
        flags.append("IllConditioned")
    for flag in flags:
        logger.warning("Regularity flag %s raised", flag)

    return RegularityDiagnostics(lambda_min=lambda_min, lambda_max=lambda_max, pi_min=pi_min, pi_max=pi_max,
                                 r_over_n=r / n, flags=flags)


def standardize(estimates: np.ndarray, center: np.ndarray, cov: AsymptoticCovariance) -> np.ndarray:
    """Maps each row b of ``estimates`` to cov^{-1/2} (estimate_b - center) via the symmetric inverse root."""
    eigenvalues, eigenvectors = scl.eigh(cov.matrix)
    inverse_root = eigenvectors @ np.diag(1.0 / np.sqrt(eigenvalues)) @ eigenvectors.T
    return (np.atleast_2d(estimates) - center) @ inverse_root.T


def ks_normality(estimates: np.ndarray, center: np.ndarray, cov: AsymptoticCovariance,
                 alpha: float = 0.01) -> NormalityReport:
    """Per-coordinate Kolmogorov-Smirnov tests of the standardized estimates against N(0, 1)."""
    z = standardize(estimates, center, cov)
    results = [stats.kstest(z[:, j], "norm") for j in range(z.shape[1])]
    return NormalityReport(
        statistics=np.array([res.statistic for res in results]),
        pvalues=np.array([res.pvalue for res in results]),
        alpha=alpha,
    )


def projection_ks(estimates: np.ndarray, center: np.ndarray, cov: AsymptoticCovariance, a: np.ndarray,
                  alpha: float = 0.01) -> NormalityReport:
    """KS test of a^T (estimate - center) / sqrt(a^T cov a) against N(0, 1), for a fixed direction a."""
    a = np.asarray(a, dtype=np.float64)
    scale = np.sqrt(a @ cov.matrix @ a)
    z = (np.atleast_2d(estimates) - center) @ a / scale
    res = stats.kstest(z, "norm")
    return NormalityReport(statistics=np.array([res.statistic]), pvalues=np.array([res.pvalue]), alpha=alpha)


def interval_coverage(intervals: np.ndarray, truth: np.ndarray) -> float:
    """Fraction of intervals (shape (B, p, 2)) that contain the corresponding coordinate of ``truth``."""
    intervals = np.asarray(intervals)
    covered = (intervals[..., 0] <= truth) & (truth <= intervals[..., 1])
    return float(covered.mean())
