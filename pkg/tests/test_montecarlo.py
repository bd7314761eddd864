"""
Monte Carlo checks of the asymptotic results. They take minutes; deselect them with ``-m "not slow"``.
"""
import numpy as np
import pytest

from levsample.asymptotics import (confidence_intervals, interval_coverage, ks_normality, projection_ks, sigma0,
                                   sigma_c)
from levsample.datagen import DataSpec, default_beta0, gen_dataset, gen_design, gen_response
from levsample.harness import ExperimentConfig, draw_estimates, run_experiment
from levsample.linalg import ols_fit
from levsample.probs import Mode, Scheme, SchemeSpec, build_probs
from levsample.sampler import SubsampleEstimate, derive_seed, draw_subsample, weighted_ls

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def dataset():
    X, Y, _ = gen_dataset(DataSpec(dist="mn", n=2000, p=5, seed=21))
    return X, Y, ols_fit(X, Y)


@pytest.mark.parametrize("kind", [Scheme.UNIF, Scheme.ICNLEV])
def test_conditional_covariance(dataset, kind):
    X, Y, fit = dataset
    pi = build_probs(X, fit, SchemeSpec(kind))
    batch = draw_estimates(X, Y, pi, r=1000, replicates=5000, master_seed=1, threads=0)
    empirical = np.cov(batch.estimates.T)
    predicted = sigma_c(X, fit.residuals, pi, 1000).matrix
    assert np.linalg.norm(empirical - predicted) <= 0.15 * np.linalg.norm(predicted)


@pytest.mark.parametrize("kind", [Scheme.UNIF, Scheme.ICNLEV])
def test_conditional_normality(dataset, kind):
    X, Y, fit = dataset
    pi = build_probs(X, fit, SchemeSpec(kind))
    batch = draw_estimates(X, Y, pi, r=1000, replicates=5000, master_seed=2, threads=0)
    report = ks_normality(batch.estimates, fit.beta_hat, sigma_c(X, fit.residuals, pi, 1000))
    assert report.passed, report.pvalues


@pytest.mark.parametrize("kind", [Scheme.UNIF, Scheme.IC])
def test_unconditional_normality(kind):
    spec = DataSpec(dist="mn", n=2000, p=5, seed=31)
    X = gen_design(spec)
    beta0 = default_beta0(spec.p)
    r = 1000
    # neither scheme looks at the response
    pi = build_probs(X, ols_fit(X, gen_response(X, beta0, 1.0, 0)), SchemeSpec(kind))
    estimates = np.empty((5000, spec.p))
    for b in range(5000):
        Y = gen_response(X, beta0, 1.0, derive_seed(32, 0, b))
        draw = draw_subsample(pi, r, derive_seed(32, 1, b))
        estimates[b] = weighted_ls(X, Y, draw, pi).beta_tilde
    report = ks_normality(estimates, beta0, sigma0(X, pi, r, 1.0))
    assert report.passed, report.pvalues


def test_unconditional_projection():
    spec = DataSpec(dist="mn", n=4000, p=63, seed=3)
    X = gen_design(spec)
    beta0 = default_beta0(spec.p)
    r = 1000
    pi = build_probs(X, ols_fit(X, gen_response(X, beta0, 1.0, 0)), SchemeSpec(Scheme.UNIF))
    a = np.ones(spec.p) / np.sqrt(spec.p)
    estimates = np.empty((5000, spec.p))
    for b in range(5000):
        Y = gen_response(X, beta0, 1.0, derive_seed(4, 0, b))
        draw = draw_subsample(pi, r, derive_seed(4, 1, b))
        estimates[b] = weighted_ls(X, Y, draw, pi).beta_tilde
    report = projection_ks(estimates, beta0, sigma0(X, pi, r, 1.0), a)
    assert report.passed, report.pvalues


def test_interval_coverage(dataset):
    X, Y, fit = dataset
    pi = build_probs(X, fit, SchemeSpec(Scheme.UNIF))
    r = 1000
    cov = sigma_c(X, fit.residuals, pi, r)
    batch = draw_estimates(X, Y, pi, r=r, replicates=2000, master_seed=5, threads=0)
    intervals = np.array([
        confidence_intervals(SubsampleEstimate(beta_tilde=beta, draw=None, scheme=pi.scheme), cov, 0.95)
        for beta in batch.estimates
    ])
    assert 0.93 <= interval_coverage(intervals, fit.beta_hat) <= 0.97


@pytest.mark.parametrize("mode", list(Mode))
def test_unbiased(mode):
    cfg = ExperimentConfig(mode=mode, data=DataSpec(dist="mn", n=2000, p=5, seed=6),
                           schemes=[SchemeSpec(kind) for kind in (Scheme.UNIF, Scheme.BLEV, Scheme.SLEV, Scheme.IC)],
                           sample_sizes=[500], replicates=2000, master_seed=7)
    for cell in run_experiment(cfg).cells:
        assert cell.squared_bias <= 0.05 * cell.variance, cell


def test_variance_decreases_with_sample_size():
    cfg = ExperimentConfig(mode=Mode.CONDITIONAL, data=DataSpec(dist="mn", n=2000, p=5, seed=8),
                           schemes=[SchemeSpec(kind) for kind in Scheme], sample_sizes=[100, 200, 500, 1000],
                           replicates=500, master_seed=9)
    report = run_experiment(cfg)
    for kind in Scheme:
        variances = [report.cell(kind.value, r).variance for r in cfg.sample_sizes]
        for smaller, larger in zip(variances, variances[1:]):
            assert larger <= 1.05 * smaller, (kind, variances)


def test_icnlev_beats_blev_on_heavy_tails():
    cfg = ExperimentConfig(mode=Mode.CONDITIONAL, data=DataSpec(dist="t3", n=5000, p=10, seed=10),
                           schemes=[SchemeSpec(Scheme.BLEV), SchemeSpec(Scheme.ICNLEV)], sample_sizes=[500, 1000],
                           replicates=200, master_seed=11)
    report = run_experiment(cfg)
    for r in cfg.sample_sizes:
        assert report.cell("icnlev", r).variance <= 1.1 * report.cell("blev", r).variance
