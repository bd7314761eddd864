import numpy as np
import pytest

from levsample.errors import DimensionMismatch, InvalidSize, InvalidSpec, SingularSubsample, ZeroProbability
from levsample.linalg import ols_fit
from levsample.probs import ProbabilityVector, Scheme, SchemeSpec, build_probs
from levsample.sampler import (SubsampleDraw, _categorical_alias, _categorical_inverse_cdf, conditioned_poisson_law,
                               derive_seed, draw_subsample, make_generator, multinomial_law, reweighting_diagonal,
                               weighted_ls, weighted_ls_matrix_form)


def vector(pi) -> ProbabilityVector:
    return ProbabilityVector(pi=np.asarray(pi, dtype=float), scheme=SchemeSpec(Scheme.UNIF))


def counts(*k) -> SubsampleDraw:
    return SubsampleDraw(counts=np.array(k), r=int(sum(k)), seed=0)


def test_point_mass():
    assert list(draw_subsample(vector([1.0, 0.0, 0.0]), 7, seed=1).counts) == [7, 0, 0]
    assert list(draw_subsample(vector([0.0, 1.0, 0.0]), 2, seed=1).counts) == [0, 2, 0]


def test_counts_sum_to_r():
    pi = vector([0.1, 0.2, 0.3, 0.4])
    for r in [1, 2, 3, 4, 10, 1000]:
        draw = draw_subsample(pi, r, seed=r)
        assert draw.counts.sum() == r
        assert draw.r == r


def test_zero_probability_rows_never_drawn():
    pi = vector([0.5, 0.0, 0.5, 0.0, 0.0])
    for r in [1, 3, 5, 100]:
        for seed in range(20):
            draw = draw_subsample(pi, r, seed)
            assert draw.counts[[1, 3, 4]].sum() == 0


def test_binomial_moments():
    r = 10000
    first = [draw_subsample(vector([0.5, 0.5]), r, seed).counts[0] for seed in range(20)]
    assert abs(np.mean(first) - r / 2) <= 3 * np.sqrt(r * 0.25)


def test_categorical_frequencies():
    pi = np.array([0.05, 0.0, 0.15, 0.3, 0.5])
    for sampler in (_categorical_alias, _categorical_inverse_cdf):
        indices = sampler(pi, 200000, make_generator(11))
        frequencies = np.bincount(indices, minlength=5) / 200000
        assert np.abs(frequencies - pi).max() < 0.005
        assert frequencies[1] == 0.0


def test_deterministic():
    pi = vector([0.1, 0.2, 0.3, 0.4])
    for r in [2, 50]:
        assert np.array_equal(draw_subsample(pi, r, 42).counts, draw_subsample(pi, r, 42).counts)
    first = draw_subsample(pi, 50, 42).counts
    assert any(not np.array_equal(first, draw_subsample(pi, 50, seed).counts) for seed in range(43, 53))


def test_invalid_size():
    with pytest.raises(InvalidSize):
        draw_subsample(vector([0.5, 0.5]), 0, seed=0)
    with pytest.raises(InvalidSize):
        draw_subsample(vector([0.5, 0.5]), 3, seed=-5)


def test_derive_seed():
    assert derive_seed(1, 0, 2) == derive_seed(1, 0, 2)
    seeds = {derive_seed(1, 0, b) for b in range(100)} | {derive_seed(2, 0, b) for b in range(100)}
    assert len(seeds) == 200
    with pytest.raises(InvalidSpec):
        derive_seed(-1, 0)
    with pytest.raises(InvalidSpec):
        derive_seed(1, -2)


def test_full_uniform_draw_recovers_ols():
    rng = np.random.default_rng(8)
    X, Y = rng.standard_normal((12, 3)), rng.standard_normal(12)
    draw = SubsampleDraw(counts=np.ones(12, dtype=int), r=12, seed=0)
    pi = vector(np.full(12, 1 / 12))
    beta_ols = ols_fit(X, Y).beta_hat
    assert np.abs(weighted_ls(X, Y, draw, pi).beta_tilde - beta_ols).max() < 1e-12
    assert np.abs(weighted_ls_matrix_form(X, Y, draw, pi).beta_tilde - beta_ols).max() < 1e-10


def test_mean_examples():
    X, Y = [[1.0], [1.0]], [1.0, 3.0]
    pi = vector([0.5, 0.5])
    for solve in (weighted_ls, weighted_ls_matrix_form):
        assert solve(X, Y, counts(1, 1), pi).beta_tilde == pytest.approx([2.0])
        assert solve(X, Y, counts(2, 0), pi).beta_tilde == pytest.approx([1.0])


def test_square_subsample_interpolates():
    X = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, 1.0]])
    Y = np.array([3.0, -1.0, 5.0, 0.5])
    pi = vector([0.25] * 4)
    for solve in (weighted_ls, weighted_ls_matrix_form):
        assert solve(X, Y, counts(1, 1, 0, 0), pi).beta_tilde == pytest.approx([3.0, -1.0])


def test_two_forms_agree():
    rng = np.random.default_rng(9)
    for trial in range(1000):
        p = int(rng.integers(1, 6))
        n = int(rng.integers(p + 5, 51))
        X, Y = rng.standard_normal((n, p)), rng.standard_normal(n)
        kind = Scheme.BLEV if trial % 2 else Scheme.UNIF
        pi = build_probs(X, ols_fit(X, Y), SchemeSpec(kind))
        draw = draw_subsample(pi, 2 * n, seed=trial)
        qr = weighted_ls(X, Y, draw, pi).beta_tilde
        normal = weighted_ls_matrix_form(X, Y, draw, pi).beta_tilde
        assert np.linalg.norm(qr - normal) <= 1e-10 * max(np.linalg.norm(qr), 1.0)


def test_singular_subsample():
    X = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, 2.0]])
    Y = np.zeros(4)
    pi = vector([0.25] * 4)
    for solve in (weighted_ls, weighted_ls_matrix_form):
        # one distinct row for two predictors
        with pytest.raises(SingularSubsample):
            solve(X, Y, counts(3, 0, 0, 0), pi)
        # two distinct, collinear rows
        with pytest.raises(SingularSubsample):
            solve(X, Y, counts(0, 0, 1, 1), pi)


def test_draw_for_another_design():
    X, Y = np.eye(4)[:, :2] + 1.0, np.arange(4.0)
    pi = vector([0.25] * 4)
    for solve in (weighted_ls, weighted_ls_matrix_form):
        with pytest.raises(DimensionMismatch) as info:
            solve(X, Y, counts(1, 1, 1), pi)
        assert info.value.exit_code == 2


def test_zero_probability_in_draw():
    with pytest.raises(ZeroProbability):
        reweighting_diagonal(counts(1, 1), vector([1.0, 0.0]))


def test_reweighting_diagonal():
    assert reweighting_diagonal(counts(3, 1, 0), vector([0.5, 0.25, 0.25])) == pytest.approx([1.5, 1.0, 0.0])


def test_reweighting_moments():
    pi = np.array([0.2, 0.3, 0.5])
    r = 50
    W = np.array([reweighting_diagonal(draw_subsample(vector(pi), r, seed), vector(pi)) for seed in range(4000)])
    assert W.mean(axis=0) == pytest.approx([1.0, 1.0, 1.0], abs=0.02)
    assert W.var(axis=0) == pytest.approx((1 - pi) / (r * pi), rel=0.1)
    # off-diagonal covariance of W is -1/r
    assert np.cov(W[:, 0], W[:, 1])[0, 1] == pytest.approx(-1 / r, rel=0.2)


def test_multinomial_equals_conditioned_poisson():
    for pi in ([0.2, 0.3, 0.5], [1 / 3, 1 / 3, 1 / 3], [0.9, 0.05, 0.05]):
        multinomial = multinomial_law(pi, 2)
        poisson = conditioned_poisson_law(pi, 2)
        assert set(multinomial) == set(poisson)
        assert len(multinomial) == 6
        assert sum(multinomial.values()) == pytest.approx(1.0)
        for k, probability in multinomial.items():
            assert abs(probability - poisson[k]) <= 1e-12

    law = multinomial_law([0.2, 0.3, 0.5], 2)
    assert law[(2, 0, 0)] == pytest.approx(0.04)
    assert law[(0, 1, 1)] == pytest.approx(0.3)


def test_draw_law_matches_multinomial():
    pi = vector([0.2, 0.3, 0.5])
    law = multinomial_law(pi, 2)
    observed = {}
    for seed in range(20000):
        k = tuple(int(c) for c in draw_subsample(pi, 2, seed).counts)
        observed[k] = observed.get(k, 0) + 1
    for k, probability in law.items():
        assert observed.get(k, 0) / 20000 == pytest.approx(probability, abs=0.015)
