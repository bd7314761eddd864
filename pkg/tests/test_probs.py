import numpy as np
import pytest

from levsample.errors import DegenerateScheme, InvalidLambda, InvalidSpec
from levsample.linalg import ols_fit
from levsample.probs import (OPTIMAL_SCHEME, Mode, Scheme, SchemeSpec, Target, build_probs, probability_summary,
                             raw_scores, shrinkage_report)

TRIANGLE = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
# the third row has leverage 0
WITH_ZERO_ROW = np.array([[1.0], [2.0], [0.0], [1.0], [1.0]])


def probs(X, kind, **kwargs) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    fit = ols_fit(X, np.arange(X.shape[0], dtype=float))
    return build_probs(X, fit, SchemeSpec(kind, **kwargs)).pi


def brute_force_probs(X: np.ndarray, kind: Scheme, slev_lambda: float = 0.9) -> np.ndarray:
    n, p = X.shape
    G = np.linalg.pinv(X.T @ X)
    h = np.clip(np.einsum("ij,jk,ik->i", X, G, X), 0.0, 1.0)
    ic = np.array([np.linalg.norm(G @ x) for x in X])
    norms = np.array([np.linalg.norm(x) for x in X])
    scores = {
        Scheme.UNIF: np.ones(n),
        Scheme.BLEV: h,
        Scheme.SLEV: slev_lambda * h / p + (1 - slev_lambda) / n,
        Scheme.IC: ic,
        Scheme.RL: np.sqrt(h),
        Scheme.PL: norms,
        Scheme.ICNLEV: np.sqrt(1 - h) * ic,
        Scheme.RLNLEV: np.sqrt((1 - h) * h),
        Scheme.PLNLEV: np.sqrt(1 - h) * norms,
    }[kind]
    return scores / scores.sum()


def test_examples():
    assert probs(np.ones((4, 1)), Scheme.UNIF) == pytest.approx([0.25] * 4)

    ic = np.array([np.sqrt(5), np.sqrt(5), np.sqrt(2)])
    assert probs(TRIANGLE, Scheme.IC) == pytest.approx(ic / ic.sum())
    assert probs(TRIANGLE, Scheme.IC) == pytest.approx([0.3799, 0.3799, 0.2402], abs=1e-4)
    assert probs(TRIANGLE, Scheme.RL) == pytest.approx([1 / 3] * 3)
    assert probs(TRIANGLE, Scheme.BLEV) == pytest.approx([1 / 3] * 3)

    pl = np.array([1.0, 1.0, np.sqrt(2)])
    assert probs(TRIANGLE, Scheme.PL) == pytest.approx(pl / pl.sum())


def test_schemes_match_brute_force():
    rng = np.random.default_rng(3)
    for _ in range(200):
        p = int(rng.integers(1, 9))
        n = int(rng.integers(p + 1, 201))
        X = rng.standard_normal((n, p))
        fit = ols_fit(X, rng.standard_normal(n))
        for kind in Scheme:
            pi = build_probs(X, fit, SchemeSpec(kind)).pi
            assert np.abs(pi - brute_force_probs(X, kind)).max() < 1e-10, kind
            assert pi.sum() == pytest.approx(1.0, abs=1e-12)
            assert pi.min() >= 0.0


def test_orthonormal_design():
    Q, _ = np.linalg.qr(np.random.default_rng(4).standard_normal((20, 3)))
    for a, b in [(Scheme.IC, Scheme.RL), (Scheme.RL, Scheme.PL), (Scheme.ICNLEV, Scheme.RLNLEV),
                 (Scheme.RLNLEV, Scheme.PLNLEV)]:
        assert np.abs(probs(Q, a) - probs(Q, b)).max() <= 1e-12


def test_homogeneous_leverage():
    X = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    for kind in Scheme:
        assert probs(X, kind) == pytest.approx([0.25] * 4)

    # equal leverage 2/3 on every row, but PL and IC are not uniform
    assert np.abs(probs(TRIANGLE, Scheme.ICNLEV) - probs(TRIANGLE, Scheme.IC)).max() <= 1e-12
    assert np.abs(probs(TRIANGLE, Scheme.PLNLEV) - probs(TRIANGLE, Scheme.PL)).max() <= 1e-12
    assert probs(TRIANGLE, Scheme.PL).max() > 0.4


def test_negative_leverage_flag():
    assert {kind for kind in Scheme if kind.negative_leverage} == {Scheme.ICNLEV, Scheme.RLNLEV, Scheme.PLNLEV}


def test_optimal_schemes():
    assert OPTIMAL_SCHEME[(Mode.UNCONDITIONAL, Target.COEF)] == Scheme.IC
    assert OPTIMAL_SCHEME[(Mode.CONDITIONAL, Target.FIT)] == Scheme.RLNLEV
    assert len(set(OPTIMAL_SCHEME.values())) == 6


def test_rl_shrinks_leverage():
    X = np.random.default_rng(5).standard_t(2, size=(60, 3))
    blev, rl = probs(X, Scheme.BLEV), probs(X, Scheme.RL)
    order = np.argsort(blev)
    low, high = order[0], order[-1]
    assert rl[low] / rl[high] >= blev[low] / blev[high]


def test_shrinkage_report():
    report = shrinkage_report(np.ones((4, 1)), ols_fit(np.ones((4, 1)), [1.0, 2.0, 3.0, 4.0]))
    assert list(report.columns) == ["h", "blev_score", "rl_score", "rlnlev_score", "slev_score"]
    assert report["rl_score"].to_numpy() == pytest.approx([0.5] * 4)
    assert report["rlnlev_score"].to_numpy() == pytest.approx([np.sqrt(3) / 4] * 4)

    extremes = shrinkage_report(np.eye(2), ols_fit(np.eye(2), [1.0, 2.0]))
    assert extremes["rl_score"].to_numpy() == pytest.approx([1.0, 1.0])
    assert extremes["rlnlev_score"].to_numpy() == pytest.approx([0.0, 0.0], abs=1e-7)

    # p / n = 0.2, so a row with h = 0 keeps the score 0.1 * 0.2
    X = WITH_ZERO_ROW
    report = shrinkage_report(X, ols_fit(X, np.arange(5.0)))
    assert report["slev_score"][2] == pytest.approx(0.02)
    assert report["rl_score"][2] == 0.0


def test_rlnlev_unimodal():
    h = np.linspace(0.0, 1.0, 101)
    score = np.sqrt((1 - h) * h)
    assert np.all(np.diff(score[h <= 0.5]) >= 0)
    assert np.all(np.diff(score[h >= 0.5]) <= 0)

    X = np.random.default_rng(6).standard_t(1, size=(50, 2))
    report = shrinkage_report(X, ols_fit(X, np.zeros(50))).sort_values("h")
    rising = report[report["h"] <= 0.5]["rlnlev_score"].to_numpy()
    assert np.all(np.diff(rising) >= -1e-15)


def test_slev_lambda():
    with pytest.raises(InvalidLambda):
        SchemeSpec(Scheme.SLEV, slev_lambda=1.5)
    with pytest.raises(InvalidLambda):
        SchemeSpec(Scheme.SLEV, slev_lambda=0.0)
    # only SLEV uses the mixing weight
    SchemeSpec(Scheme.BLEV, slev_lambda=1.5)

    pi = probs(WITH_ZERO_ROW, Scheme.SLEV, slev_lambda=0.5)
    assert pi[2] == pytest.approx(0.5 / 5)


def test_degenerate_scheme():
    X = np.eye(2)
    for kind in (Scheme.ICNLEV, Scheme.RLNLEV, Scheme.PLNLEV):
        with pytest.raises(DegenerateScheme):
            probs(X, kind)
        assert probs(X, kind, floor=1e-6) == pytest.approx([0.5, 0.5])


def test_floor():
    with pytest.raises(InvalidSpec):
        SchemeSpec(Scheme.PL, floor=1.0)
    with pytest.raises(InvalidSpec):
        SchemeSpec(Scheme.PL, floor=-0.1)

    assert probs(WITH_ZERO_ROW, Scheme.PL)[2] == 0.0
    pi = probs(WITH_ZERO_ROW, Scheme.PL, floor=0.1)
    assert pi.sum() == pytest.approx(1.0)
    assert pi.min() > 0.0
    assert pi.min() >= 0.1 / 5 / 1.1


def test_probabilities_are_readonly():
    pi = probs(TRIANGLE, Scheme.IC)
    with pytest.raises(ValueError):
        pi[0] = 1.0


def test_raw_scores():
    fit = ols_fit(TRIANGLE, [1.0, 2.0, 3.0])
    assert raw_scores(TRIANGLE, fit, SchemeSpec(Scheme.PL)) == pytest.approx([1.0, 1.0, np.sqrt(2)])
    assert raw_scores(TRIANGLE, fit, SchemeSpec(Scheme.RLNLEV)) == pytest.approx([np.sqrt(2) / 3] * 3)


def test_probability_summary():
    X = WITH_ZERO_ROW
    fit = ols_fit(X, np.arange(5.0))
    summary = probability_summary(X, fit, [SchemeSpec(Scheme.UNIF), SchemeSpec(Scheme.PL)])
    assert list(summary["scheme"]) == ["unif", "pl"]
    assert list(summary["zeros"]) == [0, 1]
    unif = summary.iloc[0]
    assert unif["min"] == pytest.approx(np.log10(0.2))
    assert unif["max"] == pytest.approx(np.log10(0.2))
