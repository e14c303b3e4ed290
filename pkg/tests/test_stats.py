import numpy as np
import pytest
import scipy.stats

from citysense.stats import (logistic_fit, logistic_grad, logistic_loglik,
                             mann_whitney, median_low, ols_fit, ols_grad,
                             ols_loss, rankdata, spearman_permutation)
from oracles import ranksum_p_enumeration


def test_rankdata_matches_scipy():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = rng.integers(0, 10, size=int(rng.integers(2, 40))).astype(float)
        np.testing.assert_allclose(rankdata(a), scipy.stats.rankdata(a))


def test_median_low():
    assert median_low([-80, -90]) == -90
    assert median_low([4, 5, 6]) == 5
    assert median_low([7]) == 7
    with pytest.raises(ValueError):
        median_low([])


# -- rank-sum test ---------------------------------------------------------------


def test_mann_whitney_exact_against_enumeration_oracle():
    dead = [20.0, 25.0, 30.0, 22.0]
    relocated = [8.0, 10.0, 9.0, 12.0]
    res = mann_whitney(dead, relocated, "greater")
    assert res.method == "exact"
    assert res.p_value == pytest.approx(ranksum_p_enumeration(dead, relocated), abs=1e-12)
    assert res.p_value < 0.05


def test_mann_whitney_exact_oracle_random_cases():
    rng = np.random.default_rng(9)
    for _ in range(10):
        x = list(rng.normal(0, 1, int(rng.integers(3, 7))))
        y = list(rng.normal(0.5, 1, int(rng.integers(3, 7))))
        res = mann_whitney(x, y, "greater")
        assert res.method == "exact"
        assert res.p_value == pytest.approx(ranksum_p_enumeration(x, y), abs=1e-12)


def test_mann_whitney_identical_sets_near_half():
    vals = [20.0, 25.0, 30.0, 22.0]
    res = mann_whitney(vals, list(vals), "greater")
    assert res.p_value == pytest.approx(0.5, abs=0.1)


def test_mann_whitney_normal_approx_against_scipy():
    rng = np.random.default_rng(4)
    x = rng.normal(0.4, 1, 60)
    y = rng.normal(0.0, 1, 55)
    res = mann_whitney(x, y, "greater")
    assert res.method == "normal"
    ref = scipy.stats.mannwhitneyu(x, y, alternative="greater", method="asymptotic")
    assert res.p_value == pytest.approx(ref.pvalue, rel=0.02)


def test_mann_whitney_two_sided():
    rng = np.random.default_rng(5)
    x = rng.normal(2.0, 1, 30)
    y = rng.normal(0.0, 1, 30)
    assert mann_whitney(x, y, "two-sided").p_value < 0.01
    assert mann_whitney(x, y, "less").p_value > 0.95


def test_mann_whitney_empty_rejected():
    with pytest.raises(ValueError):
        mann_whitney([], [1.0])


# -- spearman ---------------------------------------------------------------------


def test_spearman_perfect_monotone():
    x = np.arange(50.0)
    res = spearman_permutation(x, x ** 3, n_perm=200, rng=np.random.default_rng(0))
    assert res.rho == pytest.approx(1.0)
    assert res.p_value < 0.01


def test_spearman_matches_scipy_rho():
    rng = np.random.default_rng(6)
    x = rng.normal(size=200)
    y = 0.3 * x + rng.normal(size=200)
    res = spearman_permutation(x, y, n_perm=100, rng=np.random.default_rng(1))
    ref = scipy.stats.spearmanr(x, y)
    assert res.rho == pytest.approx(ref.statistic, abs=1e-12)


def test_spearman_constant_series():
    res = spearman_permutation(np.ones(20), np.arange(20.0), n_perm=100)
    assert res.rho is None
    assert res.note == "constant series"


def test_spearman_null_p_not_small():
    rng = np.random.default_rng(7)
    x = rng.normal(size=500)
    y = rng.normal(size=500)
    res = spearman_permutation(x, y, n_perm=500, rng=np.random.default_rng(2))
    assert res.p_value > 0.05


# -- regressions --------------------------------------------------------------------


def test_logistic_recovers_coefficients():
    rng = np.random.default_rng(10)
    X = rng.normal(size=(4000, 2))
    eta = -0.5 + 1.2 * X[:, 0] - 0.8 * X[:, 1]
    y = (rng.random(4000) < 1 / (1 + np.exp(-eta))).astype(float)
    fit = logistic_fit(X, y)
    assert fit.converged and not fit.separated
    np.testing.assert_allclose(fit.coef, [-0.5, 1.2, -0.8], atol=0.15)
    assert fit.p_values[1] < 1e-6 and fit.p_values[2] < 1e-6


def test_logistic_matches_scipy_logit_pvalues():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(500, 1))
    y = (rng.random(500) < 0.5).astype(float)  # no signal
    fit = logistic_fit(X, y)
    assert fit.p_values[1] > 0.05


def test_logistic_perfect_separation_flagged():
    x = np.linspace(-2, 2, 40)[:, None]
    y = (x[:, 0] > 0).astype(float)
    fit = logistic_fit(x, y)
    assert fit.separated


def test_logistic_gradient_matches_finite_differences():
    rng = np.random.default_rng(12)
    X = np.column_stack([np.ones(80), rng.normal(size=(80, 3))])
    y = (rng.random(80) < 0.4).astype(float)
    for _ in range(10):
        beta = rng.normal(scale=0.5, size=4)
        g = logistic_grad(X, y, beta)
        fd = np.empty_like(g)
        h = 1e-6
        for j in range(4):
            e = np.zeros(4)
            e[j] = h
            fd[j] = (logistic_loglik(X, y, beta + e)
                     - logistic_loglik(X, y, beta - e)) / (2 * h)
        np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-7)


def test_ols_exact_on_noiseless_data():
    rng = np.random.default_rng(13)
    X = rng.normal(size=(50, 2))
    y = 3.0 + 2.0 * X[:, 0] - 1.0 * X[:, 1]
    fit = ols_fit(X, y)
    assert fit.converged
    np.testing.assert_allclose(fit.coef, [3.0, 2.0, -1.0], atol=1e-8)


def test_ols_planted_slope():
    rng = np.random.default_rng(14)
    shadow = rng.uniform(0, 400, 120)
    y = 10.0 * shadow + rng.normal(0, 100, 120)
    fit = ols_fit(shadow[:, None], y)
    assert fit.coef[1] == pytest.approx(10.0, abs=0.5)
    assert fit.p_values[1] < 0.01


def test_ols_gradient_matches_finite_differences():
    rng = np.random.default_rng(15)
    X = np.column_stack([np.ones(60), rng.normal(size=(60, 2))])
    y = rng.normal(size=60)
    for _ in range(10):
        beta = rng.normal(size=3)
        g = ols_grad(X, y, beta)
        fd = np.empty_like(g)
        h = 1e-6
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            fd[j] = (ols_loss(X, y, beta + e) - ols_loss(X, y, beta - e)) / (2 * h)
        np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-6)
