import numpy as np
import pytest
from scipy import stats as sps

import oracles
from pairdiv.aggregation import Ranking
from pairdiv.stats import kendall_tau, ols_standardized, pearson_r2, spearman, standardize


def test_pearson_against_scipy():
    rng = np.random.default_rng(0)
    x = rng.normal(size=40)
    y = 0.5 * x + rng.normal(size=40)
    r2, p = pearson_r2(x, y)
    ref = sps.pearsonr(x, y)
    assert r2 == pytest.approx(ref.statistic ** 2)
    assert p == pytest.approx(ref.pvalue)


def test_pearson_rejects_short_and_constant():
    with pytest.raises(ValueError):
        pearson_r2([1, 2], [1, 2])
    with pytest.raises(ValueError):
        pearson_r2([1, 1, 1], [1, 2, 3])


def test_spearman_against_scipy():
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=30), rng.normal(size=30)
    assert spearman(x, y)[0] == pytest.approx(sps.spearmanr(x, y).statistic)


def test_kendall_swap_of_four():
    a = Ranking((1, 2, 3, 4), 4)
    b = Ranking((2, 1, 3, 4), 4)
    tau, _ = kendall_tau(a, b)
    assert tau == pytest.approx(4 / 6)
    assert kendall_tau(a, a)[0] == pytest.approx(1.0)
    assert kendall_tau(a, Ranking((4, 3, 2, 1), 4))[0] == pytest.approx(-1.0)


def test_kendall_aligns_by_id():
    a = Ranking((3, 1, 2), 3)
    b = Ranking((3, 1, 2), 3)
    assert kendall_tau(a, b)[0] == pytest.approx(1.0)


def test_kendall_against_brute_force():
    rng = np.random.default_rng(2)
    for _ in range(10):
        x, y = rng.permutation(8), rng.permutation(8)
        assert kendall_tau(x, y)[0] == pytest.approx(oracles.kendall_tau_a(x, y))
        assert kendall_tau(x, y)[0] == pytest.approx(sps.kendalltau(x, y).statistic)


def test_kendall_with_ties_matches_scipy():
    x = np.array([1, 2, 2, 3, 4, 4, 5])
    y = np.array([2, 1, 3, 3, 5, 4, 4])
    assert kendall_tau(x, y)[0] == pytest.approx(sps.kendalltau(x, y).statistic)


def test_standardize():
    z = standardize([[1.0, 10.0], [2.0, 20.0], [3.0, 60.0]])
    assert np.allclose(z.mean(axis=0), 0.0)
    assert np.allclose(z.std(axis=0, ddof=1), 1.0)
    with pytest.raises(ValueError):
        standardize([1.0, 1.0, 1.0])


def test_ols_matches_normal_equations():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(50, 3))
    y = X @ [1.0, -2.0, 0.5] + rng.normal(size=50)
    fit = ols_standardized(X, y, names=["a", "b", "c"])
    assert fit.names == ("const", "a", "b", "c")
    assert fit.coef == pytest.approx(oracles.ols_normal_equations(X, y), abs=1e-10)
    # residuals are orthogonal to the design
    Z = np.column_stack([np.ones(50), standardize(X)])
    assert np.abs(Z.T @ fit.residuals).max() < 1e-9
    assert fit.df_resid == 46 and fit.n == 50


def test_ols_standard_errors_against_textbook():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(30, 2))
    y = X[:, 0] + rng.normal(size=30)
    fit = ols_standardized(X, y)
    Z = np.column_stack([np.ones(30), standardize(X)])
    zy = standardize(y)
    beta = np.linalg.solve(Z.T @ Z, Z.T @ zy)
    resid = zy - Z @ beta
    sigma2 = resid @ resid / 27
    se = np.sqrt(np.diag(sigma2 * np.linalg.inv(Z.T @ Z)))
    assert fit.std_err == pytest.approx(se)
    assert fit.p_values == pytest.approx(2 * sps.t.sf(np.abs(beta / se), 27))
    assert fit.r2 == pytest.approx(1 - resid @ resid / (zy @ zy))


def test_ols_rank_deficient_names_columns():
    rng = np.random.default_rng(5)
    x = rng.normal(size=20)
    X = np.column_stack([x, 2 * x, rng.normal(size=20)])
    with pytest.raises(ValueError, match="rank-deficient"):
        ols_standardized(X, rng.normal(size=20), names=["x", "twice", "z"])


def test_ols_shape_errors():
    with pytest.raises(ValueError):
        ols_standardized(np.ones((5, 1)) * np.arange(5)[:, None], np.arange(4.0))
    with pytest.raises(ValueError, match="more observations"):
        ols_standardized(np.array([[1.0, 2.0], [2.0, 1.0], [3.0, 5.0]]), np.array([1.0, 2.0, 4.0]))
