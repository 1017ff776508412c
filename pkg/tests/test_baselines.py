import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eigennet.baselines import (
    PenalizedFit,
    fit_bayesian_lasso,
    fit_elastic_logistic,
    fit_l1_logistic,
    kkt_residual,
    logistic_objective,
)
from eigennet.exceptions import ValidationError
from eigennet.linalg_eigen import Dataset
from eigennet.sampler import SamplerConfig

from oracles import TOY_X, TOY_Y, newton_logistic

# Damped-Newton oracle values on the shared 1-D toy (oracles.newton_logistic).
TOY_MLE = (1.2617051315907615, 0.15767003451689984)
TOY_RIDGE_HALF = (0.9749234367642376, 0.15476624404884187)  # lambda2 = 0.5
# log(n_pos / n_neg) = log(11 / 9)
TOY_INTERCEPT_ONLY = 0.20067069546215124
# Posterior mean of w for the 1-D logistic Bayesian lasso, lambda1 = 1,
# bias_sigma = 1 (oracles.toy_quadrature_blasso).
TOY_BLASSO_MEAN = 1.1377360396243084


def _toy():
    return Dataset(TOY_X[:, None], TOY_Y)


def _instance(seed, n=None, p=None):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(5, 51))
    p = p or int(rng.integers(1, 51))
    X = rng.standard_normal((n, p)) + rng.normal(0, 0.5, p)
    w = rng.standard_normal(p) * (rng.random(p) < 0.3)
    y = np.where(rng.random(n) < 1 / (1 + np.exp(-(X @ w))), 1.0, -1.0)
    if np.all(y == y[0]):
        y[0] = -y[0]
    return Dataset(X, y)


def _gradient(data, w, b, lambda2=0.0):
    m = data.labels * (data.features @ w + b)
    r = -data.labels / (1 + np.exp(m))
    return data.features.T @ r + 2 * lambda2 * w, r.sum()


class TestLasso:
    def test_unpenalised_matches_newton(self):
        fit = fit_l1_logistic(_toy(), 0.0, tol=1e-9)
        assert fit.converged
        assert fit.w[0] == pytest.approx(TOY_MLE[0], abs=1e-5)
        assert fit.b == pytest.approx(TOY_MLE[1], abs=1e-5)

    def test_frozen_oracle_reproduces(self):
        w, b = newton_logistic(TOY_X[:, None], TOY_Y)
        assert (w[0], b) == pytest.approx(TOY_MLE, abs=1e-12)

    def test_large_lambda_gives_intercept_only(self):
        data = _toy()
        lam = data.n * np.abs(data.features).max()
        fit = fit_l1_logistic(data, lam)
        np.testing.assert_array_equal(fit.w, 0.0)
        assert fit.b == pytest.approx(TOY_INTERCEPT_ONLY, abs=1e-5)

    @pytest.mark.parametrize("seed", range(8))
    def test_subgradient_conditions(self, seed):
        data = _instance(seed)
        tol, lam = 1e-6, 0.5 + seed
        fit = fit_l1_logistic(data, lam, tol=tol)
        assert fit.converged
        g, gb = _gradient(data, fit.w, fit.b)
        on = fit.w != 0
        assert np.all(np.abs(g[on] + lam * np.sign(fit.w[on])) <= 10 * tol)
        assert np.all(np.abs(g[~on]) <= lam + 10 * tol)
        assert abs(gb) <= 10 * tol

    @pytest.mark.parametrize("seed", range(6))
    def test_converged_means_residual_below_tol(self, seed):
        data = _instance(100 + seed, n=40, p=45)
        shifted = Dataset(data.features + 3.0, data.labels)
        for fit, lam2 in ((fit_l1_logistic(shifted, 1.5), 0.0), (fit_elastic_logistic(shifted, 1.5, 2.0), 2.0)):
            assert fit.converged
            assert kkt_residual(shifted, fit.w, fit.b, 1.5, lam2) <= 1e-6

    def test_objective_non_increasing(self):
        fit = fit_l1_logistic(_instance(3, n=40, p=30), 0.3)
        assert np.all(np.diff(fit.history) <= 1e-12)

    def test_max_iter_not_an_exception(self):
        fit = fit_l1_logistic(_instance(4, n=40, p=30), 0.01, tol=1e-14, max_iter=3)
        assert not fit.converged
        assert fit.iterations == 3
        assert np.isfinite(fit.objective)

    def test_invalid(self):
        with pytest.raises(ValidationError):
            fit_l1_logistic(_toy(), -1.0)
        with pytest.raises(ValidationError):
            fit_l1_logistic(_toy(), 1.0, tol=0.0)

    def test_objective_reported(self):
        data = _instance(5)
        fit = fit_l1_logistic(data, 1.0)
        assert fit.objective == pytest.approx(logistic_objective(data, fit.w, fit.b, 1.0), rel=1e-10)


class TestElasticNet:
    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.05, 5.0))
    def test_lambda2_zero_is_lasso(self, seed, lam):
        data = _instance(seed)
        a = fit_l1_logistic(data, lam, tol=1e-8)
        b = fit_elastic_logistic(data, lam, 0.0, tol=1e-8)
        assert abs(a.objective - b.objective) <= 1e-6

    def test_ridge_matches_newton(self):
        fit = fit_elastic_logistic(_toy(), 0.0, 0.5, tol=1e-9)
        assert fit.w[0] == pytest.approx(TOY_RIDGE_HALF[0], abs=1e-5)
        assert fit.b == pytest.approx(TOY_RIDGE_HALF[1], abs=1e-5)

    def test_ridge_matches_newton_multivariate(self):
        data = _instance(6, n=30, p=8)
        w_ref, b_ref = newton_logistic(data.features, data.labels, ridge=0.7)
        fit = fit_elastic_logistic(data, 0.0, 0.7, tol=1e-9)
        np.testing.assert_allclose(fit.w, w_ref, atol=1e-5)
        assert fit.b == pytest.approx(b_ref, abs=1e-5)

    def test_duplicated_columns_grouped(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal(40)
        other = rng.standard_normal((40, 2))
        y = np.where(rng.random(40) < 1 / (1 + np.exp(-2 * x)), 1.0, -1.0)
        X = np.column_stack([x, x, other])
        lam2 = 0.8
        fit = fit_elastic_logistic(Dataset(X, y), 0.0, lam2, tol=1e-9)
        assert fit.w[0] == pytest.approx(fit.w[1], abs=1e-4)
        # Reduced problem: one copy of x carrying weight v = 2u, penalty lam2 v^2 / 2.
        reduced = np.column_stack([x, other])
        pen = np.array([lam2 / 2, lam2, lam2])
        w_ref, _ = _newton_weighted(reduced, y, pen)
        assert fit.w[0] == pytest.approx(w_ref[0] / 2, abs=1e-5)
        np.testing.assert_allclose(fit.w[2:], w_ref[1:], atol=1e-5)

    def test_duplicated_columns_with_l1(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal(60)
        y = np.where(rng.random(60) < 1 / (1 + np.exp(-3 * x)), 1.0, -1.0)
        fit = fit_elastic_logistic(Dataset(np.column_stack([x, x]), y), 1.0, 0.5, tol=1e-9)
        assert fit.w[0] != 0
        assert fit.w[0] == pytest.approx(fit.w[1], abs=1e-4)

    def test_json_round_trip(self):
        fit = fit_elastic_logistic(_instance(9), 0.5, 0.5)
        back = PenalizedFit.from_json(fit.to_json())
        np.testing.assert_array_equal(back.w, fit.w)
        assert back.b == fit.b and back.objective == fit.objective and back.converged == fit.converged

    def test_kkt_residual_helper(self):
        data = _instance(10)
        fit = fit_elastic_logistic(data, 0.5, 0.2, tol=1e-7)
        assert kkt_residual(data, fit.w, fit.b, 0.5, 0.2) <= 1e-7
        assert kkt_residual(data, fit.w + 0.1, fit.b, 0.5, 0.2) > 1e-3


def _newton_weighted(X, y, pen, iters=100):
    n, p = X.shape
    A = np.hstack([X, np.ones((n, 1))])
    P = np.append(pen, 0.0)
    th = np.zeros(p + 1)
    for _ in range(iters):
        m = y * (A @ th)
        sig = 1 / (1 + np.exp(m))
        g = A.T @ (-y * sig) + 2 * P * th
        H = (A * (sig * (1 - sig))[:, None]).T @ A + np.diag(2 * P)
        th = th - np.linalg.solve(H, g)
        if np.max(np.abs(g)) < 1e-13:
            break
    return th[:-1], th[-1]


class TestBayesianLasso:
    def test_quadrature(self):
        w, b, chain = fit_bayesian_lasso(_toy(), 1.0, SamplerConfig(seed=3), bias_sigma=1.0)
        assert abs(w[0] - TOY_BLASSO_MEAN) < 0.02
        assert np.isnan(chain.accept_rate[1]) and np.isnan(chain.accept_rate[2])

    def test_same_seed_identical(self):
        data = _instance(11, n=30, p=5)
        cfg = SamplerConfig(total_iterations=4000, burn_in=2000, seed=5)
        a, b = fit_bayesian_lasso(data, 1.0, cfg), fit_bayesian_lasso(data, 1.0, cfg)
        np.testing.assert_array_equal(a[0], b[0])
        assert a[1] == b[1]

    def test_shrinkage(self):
        data = _instance(12, n=40, p=5)
        cfg = SamplerConfig.desk(seed=1)
        w_small = fit_bayesian_lasso(data, 0.1, cfg)[0]
        w_large = fit_bayesian_lasso(data, 100.0, cfg)[0]
        assert np.linalg.norm(w_large) < np.linalg.norm(w_small)

    def test_invalid_lambda(self):
        with pytest.raises(ValidationError):
            fit_bayesian_lasso(_toy(), 0.0, SamplerConfig.desk())
