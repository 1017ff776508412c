import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eigennet.exceptions import ContractError, DimensionError, ValidationError
from eigennet.linalg_eigen import Dataset, EigenBasis, eigendecompose
from eigennet.model_core import (
    HyperParams,
    ModelState,
    composite_regularizer,
    error_rate,
    generative_eigenvalues,
    log_conditional_likelihood,
    log_generative,
    log_joint_prior,
    log_posterior,
    log_sigmoid,
    predict,
)
from eigennet.sampler import SamplerConfig, run_chain

from oracles import loglik_weight_space


def _problem(n=12, p=7, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p)) + 0.3
    y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    data = Dataset(X, y)
    return data, eigendecompose(data)


def _state(m, seed):
    rng = np.random.default_rng(seed)
    return ModelState(rng.standard_normal(m), rng.standard_normal(m), rng.exponential(size=m),
                      rng.standard_normal())


class TestHyperParams:
    @pytest.mark.parametrize("field", ["lambda1", "lambda2", "lambda3", "bias_sigma"])
    def test_positive(self, field):
        kw = dict(lambda1=1.0, lambda2=1.0, lambda3=1.0)
        kw[field] = 0.0
        with pytest.raises(ValidationError):
            HyperParams(**kw)

    def test_non_finite(self):
        with pytest.raises(ValidationError):
            HyperParams(np.inf, 1.0, 1.0)

    def test_unknown_scaling(self):
        with pytest.raises(ValidationError):
            HyperParams(1.0, 1.0, 1.0, eta_scaling="sqrt")


class TestModelState:
    def test_negative_s(self):
        with pytest.raises(ContractError):
            ModelState(np.zeros(2), np.zeros(2), np.array([0.0, -1e-9]), 0.0)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            ModelState(np.zeros(2), np.zeros(3), np.zeros(2), 0.0)

    def test_non_finite(self):
        with pytest.raises(ValidationError):
            ModelState(np.array([np.nan]), np.zeros(1), np.zeros(1), 0.0)


class TestLogSigmoid:
    def test_extremes_finite(self):
        v = log_sigmoid(np.array([-1e4, 1e4]))
        assert np.all(np.isfinite(v))
        assert -1e4 <= v[0] <= 0 and -1e4 <= v[1] <= 0
        np.testing.assert_allclose(v, [-1e4, 0.0], atol=1e-12)

    def test_zero(self):
        assert log_sigmoid(0.0) == pytest.approx(np.log(0.5))


class TestConditionalLikelihood:
    def test_zero_state(self):
        data, basis = _problem()
        val = log_conditional_likelihood(ModelState.zeros(basis.m), basis, data)
        assert val == pytest.approx(data.n * np.log(0.5), abs=1e-12)

    def test_single_sample(self):
        data, basis = _problem(n=30, p=4)
        one = data.subset([3])
        one = Dataset(one.features, [1.0])
        st_ = _state(basis.m, 1)
        st_ = ModelState(st_.alpha, st_.beta, st_.s, 0.0)
        z = basis.scores(one.features)[0]
        expected = -np.log1p(np.exp(-(z @ st_.alpha)))
        assert log_conditional_likelihood(st_, basis, one) == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("shape", [(12, 7), (5, 20), (40, 3)])
    def test_matches_weight_space(self, shape):
        data, basis = _problem(*shape, seed=sum(shape))
        for seed in range(5):
            st_ = _state(basis.m, seed)
            w = basis.vectors @ st_.alpha
            ref = loglik_weight_space(data.features, data.labels, basis.mean, w, st_.b)
            assert log_conditional_likelihood(st_, basis, data) == pytest.approx(ref, abs=1e-10)

    def test_not_even(self):
        data, basis = _problem()
        st_ = _state(basis.m, 3)
        neg = ModelState(-st_.alpha, -st_.beta, st_.s, -st_.b)
        assert abs(log_conditional_likelihood(st_, basis, data) - log_conditional_likelihood(neg, basis, data)) > 1e-3

    def test_large_margins_finite(self):
        data, basis = _problem()
        st_ = ModelState(np.full(basis.m, 1e3), np.zeros(basis.m), np.zeros(basis.m), 0.0)
        assert np.isfinite(log_conditional_likelihood(st_, basis, data))

    def test_dimension_mismatch(self):
        data, basis = _problem()
        with pytest.raises(DimensionError):
            log_conditional_likelihood(ModelState.zeros(basis.m + 1), basis, data)


class TestGenerative:
    def test_zero(self):
        _, basis = _problem()
        assert log_generative(ModelState.zeros(basis.m), basis, 3.0) == 0.0

    def test_perfect_alignment(self):
        basis = EigenBasis(np.ones((1, 1)), [1.0])
        st_ = ModelState([0.0], [1.0], [1.0], 0.0)
        assert log_generative(st_, basis, 2.0) == 0.0

    def test_hand_value(self):
        basis = EigenBasis(np.eye(2), [2.0, 0.5])
        st_ = ModelState([0.0, 0.0], [1.0, -3.0], [0.5, 2.0], 0.0)
        # beta^2 - 2 eta s |beta| + eta s^2 per coordinate: (1 - 2 + 0.5) + (9 - 6 + 2) = 4.5
        assert log_generative(st_, basis, 2.0) == pytest.approx(-4.5)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000))
    def test_even_in_beta(self, seed):
        _, basis = _problem()
        st_ = _state(basis.m, seed)
        flip = np.random.default_rng(seed).random(basis.m) < 0.5
        beta = np.where(flip, -st_.beta, st_.beta)
        other = ModelState(st_.alpha, beta, st_.s, st_.b)
        assert log_generative(st_, basis, 1.7) == pytest.approx(log_generative(other, basis, 1.7), abs=1e-12)

    def test_max_scaling(self):
        basis = EigenBasis(np.eye(3), [4.0, 2.0, 0.0])
        np.testing.assert_allclose(generative_eigenvalues(basis, "max"), [1.0, 0.5, 0.0])
        np.testing.assert_allclose(generative_eigenvalues(basis, "none"), [4.0, 2.0, 0.0])
        st_ = ModelState(np.zeros(3), [1.0, 1.0, 1.0], [1.0, 1.0, 1.0], 0.0)
        scaled = log_generative(st_, basis, 1.0, scaling="max")
        assert scaled == pytest.approx(-0.5 * ((1 - 2 + 1) + (1 - 1 + 0.5) + 1))

    def test_all_zero_spectrum(self):
        basis = EigenBasis(np.eye(2), [0.0, 0.0])
        np.testing.assert_array_equal(generative_eigenvalues(basis, "max"), [0.0, 0.0])


class TestJointPrior:
    def test_zero(self):
        _, basis = _problem()
        assert log_joint_prior(ModelState.zeros(basis.m), basis, HyperParams(1, 1, 1)) == 0.0

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000))
    def test_even(self, seed):
        _, basis = _problem()
        hp = HyperParams(0.7, 1.0, 2.5)
        st_ = _state(basis.m, seed)
        neg = ModelState(-st_.alpha, -st_.beta, st_.s, -st_.b)
        assert log_joint_prior(st_, basis, hp) == pytest.approx(log_joint_prior(neg, basis, hp), abs=1e-12)

    @pytest.mark.parametrize("shape", [(12, 7), (5, 20)])
    def test_matches_weight_space_kernel(self, shape):
        _, basis = _problem(*shape)
        hp = HyperParams(0.8, 1.0, 3.0, bias_sigma=2.0)
        for seed in range(5):
            st_ = _state(basis.m, seed)
            w, wt = basis.vectors @ st_.alpha, basis.vectors @ st_.beta
            kernel = -hp.lambda1 * np.sum(np.abs(w)) - 0.5 * hp.lambda3 * np.sum((w - wt) ** 2)
            bias = -st_.b**2 / (2 * hp.bias_sigma**2)
            assert log_joint_prior(st_, basis, hp) == pytest.approx(kernel + bias, abs=1e-10)


class TestPosterior:
    def test_zero_state(self):
        data, basis = _problem()
        for hp in (HyperParams(1, 1, 1), HyperParams(10, 0.1, 5)):
            val = log_posterior(ModelState.zeros(basis.m), basis, data, hp)
            assert val == pytest.approx(data.n * np.log(0.5), abs=1e-12)

    def test_additive(self):
        data, basis = _problem()
        hp = HyperParams(0.5, 2.0, 1.5)
        for seed in range(5):
            st_ = _state(basis.m, seed)
            parts = (log_conditional_likelihood(st_, basis, data)
                     + log_generative(st_, basis, hp.lambda2, hp.eta_scaling)
                     + log_joint_prior(st_, basis, hp))
            assert log_posterior(st_, basis, data, hp) == pytest.approx(parts, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.sampled_from(["max", "none"]))
    def test_eigen_sign_invariance(self, seed, scaling):
        data, basis = _problem(n=9, p=6)
        hp = HyperParams(0.5, 2.0, 1.5, eta_scaling=scaling)
        st_ = _state(basis.m, seed)
        j = seed % basis.m
        sign = np.ones(basis.m)
        sign[j] = -1.0
        flipped = EigenBasis(basis.vectors * sign, basis.values, basis.mean)
        other = ModelState(st_.alpha * sign, st_.beta * sign, st_.s, st_.b)
        assert log_posterior(other, flipped, data, hp) == pytest.approx(
            log_posterior(st_, basis, data, hp), abs=1e-10)


class TestCompositeRegularizer:
    def test_zero(self):
        _, basis = _problem()
        assert composite_regularizer(np.zeros(basis.p), np.zeros(basis.m), basis, 1.0, 1.0) == 0.0

    def test_hand_example(self):
        basis = EigenBasis(np.eye(2), [1.0, 1.0])
        # 1 * (1 + 2) + 1/2 * (1 + 1) * 5
        assert composite_regularizer([1.0, -2.0], [0.0, 0.0], basis, 1.0, 1.0) == pytest.approx(8.0)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 8), st.floats(0.1, 5.0))
    def test_elastic_net_reduction(self, seed, p, c):
        rng = np.random.default_rng(seed)
        basis = EigenBasis(np.eye(p), np.full(p, c))
        w = rng.standard_normal(p)
        lam1, lam2 = rng.uniform(0.1, 3.0, 2)
        enet = lam1 * np.abs(w).sum() + 0.5 * lam2 * c * p * (w @ w)
        val = composite_regularizer(w, np.zeros(p), basis, lam1, lam2)
        assert abs(val - enet) <= 1e-12 * max(1.0, abs(enet))

    def test_direction_minimiser(self):
        theta0 = 0.7
        v1 = np.array([np.cos(theta0), np.sin(theta0)])
        v2 = np.array([-np.sin(theta0), np.cos(theta0)])
        basis = EigenBasis(np.column_stack([v1, v2]), [1.0, 0.0])
        radius = 1.5
        angles = np.linspace(0, np.pi, 3601)
        ours = [composite_regularizer(radius * np.array([np.cos(a), np.sin(a)]), [radius, 0.0], basis, 0.0, 1.0)
                for a in angles]
        # Grid-search oracle on the j = 1 term written out directly.
        oracle = [(radius**2 - 2 * radius * abs(radius * np.cos(a - theta0)) + radius**2) for a in angles]
        assert np.argmin(ours) == np.argmin(oracle)
        assert angles[np.argmin(ours)] == pytest.approx(theta0, abs=1e-3)

    def test_negative_s(self):
        _, basis = _problem()
        s = np.zeros(basis.m)
        s[0] = -1.0
        with pytest.raises(ContractError):
            composite_regularizer(np.zeros(basis.p), s, basis, 1.0, 1.0)

    def test_negative_s_generative(self):
        basis = EigenBasis(np.eye(1), [1.0])

        class Raw:
            alpha = beta = np.zeros(1)
            s = np.array([-1.0])
            b = 0.0
            m = 1

        with pytest.raises(ContractError):
            log_generative(Raw(), basis, 1.0)


class TestPredict:
    def test_bias_only(self):
        X = np.random.default_rng(0).standard_normal((5, 3))
        np.testing.assert_array_equal(predict(np.zeros(3), 1.0, None, X), np.ones(5))
        np.testing.assert_array_equal(predict(np.zeros(3), -1.0, None, X), -np.ones(5))

    def test_tie_is_positive(self):
        np.testing.assert_array_equal(predict(np.zeros(2), 0.0, None, np.ones((3, 2))), np.ones(3))

    def test_antisymmetry(self):
        rng = np.random.default_rng(1)
        X, w, b = rng.standard_normal((50, 4)), rng.standard_normal(4), 0.3
        np.testing.assert_array_equal(predict(-w, -b, None, X), -predict(w, b, None, X))

    def test_centres_with_basis(self):
        data, basis = _problem()
        w = np.random.default_rng(2).standard_normal(basis.p)
        expected = np.where((data.features - basis.mean) @ w >= 0, 1.0, -1.0)
        np.testing.assert_array_equal(predict(w, 0.0, basis, data.features), expected)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            predict(np.zeros(3), 0.0, None, np.zeros((2, 4)))


class TestErrorRate:
    def test_examples(self):
        y = np.array([1, 1, -1, -1])
        assert error_rate(y, y) == 0.0
        assert error_rate(-y, y) == 1.0
        assert error_rate([1, 1, -1, -1], [1, -1, -1, 1]) == 0.5

    def test_errors(self):
        with pytest.raises(DimensionError):
            error_rate([], [])
        with pytest.raises(DimensionError):
            error_rate([1, 1], [1])


class TestCouplingLimit:
    def test_gap_shrinks_with_lambda3(self):
        data, basis = _problem(n=20, p=3, seed=4)
        gaps = []
        for lam3 in (1e2, 1e4, 1e6):
            chain = run_chain(data, basis, HyperParams(1.0, 1.0, lam3), SamplerConfig.desk(seed=1))
            best = chain.best_state
            gaps.append(np.linalg.norm(best.alpha - best.beta))
        for a, b in zip(gaps, gaps[1:]):
            assert b <= 2.0 * a
        assert gaps[-1] < gaps[0]
