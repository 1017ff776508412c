"""EigenNet log-densities in eigen coordinates, plus prediction helpers.

State coordinates: ``alpha`` (classifier, ``w = V alpha``), ``beta``
(generative-side weights, ``w_tilde = V beta``), nonnegative scales ``s`` and
the bias ``b``.  All log-densities are unnormalised.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ContractError, DimensionError, ValidationError
from .linalg_eigen import Dataset, EigenBasis

__all__ = [
    "HyperParams",
    "ModelState",
    "log_sigmoid",
    "generative_eigenvalues",
    "log_conditional_likelihood",
    "log_generative",
    "log_joint_prior",
    "log_posterior",
    "composite_regularizer",
    "predict",
    "error_rate",
]

ETA_SCALINGS = ("max", "none")


@dataclass(frozen=True)
class HyperParams:
    """Regularisation weights of one EigenNet chain.

    ``eta_scaling`` controls the eigenvalues fed to the generative energy:
    ``"max"`` divides them by the leading eigenvalue so every term of the
    energy is convex in ``(|beta_j|, s_j)``; ``"none"`` uses the raw
    covariance spectrum.
    """

    lambda1: float
    lambda2: float
    lambda3: float
    bias_sigma: float = 10.0
    eta_scaling: str = "max"

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3", "bias_sigma"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v <= 0:
                raise ValidationError(f"{name} must be finite and > 0, got {v!r}")
            object.__setattr__(self, name, v)
        if self.eta_scaling not in ETA_SCALINGS:
            raise ValidationError(f"eta_scaling must be one of {ETA_SCALINGS}")


@dataclass(frozen=True)
class ModelState:
    alpha: np.ndarray
    beta: np.ndarray
    s: np.ndarray
    b: float = 0.0

    def __post_init__(self):
        arrs = []
        for name in ("alpha", "beta", "s"):
            a = np.array(getattr(self, name), dtype=float, copy=True).reshape(-1)
            if not np.all(np.isfinite(a)):
                raise ValidationError(f"{name} has non-finite entries")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
            arrs.append(a)
        if not (arrs[0].shape == arrs[1].shape == arrs[2].shape):
            raise DimensionError("alpha, beta and s must share length m")
        if np.any(arrs[2] < 0):
            raise ContractError("s must be nonnegative")
        b = float(self.b)
        if not np.isfinite(b):
            raise ValidationError("bias is not finite")
        object.__setattr__(self, "b", b)

    @property
    def m(self) -> int:
        return self.alpha.shape[0]

    @classmethod
    def zeros(cls, m: int) -> "ModelState":
        z = np.zeros(m)
        return cls(z, z, z, 0.0)


def log_sigmoid(z):
    """``log(1 / (1 + exp(-z)))`` without overflow."""
    return -np.logaddexp(0.0, -np.asarray(z, dtype=float))


def _check_basis(state: ModelState, basis: EigenBasis):
    if state.m != basis.m:
        raise DimensionError(f"state has m={state.m}, basis has m={basis.m}")


def generative_eigenvalues(basis: EigenBasis, scaling: str = "max") -> np.ndarray:
    eta = basis.values
    if scaling == "none":
        return eta
    if scaling == "max":
        top = eta.max() if eta.size else 0.0
        return eta / top if top > 0 else np.zeros_like(eta)
    raise ValidationError(f"unknown eta scaling {scaling!r}")


def log_conditional_likelihood(state: ModelState, basis: EigenBasis, data: Dataset) -> float:
    """Logistic log-likelihood with ``z_i = V.T (x_i - mean)``."""
    _check_basis(state, basis)
    if data.p != basis.p:
        raise DimensionError(f"data has p={data.p}, basis has p={basis.p}")
    f = basis.scores(data.features) @ state.alpha + state.b
    return float(np.sum(log_sigmoid(data.labels * f)))


def log_generative(state: ModelState, basis: EigenBasis, lambda2: float, scaling: str = "none") -> float:
    """``-(lambda2/2) * sum_j (beta_j^2 - 2 eta_j s_j |beta_j| + eta_j s_j^2)``.

    ``scaling`` selects the eigenvalues used (see :class:`HyperParams`); the
    default evaluates the energy on the raw spectrum stored in ``basis``.
    """
    _check_basis(state, basis)
    if np.any(state.s < 0):
        raise ContractError("s must be nonnegative")
    eta = generative_eigenvalues(basis, scaling)
    beta, s = state.beta, state.s
    energy = beta**2 - 2.0 * eta * s * np.abs(beta) + eta * s**2
    return float(-0.5 * lambda2 * energy.sum())


def log_joint_prior(state: ModelState, basis: EigenBasis, hp: HyperParams) -> float:
    """Laplace prior on ``V alpha``, Gaussian coupling of alpha and beta, bias prior."""
    _check_basis(state, basis)
    l1 = np.abs(basis.vectors @ state.alpha).sum()
    coupling = ((state.alpha - state.beta) ** 2).sum()
    return float(-hp.lambda1 * l1 - 0.5 * hp.lambda3 * coupling - state.b**2 / (2.0 * hp.bias_sigma**2))


def log_posterior(state: ModelState, basis: EigenBasis, data: Dataset, hp: HyperParams) -> float:
    return (
        log_conditional_likelihood(state, basis, data)
        + log_generative(state, basis, hp.lambda2, hp.eta_scaling)
        + log_joint_prior(state, basis, hp)
    )


def composite_regularizer(w, s, basis: EigenBasis, lambda1: float, lambda2: float) -> float:
    """Penalty ``lambda1 |w|_1 + lambda2/2 sum_j eta_j (|w|^2 - 2 s_j |w.v_j| + s_j^2)``."""
    w = np.asarray(w, dtype=float).reshape(-1)
    s = np.asarray(s, dtype=float).reshape(-1)
    if w.shape[0] != basis.p:
        raise DimensionError(f"w has length {w.shape[0]}, expected p={basis.p}")
    if s.shape[0] != basis.m:
        raise DimensionError(f"s has length {s.shape[0]}, expected m={basis.m}")
    if np.any(s < 0):
        raise ContractError("s must be nonnegative")
    eta = basis.values
    proj = np.abs(w @ basis.vectors)
    eigen_term = eta * (w @ w - 2.0 * s * proj + s**2)
    return float(lambda1 * np.abs(w).sum() + 0.5 * lambda2 * eigen_term.sum())


def predict(w, b: float, basis: EigenBasis | None, points) -> np.ndarray:
    """Sign rule ``+1 if (x - mean).w + b >= 0 else -1``.

    With ``basis=None`` the points are used as given (no centring).
    """
    w = np.asarray(w, dtype=float).reshape(-1)
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points.reshape(1, -1)
    if points.shape[1] != w.shape[0]:
        raise DimensionError(f"points have {points.shape[1]} columns, w has length {w.shape[0]}")
    if basis is not None:
        points = basis.center(points)
    score = points @ w + b
    return np.where(score >= 0, 1.0, -1.0)


def error_rate(predicted, actual) -> float:
    predicted = np.asarray(predicted).reshape(-1)
    actual = np.asarray(actual).reshape(-1)
    if predicted.size == 0:
        raise DimensionError("cannot score an empty prediction")
    if predicted.shape != actual.shape:
        raise DimensionError(f"length mismatch: {predicted.size} vs {actual.size}")
    return float(np.mean(predicted != actual))
