"""Covariance eigenstructure and the weight <-> eigen-coordinate maps.

Weights are written as ``w = V @ alpha`` where the columns of ``V`` are the
eigenvectors of the (column-centred) training covariance.  When ``p > n`` the
decomposition goes through the ``n x n`` Gram matrix so the cost is cubic in
``n`` rather than ``p``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionError, ValidationError

__all__ = [
    "Dataset",
    "EigenBasis",
    "ChangeOfVariablesReport",
    "eigendecompose",
    "to_weight_space",
    "project_to_eigen",
    "verify_change_of_variables",
]

# Relative threshold below which an eigenvalue is treated as exactly zero.
RANK_TOL = 1e-12


@dataclass(frozen=True)
class Dataset:
    """Feature matrix ``features`` (n x p) with labels in {-1, +1}."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = np.array(self.features, dtype=float, copy=True)
        y = np.array(self.labels, dtype=float, copy=True).reshape(-1)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise ValidationError(f"features must be a 2-d matrix, got ndim={X.ndim}")
        n, p = X.shape
        if n < 1 or p < 1:
            raise ValidationError(f"need n >= 1 and p >= 1, got shape {X.shape}")
        if y.shape[0] != n:
            raise DimensionError(f"{n} feature rows but {y.shape[0]} labels")
        if not np.all(np.isfinite(X)):
            raise ValidationError("features contain non-finite entries")
        bad = ~np.isin(y, (-1.0, 1.0))
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise ValidationError(f"label at row {i} is {y[i]!r}; labels must be -1 or +1")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.features[idx], self.labels[idx])


@dataclass(frozen=True)
class EigenBasis:
    """Eigenvectors (columns of ``vectors``, descending eigenvalue) of a covariance.

    ``mean`` is the centring offset applied to every point before it is
    projected onto the basis.
    """

    vectors: np.ndarray
    values: np.ndarray
    mean: np.ndarray = field(default=None)

    def __post_init__(self):
        V = np.array(self.vectors, dtype=float, copy=True)
        eta = np.array(self.values, dtype=float, copy=True).reshape(-1)
        if V.ndim != 2:
            raise DimensionError("vectors must be a p x m matrix")
        p, m = V.shape
        if eta.shape[0] != m:
            raise DimensionError(f"{m} eigenvectors but {eta.shape[0]} eigenvalues")
        mean = np.zeros(p) if self.mean is None else np.array(self.mean, dtype=float).reshape(-1)
        if mean.shape[0] != p:
            raise DimensionError(f"mean has length {mean.shape[0]}, expected {p}")
        for a in (V, eta, mean):
            a.setflags(write=False)
        object.__setattr__(self, "vectors", V)
        object.__setattr__(self, "values", eta)
        object.__setattr__(self, "mean", mean)

    @property
    def p(self) -> int:
        return self.vectors.shape[0]

    @property
    def m(self) -> int:
        return self.vectors.shape[1]

    def center(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(1, -1)
        if points.shape[1] != self.p:
            raise DimensionError(f"points have {points.shape[1]} columns, basis expects {self.p}")
        return points - self.mean

    def scores(self, points) -> np.ndarray:
        """Coordinates ``(x - mean) @ V`` of each row of ``points``."""
        return self.center(points) @ self.vectors

    def with_values(self, values) -> "EigenBasis":
        return EigenBasis(self.vectors, values, self.mean)


def _canonical_signs(V: np.ndarray) -> np.ndarray:
    # Largest-magnitude entry of each column made positive; argmax picks the
    # lowest index on ties.
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.where(V[idx, np.arange(V.shape[1])] < 0, -1.0, 1.0)
    return V * signs


def _complete(V1: np.ndarray, total: int) -> np.ndarray:
    """Append orthonormal columns to ``V1`` until it has ``total`` columns."""
    p, r = V1.shape
    if r == total:
        return V1
    if r == 0:
        return np.eye(p)[:, :total]
    Q, _ = np.linalg.qr(V1, mode="complete")
    return np.hstack([V1, Q[:, r:total]])


def eigendecompose(data: Dataset) -> EigenBasis:
    """Eigen-decompose the sample covariance of the centred features.

    The divisor is ``n - 1``.  ``m = min(n, p)`` eigenpairs are returned; for
    ``p > n`` the nonzero spectrum comes from the ``n x n`` Gram matrix and
    directions with (numerically) zero variance are filled by an orthonormal
    completion so that ``V`` keeps ``m`` columns.
    """
    if not isinstance(data, Dataset):
        data = Dataset(*data)
    X = data.features
    n, p = X.shape
    m = min(n, p)
    mean = X.mean(axis=0)
    if n == 1:
        return EigenBasis(np.eye(p)[:, :1], np.zeros(1), mean)

    Xc = X - mean
    denom = n - 1
    if p <= n:
        C = Xc.T @ Xc / denom
        C = 0.5 * (C + C.T)
        vals, vecs = np.linalg.eigh(C)
        order = np.argsort(vals, kind="stable")[::-1]
        vals, vecs = vals[order], vecs[:, order]
        top = vals[0] if vals[0] > 0 else 0.0
        vals = np.where(vals < RANK_TOL * top, 0.0, vals)
        if top == 0.0:
            vals[:] = 0.0
        V = vecs
    else:
        G = Xc @ Xc.T / denom
        G = 0.5 * (G + G.T)
        gvals, U = np.linalg.eigh(G)
        order = np.argsort(gvals, kind="stable")[::-1]
        gvals, U = gvals[order], U[:, order]
        top = gvals[0] if gvals[0] > 0 else 0.0
        keep = gvals > RANK_TOL * top if top > 0 else np.zeros(n, dtype=bool)
        r = int(np.count_nonzero(keep))
        V1 = Xc.T @ U[:, :r]
        V1 /= np.linalg.norm(V1, axis=0)
        V = _complete(V1, m)
        vals = np.zeros(m)
        vals[:r] = gvals[:r]
    return EigenBasis(_canonical_signs(V), vals, mean)


def to_weight_space(coeffs, basis: EigenBasis) -> np.ndarray:
    """Map eigen-coordinates to feature weights, ``V @ coeffs``."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[-1] != basis.m:
        raise DimensionError(f"coefficient length {coeffs.shape[-1]} != m={basis.m}")
    return coeffs @ basis.vectors.T


def project_to_eigen(w, basis: EigenBasis) -> np.ndarray:
    """Project feature weights onto the eigenvectors, ``V.T @ w``."""
    w = np.asarray(w, dtype=float)
    if w.shape[-1] != basis.p:
        raise DimensionError(f"weight length {w.shape[-1]} != p={basis.p}")
    return w @ basis.vectors


@dataclass(frozen=True)
class ChangeOfVariablesReport:
    pinv_deviation: float
    det_deviation: float
    span_deviation: float
    kernel_deviation: float

    def ok(self, tol: float = 1e-10, kernel_tol: float = 1e-8) -> bool:
        return (
            self.pinv_deviation < tol
            and self.det_deviation < tol
            and self.span_deviation < kernel_tol
            and self.kernel_deviation < kernel_tol
        )


def _weight_kernel(w, w_tilde, lambda1, lambda3):
    return -lambda1 * np.abs(w).sum(-1) - 0.5 * lambda3 * ((w - w_tilde) ** 2).sum(-1)


def _eigen_kernel(alpha, beta, V, lambda1, lambda3):
    return -lambda1 * np.abs(alpha @ V.T).sum(-1) - 0.5 * lambda3 * ((alpha - beta) ** 2).sum(-1)


def verify_change_of_variables(
    basis: EigenBasis,
    trials: int = 100,
    rng=None,
    lambda1: float = 1.0,
    lambda3: float = 1.0,
) -> ChangeOfVariablesReport:
    """Numerically check that the joint prior survives ``w = V alpha``.

    Reports the max deviation of ``pinv(V)`` from ``V.T``, of
    ``|det(V.T V)|`` from 1, of ``V pinv(V) w`` from ``w`` for ``w`` in the
    span, and the spread of the log-kernel difference between the weight
    space and eigen-space forms over ``trials`` random points (it must be a
    constant).
    """
    rng = np.random.default_rng(rng)
    V = basis.vectors
    pinv = np.linalg.pinv(V)
    pinv_dev = float(np.max(np.abs(pinv - V.T)))
    det_dev = float(abs(abs(np.linalg.det(V.T @ V)) - 1.0))

    alpha = rng.standard_normal((trials, basis.m)) * 3.0
    beta = rng.standard_normal((trials, basis.m)) * 3.0
    w, w_tilde = alpha @ V.T, beta @ V.T
    span_dev = float(np.max(np.abs((w @ pinv.T) @ V.T - w)))
    diff = _weight_kernel(w, w_tilde, lambda1, lambda3) - _eigen_kernel(alpha, beta, V, lambda1, lambda3)
    kernel_dev = float(np.max(np.abs(diff - diff[0])))
    return ChangeOfVariablesReport(pinv_dev, det_dev, span_dev, kernel_dev)
