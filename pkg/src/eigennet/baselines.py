"""Comparison methods: lasso and elastic-net logistic regression, Bayesian lasso.

The penalised fits minimise

    sum_i log(1 + exp(-y_i (x_i.w + b))) + lambda1 |w|_1 + lambda2 |w|^2

with an unpenalised bias, by monotone accelerated proximal gradient
(MFISTA) with backtracking.  Every tenth iteration a sign-constrained
Newton step on the active set is tried; it is kept only if it does not raise
the objective beyond rounding error, so the objective sequence stays
non-increasing up to a few ulps.  Convergence is declared when the largest
KKT violation drops to ``tol``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import ValidationError
from .linalg_eigen import Dataset
from .model_core import log_sigmoid
from .sampler import ChainResult, SamplerConfig, run_engine
from .model_core import ModelState

__all__ = [
    "PenalizedFit",
    "logistic_objective",
    "kkt_residual",
    "fit_l1_logistic",
    "fit_elastic_logistic",
    "fit_bayesian_lasso",
]


@dataclass
class PenalizedFit:
    w: np.ndarray
    b: float
    objective: float
    iterations: int
    converged: bool
    residual: float = math.nan
    history: list = field(default_factory=list, repr=False)

    def to_json(self) -> str:
        return json.dumps({
            "w": [float(v) for v in self.w],
            "b": float(self.b),
            "objective": float(self.objective),
            "converged": bool(self.converged),
        })

    @classmethod
    def from_json(cls, text: str) -> "PenalizedFit":
        d = json.loads(text)
        return cls(np.asarray(d["w"], dtype=float), d["b"], d["objective"], 0, d["converged"])


def _sigmoid(z):
    return np.exp(log_sigmoid(z))


def logistic_objective(data: Dataset, w, b, lambda1: float, lambda2: float = 0.0) -> float:
    w = np.asarray(w, dtype=float)
    margin = data.labels * (data.features @ w + b)
    return float(-log_sigmoid(margin).sum() + lambda1 * np.abs(w).sum() + lambda2 * (w @ w))


def _smooth(Xc, y, w, b, lambda2):
    margin = y * (Xc @ w + b)
    val = -log_sigmoid(margin).sum() + lambda2 * (w @ w)
    r = -y * _sigmoid(-margin)
    gw = Xc.T @ r + 2.0 * lambda2 * w
    gb = r.sum()
    return val, gw, gb


def _min_norm_subgradient(gw, gb, w, lambda1):
    """Largest KKT violation: |g_j + lambda1 sign(w_j)| on the support, (|g_j| - lambda1)_+ off it."""
    on = w != 0
    viol = np.where(on, np.abs(gw + lambda1 * np.sign(w)), np.maximum(np.abs(gw) - lambda1, 0.0))
    return float(max(viol.max(initial=0.0), abs(gb)))


def kkt_residual(data: Dataset, w, b, lambda1: float, lambda2: float = 0.0) -> float:
    """KKT violation of ``(w, b)`` for the penalised objective on ``data``."""
    w = np.asarray(w, dtype=float)
    _, gw, gb = _smooth(data.features, data.labels, w, b, lambda2)
    return _min_norm_subgradient(gw, gb, w, lambda1)


def _soft(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _raw_residual(Xc, y, w, b, lambda1, lambda2, mean):
    # Gradient w.r.t. the uncentred weights picks up mean * d/db.
    _, gw, gb = _smooth(Xc, y, w, b, lambda2)
    return _min_norm_subgradient(gw + mean * gb, gb, w, lambda1)


def _newton_polish(Xc, y, w, b, lambda1, lambda2, F, res, mean):
    """Sign-constrained Newton step on the active set.

    Accepted if the objective does not increase, or if it moves by no more
    than rounding error while the KKT residual strictly drops.
    """
    slack = 4.0 * np.finfo(float).eps * max(1.0, abs(F))
    on = np.flatnonzero(w)
    A = np.hstack([Xc[:, on], np.ones((Xc.shape[0], 1))])
    theta = np.append(w[on], b)
    margin = y * (A @ theta)
    prob = _sigmoid(-margin)
    grad = A.T @ (-y * prob)
    grad[:-1] += 2.0 * lambda2 * theta[:-1] + lambda1 * np.sign(theta[:-1])
    H = (A * (prob * (1.0 - prob))[:, None]).T @ A
    H[np.arange(len(on)), np.arange(len(on))] += 2.0 * lambda2
    try:
        step = np.linalg.solve(H + 1e-12 * np.eye(H.shape[0]), grad)
    except np.linalg.LinAlgError:
        return None
    sgn = np.sign(theta[:-1])
    t = 1.0
    for _ in range(30):
        cand = theta - t * step
        if np.all(np.sign(cand[:-1]) == sgn):
            w_new = np.zeros_like(w)
            w_new[on] = cand[:-1]
            F_new = _objective(Xc, y, w_new, cand[-1], lambda1, lambda2)
            if F_new <= F:
                return w_new, cand[-1], F_new
            if F_new <= F + slack:
                if _raw_residual(Xc, y, w_new, cand[-1], lambda1, lambda2, mean) < res:
                    return w_new, cand[-1], F_new
        t *= 0.5
    return None


def _objective(Xc, y, w, b, lambda1, lambda2):
    margin = y * (Xc @ w + b)
    return float(-log_sigmoid(margin).sum() + lambda1 * np.abs(w).sum() + lambda2 * (w @ w))


def _fit_penalized(data, lambda1, lambda2, tol, max_iter, w0=None, b0=None):
    if lambda1 < 0 or lambda2 < 0:
        raise ValidationError("penalty weights must be nonnegative")
    if tol <= 0:
        raise ValidationError("tol must be positive")
    X, y = data.features, data.labels
    n, p = X.shape
    mean = X.mean(axis=0)
    Xc = X - mean

    w = np.zeros(p) if w0 is None else np.asarray(w0, dtype=float).copy()
    if b0 is None:
        pos = np.mean(y > 0)
        pos = min(max(pos, 1.0 / (2 * n)), 1.0 - 1.0 / (2 * n))
        b = math.log(pos / (1.0 - pos))
    else:
        b = float(b0) + mean @ w

    # Global Lipschitz bound of the smooth part; backtracking may shrink it.
    A = np.hstack([Xc, np.ones((n, 1))])
    L_max = 0.25 * np.linalg.norm(A, 2) ** 2 + 2.0 * lambda2
    L = L_max

    F = _objective(Xc, y, w, b, lambda1, lambda2)
    history = [F]
    zw, zb = w.copy(), b
    t_k = 1.0
    converged = False
    res = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        f_z, gw, gb = _smooth(Xc, y, zw, zb, lambda2)
        L = max(L * 0.7, 1e-12)
        while True:
            uw = _soft(zw - gw / L, lambda1 / L)
            ub = zb - gb / L
            dw, db = uw - zw, ub - zb
            f_u = _smooth(Xc, y, uw, ub, lambda2)[0]
            if f_u <= f_z + gw @ dw + gb * db + 0.5 * L * (dw @ dw + db * db) + 1e-12 * abs(f_z):
                break
            L *= 2.0
            if L > 1e6 * L_max:
                break
        F_u = f_u + lambda1 * np.abs(uw).sum()
        w_prev, b_prev = w, b
        if F_u <= F:
            w, b, F = uw, ub, F_u
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_k * t_k))
        zw = w + (t_k / t_next) * (uw - w) + ((t_k - 1.0) / t_next) * (w - w_prev)
        zb = b + (t_k / t_next) * (ub - b) + ((t_k - 1.0) / t_next) * (b - b_prev)
        t_k = t_next

        res = _raw_residual(Xc, y, w, b, lambda1, lambda2, mean)
        if res > tol and it % 10 == 0:
            polished = _newton_polish(Xc, y, w, b, lambda1, lambda2, F, res, mean)
            if polished is not None:
                w, b, F = polished
                zw, zb, t_k = w.copy(), b, 1.0
                res = _raw_residual(Xc, y, w, b, lambda1, lambda2, mean)
        history.append(F)
        if res <= tol:
            converged = True
            break

    b_raw = float(b - mean @ w)
    return PenalizedFit(w, b_raw, float(F), it, converged, res, history)


def fit_l1_logistic(data: Dataset, lambda1: float, tol: float = 1e-6, max_iter: int = 20_000,
                    w0=None, b0=None) -> PenalizedFit:
    """Lasso-penalised logistic regression (bias unpenalised)."""
    return _fit_penalized(data, lambda1, 0.0, tol, max_iter, w0, b0)


def fit_elastic_logistic(data: Dataset, lambda1: float, lambda2: float, tol: float = 1e-6,
                         max_iter: int = 20_000, w0=None, b0=None) -> PenalizedFit:
    """Elastic-net logistic regression: ``lambda1 |w|_1 + lambda2 |w|^2`` penalty."""
    return _fit_penalized(data, lambda1, lambda2, tol, max_iter, w0, b0)


def fit_bayesian_lasso(data: Dataset, lambda1: float, cfg: SamplerConfig, bias_sigma: float = 10.0):
    """Bayesian lasso with a logistic likelihood, sampled in weight space.

    Uses the same random-walk engine as EigenNet with the identity basis and
    no generative block.  The bias prior sits on the intercept of the centred
    features.  Returns ``(w_mean, b_mean, chain)`` with ``b_mean`` for the raw
    (uncentred) features.
    """
    if lambda1 <= 0:
        raise ValidationError("lambda1 must be positive")
    X, y = data.features, data.labels
    p = X.shape[1]
    mean = X.mean(axis=0)
    Xc = X - mean
    init = ModelState.zeros(p)
    chain = run_engine(
        Xc, y, np.eye(p), np.zeros(p), lambda1, 0.0, 0.0, bias_sigma,
        _blasso_config(cfg), init, identity=True,
    )
    w = chain.alpha.mean(axis=0)
    b = float(chain.b.mean() - mean @ w)
    return w, b, chain


def _blasso_config(cfg: SamplerConfig) -> SamplerConfig:
    from dataclasses import replace

    return replace(cfg, tie_beta=False, fixed_blocks=tuple(sorted(set(cfg.fixed_blocks) | {"beta", "s"})))
