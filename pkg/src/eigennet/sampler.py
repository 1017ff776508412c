"""Blockwise random-walk Metropolis for the EigenNet posterior.

Each iteration makes four Metropolis sub-updates: the ``alpha`` block, the
``beta`` block, the nonnegative ``s`` block (proposals reflected at zero)
and the scalar bias.  Proposal scales are adapted during burn-in only
(Robbins-Monro on a per-block multiplier, plus a diagonal shape taken from
the burn-in draws) and frozen afterwards.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _kernels
from .exceptions import ConfigError, DimensionError, EigenNetError, ValidationError
from .linalg_eigen import Dataset, EigenBasis
from .model_core import HyperParams, ModelState, generative_eigenvalues

__all__ = [
    "SamplerConfig",
    "ChainResult",
    "rw_step",
    "run_chain",
    "initial_state",
    "posterior_mean_classifier",
    "posterior_covariance_w",
    "effective_sample_size",
    "ess",
    "dump_chain",
    "load_chain",
]

BLOCKS = ("alpha", "beta", "s", "b")
_POST_CHUNK = 4096


@dataclass(frozen=True)
class SamplerConfig:
    """Sampling protocol.

    Step sizes are initial proposal multipliers; each block's proposal std is
    the multiplier times a per-coordinate scale (an approximate posterior std
    at start-up, the empirical burn-in std once enough draws exist).
    """

    total_iterations: int = 300_000
    burn_in: int = 150_000
    thin: int = 10
    step_alpha: float = 0.3
    step_beta: float = 0.3
    step_s: float = 0.3
    step_b: float = 0.5
    adapt_window: int = 500
    target_accept: float = 0.25
    seed: int = 0
    chains: int = 1
    tie_beta: bool = False
    fixed_blocks: tuple = ()

    def __post_init__(self):
        ints = ("total_iterations", "burn_in", "thin", "adapt_window", "chains")
        for name in ints:
            v = getattr(self, name)
            if int(v) != v:
                raise ConfigError(f"{name} must be an integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.total_iterations < 1:
            raise ConfigError("total_iterations must be positive")
        if not 0 <= self.burn_in < self.total_iterations:
            raise ConfigError("burn_in must satisfy 0 <= burn_in < total_iterations")
        if self.thin < 1 or self.adapt_window < 1 or self.chains < 1:
            raise ConfigError("thin, adapt_window and chains must be positive")
        for name in ("step_alpha", "step_beta", "step_s", "step_b"):
            v = float(getattr(self, name))
            if not (np.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be > 0, got {v!r}")
        if not 0 < self.target_accept < 1:
            raise ConfigError("target_accept must lie in (0, 1)")
        fixed = tuple(self.fixed_blocks)
        unknown = set(fixed) - set(BLOCKS)
        if unknown:
            raise ConfigError(f"unknown blocks {sorted(unknown)}; choose from {BLOCKS}")
        object.__setattr__(self, "fixed_blocks", fixed)
        object.__setattr__(self, "seed", int(self.seed))

    @classmethod
    def desk(cls, **kw) -> "SamplerConfig":
        """30k iterations with half burned in."""
        kw.setdefault("total_iterations", 30_000)
        kw.setdefault("burn_in", 15_000)
        return cls(**kw)

    @classmethod
    def paper(cls, **kw) -> "SamplerConfig":
        return cls(**kw)

    @property
    def n_retained(self) -> int:
        return (self.total_iterations - self.burn_in) // self.thin

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fixed_blocks"] = list(self.fixed_blocks)
        return d


@dataclass
class ChainResult:
    """Retained draws of one or more chains, stored as arrays."""

    alpha: np.ndarray
    beta: np.ndarray
    s: np.ndarray
    b: np.ndarray
    logpost: np.ndarray
    iterations: np.ndarray
    accept_rate: np.ndarray
    best_logpost: float
    best_state: ModelState
    config: SamplerConfig
    final_steps: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.alpha.shape[0]

    @property
    def samples(self) -> list:
        return [ModelState(a, be, s, b) for a, be, s, b in zip(self.alpha, self.beta, self.s, self.b)]

    @property
    def config_echo(self) -> SamplerConfig:
        return self.config


def _propose_block(state: ModelState, block: str, step, rng) -> ModelState:
    if block == "b":
        return replace(state, b=state.b + float(np.asarray(step)) * rng.standard_normal())
    cur = getattr(state, block)
    new = cur + np.asarray(step, dtype=float) * rng.standard_normal(cur.shape[0])
    if block == "s":
        new = np.abs(new)
    return replace(state, **{block: new})


def rw_step(state: ModelState, log_target, steps, rng, current_logp=None):
    """One sweep of four Metropolis sub-updates (alpha, beta, s, b).

    ``steps`` holds one proposal std (scalar or per-coordinate array) per
    block.  Returns the new state and a length-4 boolean array of per-block
    acceptances.  A proposal whose log target is not finite, or which is not
    a valid state, is rejected.
    """
    if len(steps) != 4:
        raise ConfigError("steps needs one entry per block (alpha, beta, s, b)")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    lp = log_target(state) if current_logp is None else current_logp
    accepted = np.zeros(4, dtype=bool)
    for k, block in enumerate(BLOCKS):
        try:
            prop = _propose_block(state, block, steps[k], rng)
            lp_new = float(log_target(prop))
        except (EigenNetError, FloatingPointError, OverflowError):
            prop, lp_new = state, -math.inf
        u = rng.random()
        log_u = math.log(u) if u > 0 else -math.inf
        if not math.isfinite(lp_new):
            continue
        if log_u < lp_new - lp:
            state, lp = prop, lp_new
            accepted[k] = True
    return state, accepted


def initial_state(m: int, eta) -> ModelState:
    """alpha = beta = 0, b = 0, s_j = 1 where eta_j > 0 else 0."""
    eta = np.asarray(eta)
    z = np.zeros(m)
    return ModelState(z, z, np.where(eta > 0, 1.0, 0.0), 0.0)


def _rm_gain(window_index: int) -> float:
    return 2.0 / math.sqrt(window_index + 1.0)


def _run_single(Z, y, V, identity, eta, lam1, lam2, lam3, bias_sigma, cfg, init, seed):
    n, m = Z.shape
    rng = np.random.default_rng(seed)
    Z = np.ascontiguousarray(Z, dtype=float)
    V = np.ascontiguousarray(V, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    eta = np.ascontiguousarray(eta, dtype=float)
    s_active = eta > 0

    update = np.array([b not in cfg.fixed_blocks for b in BLOCKS])
    if cfg.tie_beta:
        update[1] = False

    alpha = init.alpha.copy()
    beta = alpha.copy() if cfg.tie_beta else init.beta.copy()
    s = np.where(s_active, init.s, 0.0) if update[2] else init.s.copy()
    bvec = np.array([init.b])
    g = Z @ alpha
    cache = np.array([
        _kernels.loglik(g, bvec[0], y),
        _kernels.l1_of(V, alpha, identity),
        0.0 if cfg.tie_beta else float(((alpha - beta) ** 2).sum()),
        _kernels.generative(beta, s, eta, lam2),
    ])
    inv_var_b = 1.0 / bias_sigma**2
    lp0 = cache[0] - lam1 * cache[1] - 0.5 * lam3 * cache[2] + cache[3] - 0.5 * inv_var_b * bvec[0] ** 2
    if not np.isfinite(lp0):
        raise ValidationError("log posterior is not finite at the initial state")

    # Start-up scales: curvature of the logistic term at zero plus the prior.
    info = 0.25 * (Z**2).sum(axis=0)
    scale_a = 1.0 / np.sqrt(info + lam3 + 1e-2)
    scale_be = np.full(m, 1.0 / math.sqrt(lam3 + lam2 + 1e-2))
    scale_s = 1.0 / np.sqrt(np.maximum(lam2 * eta, 1e-2))
    steps = np.array([cfg.step_alpha, cfg.step_beta, cfg.step_s, cfg.step_b])
    steps[3] *= 1.0 / math.sqrt(0.25 * n + inv_var_b)
    shaped = np.zeros(3, dtype=bool)
    dims = np.array([m, m, max(int(s_active.sum()), 1)], dtype=float)

    K = cfg.n_retained
    out_alpha = np.empty((K, m))
    out_beta = np.empty((K, m))
    out_s = np.empty((K, m))
    out_b = np.empty(K)
    out_lp = np.empty(K)
    out_iter = np.empty(K, dtype=np.int64)
    out_count = np.zeros(1, dtype=np.int64)
    best_lp = np.array([lp0])
    best_alpha, best_beta, best_s, best_b = alpha.copy(), beta.copy(), s.copy(), bvec.copy()
    post_accepts = np.zeros(4)

    history = []
    T, B, W = cfg.total_iterations, cfg.burn_in, cfg.adapt_window
    t = 1
    window_index = 0
    while t <= T:
        # Windows never straddle the end of burn-in.
        end = min(t + W, B + 1) if t <= B else t + _POST_CHUNK
        end = min(end, T + 1)
        L = end - t
        na = rng.standard_normal((L, m))
        nbe = rng.standard_normal((L, m))
        ns = rng.standard_normal((L, m))
        nb = rng.standard_normal(L)
        logu = np.log(rng.random((L, 4)))
        accepts = np.zeros(4, dtype=np.int64)
        sums = np.zeros((3, m))
        sumsq = np.zeros((3, m))
        _kernels.run_window(
            Z, y, V, identity, eta, lam1, lam2, lam3, inv_var_b,
            update, cfg.tie_beta, s_active,
            alpha, beta, s, bvec, g, cache,
            steps, scale_a, scale_be, scale_s,
            na, nbe, ns, nb, logu,
            t, B, cfg.thin,
            out_alpha, out_beta, out_s, out_b, out_lp, out_iter, out_count,
            accepts, sums, sumsq,
            best_lp, best_alpha, best_beta, best_s, best_b,
        )
        if t <= B:
            rate = accepts / L
            gain = _rm_gain(window_index)
            steps *= np.exp(gain * (rate - cfg.target_accept))
            history.append((L, sums, sumsq))
            _reshape(history, shaped, steps, dims, (scale_a, scale_be, scale_s), update, s_active)
            window_index += 1
        else:
            post_accepts += accepts
        t = end

    n_post = T - B
    accept_rate = post_accepts / n_post
    accept_rate[~update] = np.nan
    best = ModelState(best_alpha, best_beta, best_s, best_b[0])
    final = {name: float(st) for name, st in zip(BLOCKS, steps)}
    return ChainResult(
        out_alpha, out_beta, out_s, out_b, out_lp, out_iter,
        accept_rate, float(best_lp[0]), best, cfg, final,
    )


def _reshape(history, shaped, steps, dims, scales, update, s_active):
    """Replace the start-up scales by burn-in standard deviations.

    Uses the most recent half of the burn-in windows, once at least four
    windows have been seen.
    """
    if len(history) < 4:
        return
    recent = history[len(history) // 2:]
    count = sum(h[0] for h in recent)
    tot = sum(h[1] for h in recent)
    tot2 = sum(h[2] for h in recent)
    mean = tot / count
    var = np.maximum(tot2 / count - mean**2, 0.0)
    for k in range(3):
        if not update[k]:
            continue
        sd = np.sqrt(var[k])
        mask = s_active if k == 2 else np.ones_like(s_active)
        if not np.any(mask) or np.max(sd[mask]) <= 0:
            continue
        floor = 1e-3 * np.max(sd[mask])
        new = np.where(mask, np.maximum(sd, floor), scales[k])
        scales[k][:] = new
        if not shaped[k]:
            steps[k] = 2.38 / math.sqrt(dims[k])
            shaped[k] = True


def _merge(results, cfg):
    best = max(results, key=lambda r: r.best_logpost)
    return ChainResult(
        np.concatenate([r.alpha for r in results]),
        np.concatenate([r.beta for r in results]),
        np.concatenate([r.s for r in results]),
        np.concatenate([r.b for r in results]),
        np.concatenate([r.logpost for r in results]),
        np.concatenate([r.iterations for r in results]),
        np.mean([r.accept_rate for r in results], axis=0),
        best.best_logpost,
        best.best_state,
        cfg,
        best.final_steps,
    )


def run_engine(Z, y, V, eta, lam1, lam2, lam3, bias_sigma, cfg: SamplerConfig, init: ModelState,
               identity: bool = False) -> ChainResult:
    """Run ``cfg.chains`` independent chains on precomputed scores ``Z``."""
    if not isinstance(cfg, SamplerConfig):
        raise ConfigError("cfg must be a SamplerConfig")
    if Z.shape[1] != init.m or V.shape[1] != init.m:
        raise DimensionError("initial state does not match the score matrix")
    if cfg.chains == 1:
        return _run_single(Z, y, V, identity, eta, lam1, lam2, lam3, bias_sigma, cfg, init, cfg.seed)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.chains)
    results = [
        _run_single(Z, y, V, identity, eta, lam1, lam2, lam3, bias_sigma, cfg, init, sq)
        for sq in seeds
    ]
    return _merge(results, cfg)


def run_chain(data: Dataset, basis: EigenBasis, hp: HyperParams, cfg: SamplerConfig,
              init: ModelState | None = None) -> ChainResult:
    """Sample the EigenNet posterior; reproducible given ``cfg.seed``."""
    if not isinstance(cfg, SamplerConfig):
        raise ConfigError("cfg must be a SamplerConfig")
    if data.p != basis.p:
        raise DimensionError(f"data has p={data.p}, basis has p={basis.p}")
    eta = generative_eigenvalues(basis, hp.eta_scaling)
    if init is None:
        init = initial_state(basis.m, eta)
    Z = basis.scores(data.features)
    return run_engine(Z, data.labels, basis.vectors, eta, hp.lambda1, hp.lambda2, hp.lambda3,
                      hp.bias_sigma, cfg, init)


def posterior_mean_classifier(chain: ChainResult, basis: EigenBasis):
    """``(V @ mean(alpha), mean(b))`` over the retained draws."""
    if len(chain) == 0:
        raise ValidationError("chain has no retained states")
    return basis.vectors @ chain.alpha.mean(axis=0), float(chain.b.mean())


def posterior_covariance_w(chain: ChainResult, basis: EigenBasis) -> np.ndarray:
    """Sample covariance of ``w = V alpha`` (divisor k - 1)."""
    if len(chain) < 2:
        raise ValidationError("need at least two retained states")
    C = np.atleast_2d(np.cov(chain.alpha, rowvar=False))
    Cw = basis.vectors @ C @ basis.vectors.T
    return 0.5 * (Cw + Cw.T)


def ess(x) -> float:
    """Effective sample size with Geyer's initial positive sequence."""
    x = np.asarray(x, dtype=float).reshape(-1)
    N = x.shape[0]
    if N < 10:
        raise ValidationError(f"need at least 10 draws for ESS, got {N}")
    xc = x - x.mean()
    var = xc @ xc / N
    if var <= 0 or not np.isfinite(var):
        return 1.0
    size = 1 << (2 * N - 1).bit_length()
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:N] / N
    rho = acov / acov[0]
    tau = -1.0
    for k in range(0, N - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    tau = max(tau, 1.0 / N)
    return float(min(N / tau, N))


def effective_sample_size(chain: ChainResult, coordinate: int, block: str = "alpha") -> float:
    """ESS of one coordinate of the ``alpha``/``beta``/``s`` block, or of ``b``."""
    if block == "b":
        return ess(chain.b)
    if block not in ("alpha", "beta", "s"):
        raise ValidationError(f"unknown block {block!r}")
    draws = getattr(chain, block)
    if not 0 <= coordinate < draws.shape[1]:
        raise DimensionError(f"coordinate {coordinate} out of range for m={draws.shape[1]}")
    return ess(draws[:, coordinate])


def dump_chain(chain: ChainResult, path) -> None:
    """Write one whitespace-separated record per retained state.

    Columns: iteration, logpost, b, alpha_1..m, beta_1..m, s_1..m.
    """
    path = Path(path)
    m = chain.alpha.shape[1]
    header = ["iteration", "logpost", "b"] + [f"{blk}_{j}" for blk in ("alpha", "beta", "s") for j in range(m)]
    with path.open("w") as fh:
        fh.write("# " + " ".join(header) + "\n")
        for i in range(len(chain)):
            vals = [chain.logpost[i], chain.b[i], *chain.alpha[i], *chain.beta[i], *chain.s[i]]
            fh.write(f"{int(chain.iterations[i])} " + " ".join(repr(float(v)) for v in vals) + "\n")


def load_chain(path) -> dict:
    """Read a chain dump back into arrays keyed by column group."""
    rows = np.loadtxt(path, comments="#", ndmin=2)
    m = (rows.shape[1] - 3) // 3
    return {
        "iteration": rows[:, 0].astype(np.int64),
        "logpost": rows[:, 1],
        "b": rows[:, 2],
        "alpha": rows[:, 3:3 + m],
        "beta": rows[:, 3 + m:3 + 2 * m],
        "s": rows[:, 3 + 2 * m:3 + 3 * m],
    }
