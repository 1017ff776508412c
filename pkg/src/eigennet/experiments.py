"""Cross-validation, experiment suites and result tables."""

from __future__ import annotations

import csv
import itertools
import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .baselines import fit_bayesian_lasso, fit_elastic_logistic, fit_l1_logistic
from .datagen import SynthSpec, generate_correlated, generate_independent, load_csv, split
from .exceptions import ConfigError, ValidationError
from .linalg_eigen import Dataset, eigendecompose
from .model_core import HyperParams, error_rate, predict
from .sampler import SamplerConfig, posterior_covariance_w, posterior_mean_classifier, run_chain

__all__ = [
    "METHODS",
    "SUITES",
    "DEFAULT_GRID_VALUES",
    "FittedClassifier",
    "RunRecord",
    "ExperimentReport",
    "default_grid",
    "fit_method",
    "stratified_folds",
    "cross_validate",
    "run_cell",
    "run_experiment",
    "visualization_suite",
    "emit_report",
    "load_reports",
]

METHODS = ("lasso", "enet", "blasso", "eigennet")
SUITES = ("visualization", "synth-correlated-sweep", "synth-independent-sweep", "csv")
DEFAULT_GRID_VALUES = (0.01, 0.1, 1.0, 10.0)
# Placeholder for penalty weights a method does not use.
UNUSED = 1.0

PENALIZED_TOL = 1e-6
PENALIZED_MAX_ITER = 5_000
# Chain length for the cross-validation fits at desk scale; the final refit
# uses the full sampler settings.
DESK_CV_ITERATIONS = 6_000


@dataclass(frozen=True)
class FittedClassifier:
    """Linear rule ``sign((x - center).w + b)``."""

    w: np.ndarray
    b: float
    center: np.ndarray

    def predict(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float) - self.center
        return predict(self.w, self.b, None, points)


def _check_method(method):
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


def default_grid(method: str, values=DEFAULT_GRID_VALUES, bias_sigma: float = 10.0) -> list:
    """Hyperparameter grid for ``method``; unused weights fixed at 1."""
    _check_method(method)
    if method in ("lasso", "blasso"):
        combos = [(a, UNUSED, UNUSED) for a in values]
    elif method == "enet":
        combos = [(a, c, UNUSED) for a, c in itertools.product(values, values)]
    else:
        combos = list(itertools.product(values, values, values))
    return [HyperParams(a, c, d, bias_sigma=bias_sigma) for a, c, d in combos]


def fit_method(method: str, train: Dataset, hp: HyperParams, cfg: SamplerConfig,
               keep_chain: bool = False):
    """Fit one method at fixed hyperparameters.

    Returns the classifier and, when ``keep_chain`` is set, a dict holding the
    chain and (for EigenNet) the basis.
    """
    _check_method(method)
    p = train.p
    extra = {}
    if method == "lasso":
        fit = fit_l1_logistic(train, hp.lambda1, tol=PENALIZED_TOL, max_iter=PENALIZED_MAX_ITER)
        clf = FittedClassifier(fit.w, fit.b, np.zeros(p))
    elif method == "enet":
        fit = fit_elastic_logistic(train, hp.lambda1, hp.lambda2, tol=PENALIZED_TOL, max_iter=PENALIZED_MAX_ITER)
        clf = FittedClassifier(fit.w, fit.b, np.zeros(p))
    elif method == "blasso":
        w, b, chain = fit_bayesian_lasso(train, hp.lambda1, cfg, bias_sigma=hp.bias_sigma)
        clf = FittedClassifier(w, b, np.zeros(p))
        extra["chain"] = chain
    else:
        basis = eigendecompose(train)
        chain = run_chain(train, basis, hp, cfg)
        w, b = posterior_mean_classifier(chain, basis)
        clf = FittedClassifier(w, b, basis.mean)
        extra.update(chain=chain, basis=basis)
    return (clf, extra) if keep_chain else clf


def stratified_folds(labels, folds: int, seed) -> list:
    """Index arrays of ``folds`` validation sets, class proportions preserved."""
    if folds < 2:
        raise ConfigError("folds must be >= 2")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    assign = np.empty(labels.shape[0], dtype=int)
    offset = 0
    for cls in (-1.0, 1.0):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(idx.shape[0])]
        assign[idx] = (offset + np.arange(idx.shape[0])) % folds
        offset += idx.shape[0]
    return [np.flatnonzero(assign == k) for k in range(folds)]


def _tie_key(hp: HyperParams):
    return (hp.lambda1, hp.lambda2, hp.lambda3)


def _chain_seed(seed, *parts) -> int:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *[int(p) for p in parts]])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)


def cross_validate(data: Dataset, method: str, grid=None, folds: int = 5, seed=0,
                   cfg: SamplerConfig | None = None, return_scores: bool = False):
    """Stratified k-fold selection of the grid point with lowest mean error.

    Ties go to the larger ``lambda1``, then ``lambda2``, then ``lambda3``.
    Folds whose training part holds a single class are skipped with a
    warning.
    """
    _check_method(method)
    grid = default_grid(method) if grid is None else list(grid)
    if not grid:
        raise ConfigError("grid must be non-empty")
    if len(grid) == 1 and not return_scores:
        return grid[0]
    cfg = SamplerConfig.desk() if cfg is None else cfg

    usable = []
    for k, val_idx in enumerate(stratified_folds(data.labels, folds, seed)):
        train_idx = np.setdiff1d(np.arange(data.n), val_idx)
        if val_idx.size == 0 or np.unique(data.labels[train_idx]).size < 2:
            warnings.warn(f"cross-validation fold {k} skipped: single-class training data or empty fold")
            continue
        usable.append((k, data.subset(train_idx), data.subset(val_idx)))
    if not usable:
        raise ValidationError("every cross-validation fold was skipped")

    scores = []
    for gi, hp in enumerate(grid):
        errs = []
        for k, tr, va in usable:
            fold_cfg = replace(cfg, seed=_chain_seed(cfg.seed, k, gi))
            clf = fit_method(method, tr, hp, fold_cfg)
            errs.append(error_rate(clf.predict(va.features), va.labels))
        scores.append(float(np.mean(errs)))

    best = min(range(len(grid)), key=lambda i: (round(scores[i], 12), tuple(-v for v in _tie_key(grid[i]))))
    if return_scores:
        return grid[best], scores
    return grid[best]


@dataclass
class RunRecord:
    seed: int
    error_rate: float
    wall_time: float
    n_train: int = 0
    hyperparams: dict = field(default_factory=dict)


@dataclass
class ExperimentReport:
    method: str
    dataset_id: str
    n_train: int
    per_run: list
    mean_error: float
    std_error: float
    config: dict

    @classmethod
    def from_runs(cls, method, dataset_id, n_train, runs, config) -> "ExperimentReport":
        if not runs:
            raise ValidationError("a report needs at least one run")
        runs = sorted(runs, key=lambda r: r.seed)
        errs = np.array([r.error_rate for r in runs])
        se = float(errs.std(ddof=1) / math.sqrt(len(errs))) if len(errs) > 1 else 0.0
        return cls(method, dataset_id, int(n_train), runs, float(errs.mean()), se, config)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "ExperimentReport":
        runs = [RunRecord(**r) for r in d["per_run"]]
        return cls(d["method"], d["dataset_id"], d["n_train"], runs, d["mean_error"], d["std_error"], d["config"])


@dataclass
class Settings:
    """Knobs shared by every cell of a suite; echoed into each report."""

    methods: tuple = METHODS
    seeds: tuple = tuple(range(10))
    n_grid: tuple = (10, 20, 30, 40, 50, 60, 70, 80)
    n_test: int = 2000
    p: int = 40
    folds: int = 5
    grid_values: tuple = DEFAULT_GRID_VALUES
    bias_sigma: float = 10.0
    sampler: SamplerConfig = field(default_factory=SamplerConfig.desk)
    cv_sampler: SamplerConfig | None = None
    extra: dict = field(default_factory=dict)

    def echo(self) -> dict:
        d = {
            "methods": list(self.methods),
            "seeds": list(self.seeds),
            "n_grid": list(self.n_grid),
            "n_test": self.n_test,
            "p": self.p,
            "folds": self.folds,
            "grid_values": list(self.grid_values),
            "bias_sigma": self.bias_sigma,
            "sampler": self.sampler.to_dict(),
            "cv_sampler": (self.cv_sampler or self.sampler).to_dict(),
        }
        return d


def _settings(overrides) -> Settings:
    overrides = dict(overrides or {})
    paper_scale = overrides.pop("paper_scale", False)
    s = Settings()
    sampler_kw = {}
    for key in ("iters", "total_iterations"):
        if key in overrides:
            sampler_kw["total_iterations"] = int(overrides.pop(key))
    if "burn_in" in overrides:
        sampler_kw["burn_in"] = int(overrides.pop("burn_in"))
    if "thin" in overrides:
        sampler_kw["thin"] = int(overrides.pop("thin"))
    if paper_scale:
        sampler = SamplerConfig.paper(**sampler_kw)
    else:
        if "total_iterations" in sampler_kw and "burn_in" not in sampler_kw:
            sampler_kw["burn_in"] = sampler_kw["total_iterations"] // 2
        sampler = SamplerConfig.desk(**sampler_kw)
    s.sampler = sampler
    cv_iters = overrides.pop("cv_iters", None if paper_scale else min(DESK_CV_ITERATIONS, sampler.total_iterations))
    if cv_iters is not None:
        s.cv_sampler = replace(sampler, total_iterations=int(cv_iters), burn_in=int(cv_iters) // 2)
    for key in ("methods", "seeds", "n_grid", "grid_values"):
        if key in overrides:
            setattr(s, key, tuple(overrides.pop(key)))
    for key in ("n_test", "p", "folds"):
        if key in overrides:
            setattr(s, key, int(overrides.pop(key)))
    if "bias_sigma" in overrides:
        s.bias_sigma = float(overrides.pop("bias_sigma"))
    for m in s.methods:
        _check_method(m)
    s.extra = overrides
    return s


def run_cell(method, train: Dataset, test: Dataset, settings: Settings, seed: int, keep_chain=False):
    """Cross-validate then refit one method on one train/test pair."""
    t0 = time.perf_counter()
    mi = METHODS.index(method)
    cv_cfg = replace(settings.cv_sampler or settings.sampler, seed=_chain_seed(seed, mi, train.n, 1))
    grid = default_grid(method, settings.grid_values, settings.bias_sigma)
    hp = cross_validate(train, method, grid, settings.folds, seed=_chain_seed(seed, train.n, 2), cfg=cv_cfg)
    cfg = replace(settings.sampler, seed=_chain_seed(seed, mi, train.n, 3))
    clf, extra = fit_method(method, train, hp, cfg, keep_chain=True)
    err = error_rate(clf.predict(test.features), test.labels)
    rec = RunRecord(int(seed), err, time.perf_counter() - t0, train.n,
                    {"lambda1": hp.lambda1, "lambda2": hp.lambda2, "lambda3": hp.lambda3})
    return (rec, clf, extra) if keep_chain else rec


def _synth_sweep(kind, settings: Settings):
    gen = generate_correlated if kind == "correlated" else generate_independent
    runs = {(m, n): [] for m in settings.methods for n in settings.n_grid}
    for n in settings.n_grid:
        for seed in settings.seeds:
            spec = SynthSpec.random_weights(p=settings.p, n_train=n, n_test=settings.n_test, seed=seed)
            train, test, _, _ = gen(spec)
            for m in settings.methods:
                runs[(m, n)].append(run_cell(m, train, test, settings, seed))
    echo = settings.echo()
    reports = []
    for m in settings.methods:
        for n in settings.n_grid:
            echo_n = dict(echo, suite=f"synth-{kind}-sweep", weights="random_same_sign")
            reports.append(ExperimentReport.from_runs(m, f"synth-{kind}/n={n}", n, runs[(m, n)], echo_n))
    return reports


def visualization_suite(settings: Settings):
    """Fixed +/-5 weights, n_train = 80.  Returns ``(reports, artifacts)``.

    Artifacts: weight vectors of lasso, enet, EigenNet and the truth from the
    first seed, and the posterior covariances of ``w`` for the Bayesian lasso
    and EigenNet averaged over seeds.
    """
    n = 80 if "n_train" not in settings.extra else int(settings.extra["n_train"])
    runs = {m: [] for m in settings.methods}
    weights, covs = {}, {"blasso": [], "eigennet": []}
    for i, seed in enumerate(settings.seeds):
        spec = SynthSpec(p=settings.p, n_train=n, n_test=settings.n_test, seed=seed)
        train, test, w_true, _ = generate_correlated(spec)
        for m in settings.methods:
            rec, clf, extra = run_cell(m, train, test, settings, seed, keep_chain=True)
            runs[m].append(rec)
            if i == 0 and m != "blasso":
                weights[m] = clf.w
            if m == "eigennet":
                covs[m].append(posterior_covariance_w(extra["chain"], extra["basis"]))
            elif m == "blasso":
                covs[m].append(np.cov(extra["chain"].alpha, rowvar=False))
        if i == 0:
            weights["true"] = w_true
    echo = dict(settings.echo(), suite="visualization", n_train=n, weights="fixed_pm5")
    reports = [ExperimentReport.from_runs(m, "synth-visualization", n, runs[m], echo) for m in settings.methods]
    artifacts = {
        "weights": weights,
        "covariances": {k: np.mean(v, axis=0) for k, v in covs.items() if v},
    }
    return reports, artifacts


def _csv_suite(settings: Settings):
    extra = settings.extra
    data = extra.get("data")
    if data is None:
        if "path" not in extra:
            raise ConfigError("csv suite needs a 'path' (or an in-memory 'data') override")
        data = load_csv(extra["path"], extra.get("label_column", -1), extra.get("label_map"),
                        extra.get("header"))
    n_train = int(extra.get("n_train", data.n // 2))
    dataset_id = str(extra.get("dataset_id", "csv"))
    runs = {m: [] for m in settings.methods}
    for seed in settings.seeds:
        train, test = split(data, n_train, seed)
        for m in settings.methods:
            runs[m].append(run_cell(m, train, test, settings, seed))
    echo = dict(settings.echo(), suite="csv", dataset_id=dataset_id, n_train=n_train)
    return [ExperimentReport.from_runs(m, dataset_id, n_train, runs[m], echo) for m in settings.methods]


def run_experiment(suite: str, overrides=None, out_dir=None, fmt: str = "json") -> list:
    """Run a named suite and return its reports.

    With ``out_dir`` the reports (and, for the visualization suite, the
    weight vectors and covariance matrices) are written there.
    """
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; valid suites: {', '.join(SUITES)}")
    settings = _settings(overrides)
    artifacts = None
    if suite == "visualization":
        reports, artifacts = visualization_suite(settings)
    elif suite == "synth-correlated-sweep":
        reports = _synth_sweep("correlated", settings)
    elif suite == "synth-independent-sweep":
        reports = _synth_sweep("independent", settings)
    else:
        reports = _csv_suite(settings)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        emit_report(reports, fmt, out / f"{suite}.{fmt}")
        if artifacts is not None:
            write_artifacts(artifacts, out)
    return reports


def write_artifacts(artifacts, out_dir) -> None:
    out = Path(out_dir)
    names = [k for k in ("lasso", "enet", "eigennet", "true") if k in artifacts["weights"]]
    W = np.column_stack([artifacts["weights"][k] for k in names])
    with (out / "weights.csv").open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["feature", *names])
        for j, row in enumerate(W):
            wr.writerow([j, *(f"{v:.17g}" for v in row)])
    for name, C in artifacts["covariances"].items():
        np.savetxt(out / f"covariance_{name}.csv", C, delimiter=",", fmt="%.17g")


def _sorted(reports):
    return sorted(reports, key=lambda r: (r.method, r.n_train, r.dataset_id))


def emit_report(reports, fmt: str, path) -> None:
    """Write reports as CSV (one row per run) or JSON (full reports)."""
    reports = list(reports)
    if not reports:
        raise ValidationError("no reports to emit")
    if fmt not in ("csv", "json"):
        raise ConfigError("format must be 'csv' or 'json'")
    path = Path(path)
    try:
        if fmt == "json":
            payload = [r.to_dict() for r in _sorted(reports)]
            path.write_text(json.dumps(payload, indent=2, sort_keys=True))
            return
        with path.open("w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["method", "dataset_id", "n_train", "seed", "error_rate", "wall_time_s"])
            for r in _sorted(reports):
                for run in sorted(r.per_run, key=lambda x: x.seed):
                    wr.writerow([r.method, r.dataset_id, r.n_train, run.seed, repr(run.error_rate),
                                 f"{run.wall_time:.6f}"])
    except OSError as exc:
        raise ConfigError(f"cannot write report to {path}: {exc}") from exc


def load_reports(path) -> list:
    return [ExperimentReport.from_dict(d) for d in json.loads(Path(path).read_text())]
