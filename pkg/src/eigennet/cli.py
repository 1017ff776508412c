"""Command-line front end: ``eigennet {synth,fit,predict,cv,experiment,report}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .datagen import SynthSpec, generate_correlated, generate_independent, load_csv, save_csv
from .exceptions import ConfigError, EigenNetError
from .experiments import (
    DEFAULT_GRID_VALUES,
    METHODS,
    SUITES,
    FittedClassifier,
    cross_validate,
    default_grid,
    emit_report,
    fit_method,
    load_reports,
    run_experiment,
)
from .model_core import HyperParams, error_rate
from .sampler import SamplerConfig, dump_chain


def _sampler(args) -> SamplerConfig:
    kw = {"seed": args.seed}
    if args.iters is not None:
        kw["total_iterations"] = args.iters
        kw["burn_in"] = args.iters // 2
    if args.burn_in is not None:
        kw["burn_in"] = args.burn_in
    if getattr(args, "thin", None) is not None:
        kw["thin"] = args.thin
    if getattr(args, "chains", None) is not None:
        kw["chains"] = args.chains
    return SamplerConfig.paper(**kw) if args.paper_scale else SamplerConfig.desk(**kw)


def _hyper(args) -> HyperParams:
    return HyperParams(args.lambda1, args.lambda2, args.lambda3, bias_sigma=args.bias_sigma)


def _load(args):
    label = args.label_column
    try:
        label = int(label)
    except ValueError:
        pass
    return load_csv(args.data, label_column=label)


def _values(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def cmd_synth(args):
    if args.weights == "fixed":
        spec = SynthSpec(p=args.p, n_train=args.n_train, n_test=args.n_test, seed=args.seed)
    else:
        spec = SynthSpec.random_weights(p=args.p, n_train=args.n_train, n_test=args.n_test, seed=args.seed)
    gen = generate_correlated if args.kind == "correlated" else generate_independent
    train, test, w, b = gen(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_csv(train, out / "train.csv")
    save_csv(test, out / "test.csv")
    (out / "truth.json").write_text(json.dumps({"w": w.tolist(), "b": b}, indent=2))
    print(f"wrote {out / 'train.csv'} ({train.n} rows), {out / 'test.csv'} ({test.n} rows)")


def cmd_fit(args):
    data = _load(args)
    hp = _hyper(args)
    cfg = _sampler(args)
    clf, extra = fit_method(args.method, data, hp, cfg, keep_chain=True)
    model = {
        "method": args.method,
        "w": clf.w.tolist(),
        "b": float(clf.b),
        "center": clf.center.tolist(),
        "hyperparams": {"lambda1": hp.lambda1, "lambda2": hp.lambda2, "lambda3": hp.lambda3,
                        "bias_sigma": hp.bias_sigma},
        "sampler": cfg.to_dict() if args.method in ("blasso", "eigennet") else None,
        "training_error": error_rate(clf.predict(data.features), data.labels),
    }
    Path(args.out).write_text(json.dumps(model, indent=2))
    if args.chain_out and "chain" in extra:
        dump_chain(extra["chain"], args.chain_out)
    print(f"wrote {args.out}; training error {model['training_error']:.4f}")


def cmd_predict(args):
    model = json.loads(Path(args.model).read_text())
    try:
        clf = FittedClassifier(np.asarray(model["w"], float), float(model["b"]), np.asarray(model["center"], float))
    except KeyError as exc:
        raise ConfigError(f"model file lacks field {exc}") from None
    data = _load(args)
    if data.p != clf.w.shape[0]:
        raise ConfigError(f"model expects {clf.w.shape[0]} features, data has {data.p}")
    pred = clf.predict(data.features)
    if args.out:
        np.savetxt(args.out, pred, fmt="%d")
    print(f"error_rate {error_rate(pred, data.labels):.6f}")


def cmd_cv(args):
    data = _load(args)
    grid = default_grid(args.method, _values(args.grid), args.bias_sigma)
    best, scores = cross_validate(data, args.method, grid, args.folds, seed=args.seed,
                                  cfg=_sampler(args), return_scores=True)
    rows = [{"lambda1": h.lambda1, "lambda2": h.lambda2, "lambda3": h.lambda3, "cv_error": e}
            for h, e in zip(grid, scores)]
    result = {"method": args.method,
              "best": {"lambda1": best.lambda1, "lambda2": best.lambda2, "lambda3": best.lambda3},
              "grid": rows}
    print(json.dumps(result, indent=2))


def cmd_experiment(args):
    overrides = {"paper_scale": args.paper_scale}
    if args.iters is not None:
        overrides["iters"] = args.iters
    if args.burn_in is not None:
        overrides["burn_in"] = args.burn_in
    if args.cv_iters is not None:
        overrides["cv_iters"] = args.cv_iters
    if args.seeds is not None:
        overrides["seeds"] = _ints(args.seeds)
    elif args.n_seeds is not None:
        overrides["seeds"] = list(range(args.seed, args.seed + args.n_seeds))
    if args.n_grid is not None:
        overrides["n_grid"] = _ints(args.n_grid)
    if args.methods is not None:
        overrides["methods"] = [m.strip() for m in args.methods.split(",")]
    if args.n_test is not None:
        overrides["n_test"] = args.n_test
    if args.suite == "csv":
        if not args.data:
            raise ConfigError("the csv suite needs --data")
        label = args.label_column
        try:
            label = int(label)
        except ValueError:
            pass
        overrides.update(path=args.data, label_column=label, dataset_id=Path(args.data).stem)
    if args.n_train is not None:
        overrides["n_train"] = args.n_train
    reports = run_experiment(args.suite, overrides, out_dir=args.out_dir, fmt=args.format)
    for r in sorted(reports, key=lambda r: (r.method, r.n_train)):
        print(f"{r.method:9s} {r.dataset_id:28s} n={r.n_train:<4d} error {r.mean_error:.4f} +/- {r.std_error:.4f}")


def cmd_report(args):
    reports = load_reports(args.input)
    if args.out:
        emit_report(reports, args.format, args.out)
        print(f"wrote {args.out}")
        return
    for r in sorted(reports, key=lambda r: (r.method, r.n_train, r.dataset_id)):
        print(f"{r.method:9s} {r.dataset_id:28s} n={r.n_train:<4d} error {r.mean_error:.4f} +/- {r.std_error:.4f}")


def _add_sampler_flags(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iters", type=int, help="total MCMC iterations (burn-in defaults to half)")
    p.add_argument("--burn-in", type=int, dest="burn_in")
    p.add_argument("--thin", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--paper-scale", action="store_true", dest="paper_scale",
                   help="300k iterations with 150k burn-in")


def _add_hyper_flags(p):
    p.add_argument("--lambda1", type=float, default=1.0)
    p.add_argument("--lambda2", type=float, default=1.0)
    p.add_argument("--lambda3", type=float, default=1.0)
    p.add_argument("--bias-sigma", type=float, default=10.0, dest="bias_sigma")


def _add_data_flags(p):
    p.add_argument("--data", required=True, help="CSV file with a label column")
    p.add_argument("--label-column", default="-1", dest="label_column",
                   help="label column index or header name (default: last)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eigennet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic train/test pair")
    p.add_argument("--kind", choices=("correlated", "independent"), default="correlated")
    p.add_argument("--weights", choices=("fixed", "random"), default="fixed")
    p.add_argument("--p", type=int, default=40)
    p.add_argument("--n-train", type=int, default=80, dest="n_train")
    p.add_argument("--n-test", type=int, default=2000, dest="n_test")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".", dest="out_dir")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="fit one method at fixed hyperparameters")
    _add_data_flags(p)
    p.add_argument("--method", choices=METHODS, default="eigennet")
    _add_hyper_flags(p)
    _add_sampler_flags(p)
    p.add_argument("--out", default="model.json")
    p.add_argument("--chain-out", dest="chain_out", help="write the retained MCMC states here")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="apply a fitted model to a CSV file")
    _add_data_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", help="write one predicted label per line")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("cv", help="cross-validate a method over the hyperparameter grid")
    _add_data_flags(p)
    p.add_argument("--method", choices=METHODS, default="eigennet")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--grid", default=",".join(str(v) for v in DEFAULT_GRID_VALUES),
                   help="comma-separated values for each penalty weight")
    p.add_argument("--bias-sigma", type=float, default=10.0, dest="bias_sigma")
    _add_sampler_flags(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("experiment", help="run an experiment suite")
    p.add_argument("suite", choices=SUITES)
    p.add_argument("--seed", type=int, default=0, help="first seed when --n-seeds is given")
    p.add_argument("--n-seeds", type=int, dest="n_seeds")
    p.add_argument("--seeds", help="comma-separated seeds (default 0..9)")
    p.add_argument("--n-grid", dest="n_grid", help="comma-separated training sizes for the sweeps")
    p.add_argument("--n-train", type=int, dest="n_train")
    p.add_argument("--n-test", type=int, dest="n_test")
    p.add_argument("--methods", help=f"comma-separated subset of {','.join(METHODS)}")
    p.add_argument("--iters", type=int)
    p.add_argument("--burn-in", type=int, dest="burn_in")
    p.add_argument("--cv-iters", type=int, dest="cv_iters", help="chain length for cross-validation fits")
    p.add_argument("--paper-scale", action="store_true", dest="paper_scale")
    p.add_argument("--data", help="CSV input for the csv suite")
    p.add_argument("--label-column", default="-1", dest="label_column")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("--out-dir", default="results", dest="out_dir")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="print or convert saved JSON reports")
    p.add_argument("input", help="JSON report file written by 'experiment'")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (EigenNetError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"eigennet: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
