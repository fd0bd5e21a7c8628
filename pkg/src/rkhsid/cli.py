"""Command-line entry point.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ._errors import ConfigError
from .bench import BenchmarkConfig, emit_report, run_benchmark
from .hyper import FAMILIES, tune_ml
from .kernels import ir_kernel_from_dict, kernel_from_dict
from .mercer import ConsistencyConfig, consistency_experiment, truncated_ss_kernel
from .rn import RNModel, fit_rn, predict
from .signals import (
    Signal,
    fit_metric,
    random_linear_system,
    read_dataset,
    simulate_s1,
    simulate_s2,
    write_dataset,
    write_signal_csv,
)
from .stability import certify

log = logging.getLogger("rkhsid")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _out(args, name):
    p = Path(name)
    if not p.is_absolute():
        p = Path(args.out_dir) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def _dump(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
    log.info("wrote %s", path)


def _kernel_arg(spec):
    """Kernel from a JSON file path or an inline JSON object."""
    d = json.loads(spec) if spec.lstrip().startswith("{") else _load_json(spec)
    try:
        return kernel_from_dict(d)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad kernel description: {exc}") from None


# Subcommands --------------------------------------------------------------------
def cmd_simulate(args):
    rng = np.random.default_rng(args.seed)  # None draws fresh entropy
    u = Signal(rng.normal(0.0, np.sqrt(args.input_variance), size=args.n))
    if args.scenario == "S2":
        sys_ = random_linear_system(rng_seed=rng)
        y = simulate_s2(u, sys_, args.noise_variance, rng)
        theta_path = _out(args, "theta.csv")
        with open(theta_path, "w") as fh:
            fh.write("lag,value\n")
            for k, v in enumerate(sys_.impulse_response):
                fh.write(f"{k},{v!r}\n")
    else:
        y = simulate_s1(u, args.noise_variance, rng)
    u_path, y_path = _out(args, "u.csv"), _out(args, "y.csv")
    write_signal_csv(u, u_path)
    memory, horizon = (args.memory, None) if args.horizon is None else (None, args.horizon)
    write_dataset(y_path, y, u_path, memory=memory, horizon=horizon)
    print(json.dumps({"input": str(u_path), "output": str(y_path), "samples": len(y)}))


def cmd_fit(args):
    data, _ = read_dataset(args.data)
    model = fit_rn(_kernel_arg(args.kernel), data, args.gamma, check_psd=not args.no_psd_check)
    path = _out(args, args.out)
    _dump(model.to_dict(), path)
    print(json.dumps({"model": str(path), "n": model.n, "residual": model.residual}))


def cmd_predict(args):
    model = RNModel.from_dict(_load_json(args.model))
    data, _ = read_dataset(args.data)
    y_hat = predict(model, data)
    path = _out(args, args.out)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "y_hat"])
        for t, v in zip(data.timestamps, y_hat):
            w.writerow([int(t), repr(float(v))])
    summary = {"predictions": str(path), "n": int(y_hat.size)}
    if np.all(np.isfinite(data.outputs)) and data.outputs.size >= 2:
        summary["fit"] = fit_metric(data.outputs, y_hat)
    print(json.dumps(summary))


def cmd_tune(args):
    data, _ = read_dataset(args.data)
    seed = 0 if args.seed is None else args.seed
    res = tune_ml(args.kernel_family, data, starts=args.starts, rng_seed=seed, maxiter=args.maxiter)
    _dump(res.to_dict(), _out(args, args.out))
    if args.model_out:
        _dump(res.fit(data).to_dict(), _out(args, args.model_out))
    print(json.dumps({"best": res.best.to_dict(), "nll": res.nll_value, "at_boundary": res.at_boundary}))


def cmd_stability(args):
    d = json.loads(args.kernel) if args.kernel.lstrip().startswith("{") else _load_json(args.kernel)
    try:
        kernel = kernel_from_dict(d)
    except (KeyError, ValueError):
        try:
            kernel = ir_kernel_from_dict(d)
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"bad kernel description: {exc}") from None
    verdict = certify(kernel).to_dict()
    _dump(verdict, _out(args, args.out))
    print(json.dumps({"verdict": verdict["verdict"], "rule": verdict["rule"]}))


def cmd_mercer(args):
    g = np.linspace(0.0, args.tmax, args.grid)
    T, S = np.meshgrid(g, g, indexing="ij")
    approx = truncated_ss_kernel(args.beta, args.L, T, S)
    exact = np.exp(-args.beta * np.maximum(T, S))
    err = np.abs(approx - exact)
    path = _out(args, args.out)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "s", "truncated", "exact", "abs_error"])
        for row in zip(T.ravel(), S.ravel(), approx.ravel(), exact.ravel(), err.ravel()):
            w.writerow([repr(float(x)) for x in row])
    print(json.dumps({"beta": args.beta, "L": args.L, "grid": args.grid, "max_abs_error": float(err.max())}))


def cmd_consistency(args):
    d = _load_json(args.config) if args.config else {}
    if "seeds" not in d and args.seed is not None:
        d["seeds"] = list(range(args.seed, args.seed + 20))
    cfg = ConsistencyConfig.from_dict(d)
    curve = consistency_experiment(cfg)
    path = _out(args, args.out)
    with open(path, "w") as fh:
        fh.write("N,seed,error\n")
        for n, s, e in curve.rows():
            fh.write(f"{n},{s},{e!r}\n")
    summary = {"config": cfg.to_dict(), **curve.summary()}
    _dump(summary, path.with_suffix(".json"))
    print(json.dumps({k: summary[k] for k in ("N_grid", "median_error", "monotone_fraction")}))


def cmd_benchmark(args):
    d = _load_json(args.config) if args.config else {}
    for key in ("scenario", "runs"):
        if getattr(args, key) is not None:
            d[key] = getattr(args, key)
    if args.seed is not None:
        d["master_seed"] = args.seed
    if args.workers is not None:
        d["workers"] = args.workers
    cfg = BenchmarkConfig.full_scale(**d) if args.full_scale else BenchmarkConfig.from_dict(d)
    report = run_benchmark(cfg)
    stem = f"benchmark_{cfg.scenario}"
    for fmt in ("json", "csv", "svg"):
        emit_report(report, fmt, _out(args, f"{stem}.{fmt}"))
    print(json.dumps({"summary": report.summary, "failures": len(report.failures), "labels": report.labels}))


# Parser -------------------------------------------------------------------------
def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed")
    common.add_argument("--workers", type=int, default=argparse.SUPPRESS, help="parallel workers")
    common.add_argument("--out-dir", default=argparse.SUPPRESS, help="directory for outputs")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="rkhsid", description="Kernel-based identification of dynamic systems")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out-dir", default=".")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="simulate a benchmark system")
    s.add_argument("--scenario", choices=["S1", "S2"], default="S1")
    s.add_argument("--n", type=int, default=1000, help="input length")
    s.add_argument("--input-variance", type=float, default=4.0)
    s.add_argument("--noise-variance", type=float, default=4.0)
    s.add_argument("--memory", type=int, default=7, help="regressor length recorded in the sidecar")
    s.add_argument("--horizon", type=int, help="use infinite-memory regressors truncated here instead")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("fit", parents=[common], help="fit a regularization network")
    s.add_argument("--data", required=True, help="output CSV with JSON sidecar")
    s.add_argument("--kernel", required=True, help="kernel JSON file or inline JSON")
    s.add_argument("--gamma", type=float, required=True)
    s.add_argument("--no-psd-check", action="store_true")
    s.add_argument("--out", default="model.json")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("predict", parents=[common], help="predict with a fitted model")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", default="predictions.csv")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("tune", parents=[common], help="marginal-likelihood tuning, then fit")
    s.add_argument("--data", required=True)
    s.add_argument("--kernel-family", "--family", choices=sorted(FAMILIES), default="nss")
    s.add_argument("--starts", type=int, default=8)
    s.add_argument("--maxiter", type=int, default=400)
    s.add_argument("--out", default="hyper.json", help="tuning result")
    s.add_argument("--model-out", help="also fit and store the tuned model here")
    s.set_defaults(func=cmd_tune)

    s = sub.add_parser("stability-check", parents=[common], help="certify kernel stability")
    s.add_argument("--kernel", required=True)
    s.add_argument("--out", default="stability.json")
    s.set_defaults(func=cmd_stability)

    s = sub.add_parser("mercer", parents=[common], help="check the stable-spline eigenexpansion")
    s.add_argument("--beta", type=float, default=1.0)
    s.add_argument("--L", type=int, default=2000)
    s.add_argument("--grid", type=int, default=100)
    s.add_argument("--tmax", type=float, default=5.0)
    s.add_argument("--out", default="check.csv")
    s.set_defaults(func=cmd_mercer)

    s = sub.add_parser("consistency", parents=[common], help="run the consistency experiment")
    s.add_argument("--config")
    s.add_argument("--out", default="curve.csv")
    s.set_defaults(func=cmd_consistency)

    s = sub.add_parser("benchmark", parents=[common], help="run the Monte Carlo benchmark")
    s.add_argument("--config")
    s.add_argument("--scenario", choices=["S1", "S2"])
    s.add_argument("--runs", type=int)
    s.add_argument("--full-scale", action="store_true")
    s.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
