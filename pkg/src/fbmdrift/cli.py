"""Command line entry point: `fbmdrift <command> ...`."""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

import numpy as np

from .estimator import MODES, estimate
from .experiments import EXPERIMENTS, ConfigError, ExperimentConfig, default_config, report, run_experiment
from .fbm import EmbeddingError, TimeGrid, sample_fbm
from .malliavin import G_FUNCTIONS, RULES, derived_process, propagate_derivative, skorohod_integral
from .sde import MODELS, IntegrationError, get_model, integrate_euler


def _floats(text: str) -> list:
    return [float(x) for x in text.split(",") if x.strip()]


def _write_table(out, header, rows):
    fh = open(out, "w", newline="") if out and out != "-" else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(["%.17g" % v for v in r])
    finally:
        if fh is not sys.stdout:
            fh.close()


def _grid_args(p):
    p.add_argument("--h", type=float, required=True, help="Hurst parameter in (0, 1)")
    p.add_argument("--n", type=int, required=True, help="number of grid steps")
    p.add_argument("--dt", type=float, required=True, help="grid spacing")
    p.add_argument("--seed", type=int, default=0)


def _model_args(p):
    p.add_argument("--model", choices=sorted(MODELS), default="linear")
    p.add_argument("--theta", type=_floats, default=None, help="comma-separated parameter vector")
    p.add_argument("--sigma", type=float, default=1.0, help="diffusion scale")
    p.add_argument("--x0", type=_floats, default=[0.0], help="initial state (comma-separated)")


def _model(args):
    theta = args.theta if args.theta is None or len(args.theta) > 1 else args.theta[0]
    return get_model(args.model, theta=theta, sigma=args.sigma)


def _noise_and_path(args, model, path_index=0):
    grid = TimeGrid(args.n, args.dt)
    noise = sample_fbm(grid, args.h, model.d, args.seed, path_index=path_index)
    x0 = np.broadcast_to(np.asarray(args.x0, dtype=float), (model.m,))
    return noise, integrate_euler(model, noise, x0)


def cmd_sample_fbm(args):
    grid = TimeGrid(args.n, args.dt)
    path = sample_fbm(grid, args.h, args.d, args.seed, method=args.method, path_index=args.path_index,
                      allow_fallback=args.method == "auto")
    header = ["t"] + [f"B{j + 1}" for j in range(args.d)]
    _write_table(args.out, header, np.column_stack([grid.times, path.values]))
    return 0


def cmd_integrate(args):
    model = _model(args)
    _, path = _noise_and_path(args, model)
    header = ["t"] + [f"X{j + 1}" for j in range(model.m)]
    _write_table(args.out, header, np.column_stack([path.grid.times, path.values]))
    return 0


def _process_fns(model, name):
    if name == "f":
        return (lambda x: model.g(x)[..., 0, :]), (lambda x: model.grad_g(x)[..., 0, :, :])
    if model.m != 1 or model.d != 1:
        raise ValueError(f"g={name!r} is scalar; use --g f for multidimensional models")
    return G_FUNCTIONS[name]


def cmd_skorohod(args):
    model = _model(args)
    noise, path = _noise_and_path(args, model)
    mg = propagate_derivative(model, path, args.pivots)
    g, dg = _process_fns(model, args.g)
    proc = derived_process(mg, path, g, dg)
    window = tuple(_floats(args.window)) if args.window else None
    res = skorohod_integral(proc, noise, args.h, window=window, rule=args.rule, L1=model.L1)
    print(json.dumps({"value": res.value, "correction": res.correction, "pathwise_sum": res.pathwise_sum,
                      "metadata": res.metadata}))
    return 0


def cmd_estimate(args):
    model = _model(args)
    for r in range(args.reps):
        noise, path = _noise_and_path(args, model, path_index=r)
        res = estimate(model, path, noise, args.h, args.pivots, args.mode)
        d = res.to_dict()
        d["rep"] = r
        d["seed"] = args.seed
        print(json.dumps(d))
    return 0


def cmd_experiment(args):
    cfg = ExperimentConfig.from_file(args.config) if args.config else default_config(args.name)
    if cfg.experiment != args.name:
        raise ConfigError(f"config is for experiment {cfg.experiment!r}, not {args.name!r}")
    if args.workers is not None:
        cfg = cfg.replace(workers=args.workers)
    if args.out_dir is not None:
        cfg = cfg.replace(out_dir=args.out_dir)
    t0 = time.perf_counter()
    rows, data = run_experiment(cfg)
    out = report(cfg, rows, data, elapsed=time.perf_counter() - t0)
    for crit, v in sorted(out["verdicts"].items()):
        print(f"{crit}: {'PASS' if v['pass'] else 'FAIL'} ({v['checks']} checks)")
    print(json.dumps(out["paths"]))
    return 0 if out["all_pass"] else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fbmdrift", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample-fbm", help="sample one fBm path as CSV t,B1..Bd")
    _grid_args(p)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--method", choices=("circulant", "cholesky", "auto"), default="auto")
    p.add_argument("--path-index", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(fn=cmd_sample_fbm)

    p = sub.add_parser("integrate", help="Euler solution as CSV t,X1..Xm")
    _grid_args(p)
    _model_args(p)
    p.add_argument("--out", default="-")
    p.set_defaults(fn=cmd_integrate)

    p = sub.add_parser("skorohod", help="divergence of g(X) over a window, as one JSON line")
    _grid_args(p)
    _model_args(p)
    p.add_argument("--g", default="f", choices=["f"] + sorted(G_FUNCTIONS),
                   help="'f' uses the model's f_1^T sigma; other names are scalar functions")
    p.add_argument("--window", default=None, help="a,b in time units (default [0, T])")
    p.add_argument("--pivots", type=int, default=None)
    p.add_argument("--rule", choices=RULES, default="trapezoid")
    p.set_defaults(fn=cmd_skorohod)

    p = sub.add_parser("estimate", help="least-squares estimates as JSON lines")
    _grid_args(p)
    _model_args(p)
    p.add_argument("--mode", choices=MODES, default="both")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--pivots", type=int, default=None)
    p.set_defaults(fn=cmd_estimate)

    p = sub.add_parser("experiment", help="run a campaign and write CSV/JSON reports")
    p.add_argument("name", choices=EXPERIMENTS)
    p.add_argument("--config", default=None)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(fn=cmd_experiment)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, EmbeddingError, IntegrationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
