"""Command-line interface: ``compgp {fit,predict,bench,design}``.

Exit codes: 0 success, 2 bad input (flags, CSV, archive), 3 estimation
failed, 4 file-system error. Results go to stdout, diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import logging
import sys
from pathlib import Path

import numpy as np

from . import persistence as io_
from .bench import (
    BenchSpec,
    degeneration_study,
    one_dimensional_comparison,
    rows_as_dicts,
    run_benchmark,
    test_function,
)
from .cgp import FittedCgp, cgp_predict, with_noise
from .data import Dataset
from .design import BUNDLED, bundled_design, maximin_lhd, random_lhd
from .errors import CompGPError, DataParseError, EstimationFailedError
from .estimate import FitOptions, fit_cgp
from .kriging import fit_nugget, fit_ok, fit_uk, predict
from .prediction import z_value

EXIT_OK, EXIT_PARSE, EXIT_ESTIMATION, EXIT_IO = 0, 2, 3, 4

logger = logging.getLogger("compgp")

DEGENERATE_LAMBDA = 0.01


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARSE, f"{self.prog}: error: {message}\n")


# --- data loading -----------------------------------------------------------

def load_data(spec: str, header=True, response_column=-1) -> Dataset:
    """A CSV path, or ``bundled:NAME`` for a shipped design and test function."""
    if spec.startswith("bundled:"):
        name = spec.split(":", 1)[1]
        design = bundled_design(name)
        fn = test_function(name)
        return Dataset(design.points, fn.on_unit(design.points), fn.lower, fn.upper)
    return io_.read_dataset_csv(spec, header=header, response_column=response_column)


def parse_query(spec: str, dataset: Dataset):
    """Query rows on the raw scale: a CSV of inputs or ``grid:p:count``.

    A grid has ``count`` equispaced levels per input across the training
    range.
    """
    if spec.startswith("grid:"):
        try:
            _, p, count = spec.split(":")
            p, count = int(p), int(count)
        except ValueError:
            raise DataParseError(f"query {spec!r} is not of the form grid:p:count") from None
        if p != dataset.p or count < 1:
            raise DataParseError(f"grid needs p={dataset.p} and a positive count, got {spec!r}")
        axes = [np.linspace(lo, hi, count) for lo, hi in zip(dataset.lower, dataset.upper)]
        return np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, p)
    with open(spec, newline="", encoding="utf-8-sig") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if rows and list(map(str.strip, rows[0])) == list(dataset.names[:len(rows[0])]):
        rows = rows[1:]
    try:
        Z = np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise DataParseError(f"{spec}: {exc}") from None
    if Z.ndim != 2 or Z.shape[1] < dataset.p:
        raise DataParseError(f"{spec}: need {dataset.p} input columns")
    # a trailing response column, as in a training file, is ignored
    return Z[:, :dataset.p]


def model_predict(model, Xq):
    if isinstance(model, FittedCgp):
        return cgp_predict(model, Xq)
    return predict(model, Xq)


# --- fit --------------------------------------------------------------------

def _fit(args, data):
    seed = args.seed
    if args.model == "cgp":
        opts = FitOptions(mode=args.param_mode, n_starts=args.restarts, seed=seed)
        model, report = fit_cgp(data, opts)
        if args.error_variances:
            try:
                ev = np.loadtxt(args.error_variances, delimiter=",", ndmin=1)
            except ValueError as exc:
                raise DataParseError(f"{args.error_variances}: {exc}") from None
            model = with_noise(model, ev)
        summary = report.summary()
        summary["kind"] = "cgp-noisy" if model.noise is not None else "cgp"
        summary["mu_hat"] = model.mu_hat
        summary["tau2_hat"] = model.tau2_hat
        summary["degenerate"] = model.degenerate
        return model, summary
    if args.model == "ok":
        model = fit_ok(data, n_starts=args.restarts, seed=seed)
    elif args.model == "uk":
        model = fit_uk(data, args.basis or "constant", n_starts=args.restarts, seed=seed)
    else:
        model = fit_nugget(data, n_starts=args.restarts, seed=seed)
    summary = {
        "kind": model.kind,
        "objective": model.objective,
        "theta": model.theta.tolist(),
        "nugget": model.nugget,
        "basis": model.basis.names,
        "beta_hat": model.beta_hat.tolist(),
        "sigma2_hat": model.sigma2_hat,
        "alpha_lower": model.info.get("alpha_lower"),
        "condition": model.condition,
        "degenerate": model.degenerate,
    }
    return model, summary


def _table(summary):
    width = max(len(k) for k in summary)
    lines = []
    for k in sorted(summary):
        v = summary[k]
        if isinstance(v, float):
            v = f"{v:.6g}"
        elif isinstance(v, list) and v and isinstance(v[0], float):
            v = "[" + ", ".join(f"{x:.6g}" for x in v) + "]"
        lines.append(f"{k:<{width}}  {v}")
    return "\n".join(lines)


def cmd_fit(args):
    data = load_data(args.data, header=not args.no_header, response_column=args.response_column)
    model, summary = _fit(args, data)
    if args.out:
        io_.save_model(model, args.out, report=summary)
    print(_table(summary))
    print(io_.dumps(summary), end="")
    return EXIT_OK


# --- predict ----------------------------------------------------------------

def cmd_predict(args):
    model = io_.load_model(args.model_file)
    ds = model.dataset
    Z = parse_query(args.query, ds)
    pred = model_predict(model, ds.to_unit(Z))
    z = z_value(args.level)
    lower, upper = pred.mean - z * pred.sd, pred.mean + z * pred.sd
    header = list(ds.names) + ["mean", "global", "local", "sd", "lower", "upper", "v"]
    cols = np.column_stack([Z, pred.mean, pred.glob, pred.local, pred.sd, lower, upper, pred.v])
    rows = cols.tolist()
    if args.out:
        io_.write_table_csv(args.out, header, rows)
    else:
        io_.write_table_csv(sys.stdout, header, rows)
    return EXIT_OK


# --- bench ------------------------------------------------------------------

SUITE_DEFAULTS = {
    "table1": dict(function="recip2d", design="maximin-lhd", n=24, replications=10),
    "michalewicz": dict(function="michalewicz10", design="random-lhd", n=100, replications=10),
    "degeneration": dict(replications=20),
    "intervals": dict(replications=1),
    "nugget-compare": dict(replications=1),
}


def _bench_table(args, out: Path):
    d = SUITE_DEFAULTS[args.suite]
    spec = BenchSpec(d["function"], d["design"], d["n"], ("ok", "cgp"), args.replications or d["replications"],
                     args.n_test or 5000, args.seed)
    result = run_benchmark(spec, threads=args.threads)
    rows = rows_as_dicts(result.rows)
    io_.write_table_csv(out / "rows.csv", list(rows[0]), [list(r.values()) for r in rows])
    ok, cgp = result.by_model("ok"), result.by_model("cgp")
    io_.write_columns_csv(out / "plot_rmspe_scatter.csv",
                          {"replication": np.arange(len(ok)), "ok": ok, "cgp": cgp})
    summary = {"suite": args.suite, "function": spec.function, "design": spec.design, "n": spec.n,
               "replications": spec.replications, "n_test": spec.n_test, "seed": spec.seed,
               "models": result.summary()}
    med_ok, med_cgp = np.nanmedian(ok), np.nanmedian(cgp)
    summary["median_improvement"] = float(1.0 - med_cgp / med_ok)
    summary["median_paired_improvement"] = float(np.nanmedian(1.0 - cgp / ok))
    summary["cgp_median_below_ok"] = bool(med_cgp < med_ok)
    summary["cgp_not_worse_count"] = int(np.sum(cgp <= ok))
    return summary


def _bench_degeneration(args, out: Path):
    reps = args.replications or SUITE_DEFAULTS["degeneration"]["replications"]
    rows = degeneration_study(reps, seed=args.seed, threads=args.threads)
    header = ["replication", "theta_true_1", "theta_true_2", "lambda", "b", "objective", "error"]
    io_.write_table_csv(out / "rows.csv", header,
                        [[r["replication"], *r["theta_true"], r["lam"], r["b"], r["objective"], r["error"]]
                         for r in rows])
    lam = np.array([r["lam"] for r in rows])
    ok = np.isfinite(lam)
    return {"suite": "degeneration", "replications": reps, "seed": args.seed,
            "lambda_threshold": DEGENERATE_LAMBDA,
            "fraction_small_lambda": float(np.mean(lam[ok] <= DEGENERATE_LAMBDA)) if ok.any() else float("nan"),
            "count_zero_lambda": int(np.sum(lam[ok] == 0.0)),
            "failures": int(np.sum(~ok))}


def _bench_curves(args, out: Path, cases):
    summary = {"suite": args.suite, "seed": args.seed, "cases": {}}
    for function, models, n_test in cases:
        scores, curves = one_dimensional_comparison(function, function, models, n_test=n_test, seed=args.seed)
        for m, cols in curves.items():
            io_.write_columns_csv(out / f"plot_{function}_{m}.csv", cols)
        pts = bundled_design(function).points
        fn = test_function(function)
        io_.write_columns_csv(out / f"plot_{function}_design.csv",
                              {"x": fn.from_unit(pts)[:, 0], "y": fn.on_unit(pts)})
        summary["cases"][function] = {"n_test": n_test, "scores": scores}
    return summary


def cmd_bench(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.suite in ("table1", "michalewicz"):
        summary = _bench_table(args, out)
    elif args.suite == "degeneration":
        summary = _bench_degeneration(args, out)
    elif args.suite == "intervals":
        summary = _bench_curves(args, out, [("damped1d", ("ok", "cgp"), args.n_test or 3000)])
    else:
        summary = _bench_curves(args, out, [("gramacy1d", ("ok", "nugget", "cgp"), args.n_test or 5000),
                                            ("xiong1d", ("ok", "nugget", "cgp"), args.n_test or 5000)])
    io_.write_json(out / "summary.json", summary)
    print(io_.dumps(summary), end="")
    return EXIT_OK


# --- design -----------------------------------------------------------------

def cmd_design(args):
    if args.kind == "random-lhd":
        design = random_lhd(args.n, args.p, args.seed)
    elif args.kind == "maximin-lhd":
        design = maximin_lhd(args.n, args.p, args.seed, args.iters)
    else:
        design = bundled_design(args.kind.split(":", 1)[1])
    if args.out:
        io_.write_design_csv(design.points, args.out)
    else:
        io_.write_design_csv(design.points, sys.stdout)
    return EXIT_OK


# --- entry point ------------------------------------------------------------

def build_parser():
    parser = _Parser(prog="compgp", description="Composite Gaussian process emulators.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="fit a model and write an archive")
    f.add_argument("--data", required=True, help="CSV file (inputs then response) or bundled:NAME")
    f.add_argument("--model", choices=("ok", "uk", "nugget", "cgp"), default="cgp")
    f.add_argument("--basis", help="uk trend: constant, linear, quadratic or terms like 1,x1,x1^2")
    f.add_argument("--restarts", type=int, help="number of optimizer starts")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--param-mode", choices=("reduced", "full"), default="reduced")
    f.add_argument("--error-variances", help="cgp only: CSV column of known noise variances")
    f.add_argument("--response-column", default=-1,
                   type=lambda s: int(s) if s.lstrip("-").isdigit() else s)
    f.add_argument("--no-header", action="store_true", help="the CSV has no header row")
    f.add_argument("--out", help="archive path")
    f.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict with intervals from an archive")
    p.add_argument("--model-file", required=True)
    p.add_argument("--query", required=True, help="CSV of raw-scale inputs or grid:p:count")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_predict)

    b = sub.add_parser("bench", help="run a benchmark suite")
    b.add_argument("--suite", required=True, choices=tuple(SUITE_DEFAULTS))
    b.add_argument("--replications", type=int)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--n-test", type=int, help="number of uniform test points")
    b.add_argument("--threads", type=int, help="worker processes (default from COMPGP_THREADS)")
    b.add_argument("--out-dir", required=True)
    b.set_defaults(func=cmd_bench)

    d = sub.add_parser("design", help="generate a design on the unit cube")
    d.add_argument("--kind", default="maximin-lhd",
                   choices=("random-lhd", "maximin-lhd") + tuple(f"bundled:{k}" for k in BUNDLED))
    d.add_argument("--n", type=int, default=10)
    d.add_argument("--p", type=int, default=2)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--iters", type=int, default=10_000)
    d.add_argument("--out", help="output CSV (default stdout)")
    d.set_defaults(func=cmd_design)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logger.addHandler(handler)
    logger.setLevel(logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except EstimationFailedError as exc:
        print(f"error: estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except CompGPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    finally:
        logger.removeHandler(handler)


if __name__ == "__main__":
    sys.exit(main())
