"""Test functions, accuracy and interval metrics, and the benchmark runner."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
import logging
import math
import os
import time

import numpy as np

from .cgp import cgp_predict
from .data import Dataset
from .design import bundled_design, maximin_lhd, random_lhd
from .errors import CompGPError, InvalidArgumentError
from .estimate import fit_cgp
from .kernels import corr_matrix, safe_cholesky
from .kriging import fit_nugget, fit_ok, predict
from .prediction import z_value

logger = logging.getLogger(__name__)

THREADS_ENV = "COMPGP_THREADS"


@dataclass(frozen=True)
class TestFunction:
    name: str
    lower: np.ndarray
    upper: np.ndarray
    evaluator: object

    __test__ = False  # not a pytest class

    @property
    def p(self):
        return len(self.lower)

    def __call__(self, Z):
        Z = np.asarray(Z, dtype=float)
        if Z.ndim == 1:
            Z = Z[None, :] if self.p > 1 else Z[:, None]
        return self.evaluator(Z)

    def from_unit(self, X):
        return self.lower + np.asarray(X, dtype=float) * (self.upper - self.lower)

    def on_unit(self, X):
        return self(self.from_unit(X))


def _xiong(Z):
    x = Z[:, 0]
    return np.sin(30 * (x - 0.9) ** 4) * np.cos(2 * (x - 0.9)) + (x - 0.9) / 2


def _gramacy(Z):
    x = Z[:, 0]
    return np.sin(10 * np.pi * x) / (2 * x) + (x - 1) ** 4


def _damped(Z):
    x = Z[:, 0]
    return np.exp(-2 * x) * np.sin(4 * np.pi * x**2)


def _recip(Z):
    return np.sin(1.0 / (Z[:, 0] * Z[:, 1]))


def _michalewicz(Z, m=10):
    i = np.arange(1, Z.shape[1] + 1)
    return -np.sum(np.sin(Z) * np.sin(i * Z**2 / np.pi) ** (2 * m), axis=1)


FUNCTIONS = {
    "xiong1d": ((0.0,), (1.0,), _xiong),
    "gramacy1d": ((0.5,), (2.5,), _gramacy),
    "damped1d": ((0.0,), (1.0,), _damped),
    "recip2d": ((0.3, 0.3), (1.0, 1.0), _recip),
    "michalewicz10": ((0.0,) * 10, (math.pi,) * 10, _michalewicz),
}


def test_function(name) -> TestFunction:
    try:
        lo, hi, fn = FUNCTIONS[name]
    except KeyError:
        raise InvalidArgumentError(f"unknown test function {name!r}; have {sorted(FUNCTIONS)}") from None
    return TestFunction(name, np.array(lo, dtype=float), np.array(hi, dtype=float), fn)


test_function.__test__ = False


def rmspe(predicted, truth) -> float:
    predicted = np.asarray(predicted, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if predicted.shape != truth.shape:
        raise InvalidArgumentError("prediction and truth must have the same shape")
    return float(np.sqrt(np.mean((predicted - truth) ** 2)))


def interval_score(lower, upper, x, alpha):
    """Interval score of central (1 - alpha) intervals, elementwise.

    ``(u - l) + 2/alpha (l - x) 1{x < l} + 2/alpha (x - u) 1{x > u}``;
    average it over test points to compare methods.
    """
    if not 0.0 < alpha < 1.0:
        raise InvalidArgumentError(f"alpha must be in (0, 1), got {alpha}")
    lower, upper, x = (np.asarray(a, dtype=float) for a in (lower, upper, x))
    if np.any(lower > upper):
        raise InvalidArgumentError("interval lower bound exceeds upper bound")
    score = (upper - lower) + (2.0 / alpha) * (lower - x) * (x < lower) + (2.0 / alpha) * (x - upper) * (x > upper)
    return score if score.ndim else float(score)


def coverage(lower, upper, x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.mean((x >= lower) & (x <= upper)))


def simulate_gp_path(design, theta, mu=0.0, sigma2=1.0, seed=0):
    """One draw of ``mu 1 + sigma Chol(R) z`` at the design points.

    Returns ``(y, jitter)``; the jitter is whatever the factorization of
    ``R`` needed.
    """
    X = design.points if hasattr(design, "points") else np.asarray(design, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    R = corr_matrix(X, theta)
    fac = safe_cholesky(R)
    z = np.random.default_rng(seed).standard_normal(X.shape[0])
    return mu + math.sqrt(sigma2) * (fac.L @ z), fac.jitter


MODELS = ("ok", "nugget", "cgp")


@dataclass
class BenchSpec:
    function: str
    design: str = "maximin-lhd"
    n: int = 24
    models: tuple = ("ok", "cgp")
    replications: int = 10
    n_test: int = 5000
    seed: int = 0
    level: float = 0.95
    maximin_iters: int = 10_000
    fit_options: dict = field(default_factory=dict)


@dataclass
class BenchRow:
    replication: int
    model: str
    rmspe: float
    interval_score: float
    coverage: float
    fit_seconds: float
    design_seed: int
    n: int
    n_test: int
    lam: float = float("nan")
    error: str = ""


@dataclass
class BenchResult:
    spec: BenchSpec
    rows: list

    def by_model(self, model, key="rmspe"):
        return np.array([getattr(r, key) for r in self.rows if r.model == model])

    def summary(self):
        out = {}
        for m in self.spec.models:
            vals = self.by_model(m)
            ok = vals[np.isfinite(vals)]
            out[m] = {
                "median_rmspe": float(np.median(ok)) if ok.size else float("nan"),
                "mean_rmspe": float(np.mean(ok)) if ok.size else float("nan"),
                "mean_interval_score": float(np.nanmean(self.by_model(m, "interval_score"))) if ok.size else float("nan"),
                "mean_coverage": float(np.nanmean(self.by_model(m, "coverage"))) if ok.size else float("nan"),
                "failures": int(np.sum(~np.isfinite(vals))),
            }
        return out


def make_design(kind, n, p, seed, maximin_iters=10_000):
    if kind == "maximin-lhd":
        return maximin_lhd(n, p, seed, maximin_iters)
    if kind == "random-lhd":
        return random_lhd(n, p, seed)
    if kind.startswith("bundled:"):
        return bundled_design(kind.split(":", 1)[1])
    raise InvalidArgumentError(f"unknown design kind {kind!r}")


def fit_model(kind, data, seed=0, **options):
    """Fit one of the benchmark models; returns ``(predict_fn, lam)``."""
    if kind == "ok":
        model = fit_ok(data, seed=seed)
        return (lambda X: predict(model, X)), 0.0
    if kind == "nugget":
        model = fit_nugget(data, seed=seed)
        return (lambda X: predict(model, X)), 0.0
    if kind == "cgp":
        model, _ = fit_cgp(data, seed=seed, **options)
        return (lambda X: cgp_predict(model, X)), model.params.lam
    raise InvalidArgumentError(f"unknown model {kind!r}; have {MODELS}")


def score_model(pred, truth, level):
    z = z_value(level)
    lo, hi = pred.mean - z * pred.sd, pred.mean + z * pred.sd
    alpha = 1.0 - level
    return rmspe(pred.mean, truth), float(np.mean(interval_score(lo, hi, truth, alpha))), coverage(lo, hi, truth)


def run_replication(spec: BenchSpec, rep: int):
    fn = test_function(spec.function)
    design_seed = spec.seed * 1_000_003 + rep
    design = make_design(spec.design, spec.n, fn.p, design_seed, spec.maximin_iters)
    data = Dataset.from_unit(design.points, fn.on_unit(design.points))
    test_rng = np.random.default_rng([spec.seed, rep, 7])
    Xt = test_rng.random((spec.n_test, fn.p))
    truth = fn.on_unit(Xt)
    rows = []
    for model in spec.models:
        t0 = time.perf_counter()
        try:
            predictor, lam = fit_model(model, data, seed=design_seed, **spec.fit_options)
            pred = predictor(Xt)
            err, score, cov = score_model(pred, truth, spec.level)
            msg = ""
        except CompGPError as exc:
            logger.warning("replication %d, model %s failed: %s", rep, model, exc)
            err = score = cov = lam = float("nan")
            msg = f"{type(exc).__name__}: {exc}"
        rows.append(BenchRow(rep, model, err, score, cov, time.perf_counter() - t0, design_seed, design.n,
                             spec.n_test, lam, msg))
    return rows


def _threads(threads):
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    return max(1, threads)


def run_benchmark(spec: BenchSpec, threads=None) -> BenchResult:
    """Run every replication; rows are ordered by replication then model."""
    threads = _threads(threads)
    reps = range(spec.replications)
    if threads == 1 or spec.replications == 1:
        chunks = [run_replication(spec, r) for r in reps]
    else:
        with ProcessPoolExecutor(threads) as pool:
            chunks = list(pool.map(run_replication, [spec] * spec.replications, reps))
    return BenchResult(spec, [row for chunk in chunks for row in chunk])


def degeneration_study(replications=20, n=24, p=2, seed=0, theta_range=(1.0, 5.0), maximin_iters=10_000,
                       threads=None, **fit_options):
    """Fit the composite model to stationary GP sample paths.

    Returns a list of dicts with the true scales and the fitted lambda.
    """
    threads = _threads(threads)
    args = [(r, n, p, seed, theta_range, maximin_iters, fit_options) for r in range(replications)]
    if threads == 1:
        return [_degeneration_one(*a) for a in args]
    with ProcessPoolExecutor(threads) as pool:
        return list(pool.map(_degeneration_one, *zip(*args)))


def _degeneration_one(rep, n, p, seed, theta_range, maximin_iters, fit_options):
    rng = np.random.default_rng([seed, rep, 11])
    theta = rng.uniform(*theta_range, size=p)
    design = maximin_lhd(n, p, seed * 1_000_003 + rep, maximin_iters)
    y, jitter = simulate_gp_path(design, theta, 0.0, 1.0, seed=[seed, rep, 13])
    data = Dataset.from_unit(design.points, y)
    row = {"replication": rep, "theta_true": theta.tolist(), "path_jitter": jitter}
    try:
        model, report = fit_cgp(data, seed=seed * 1_000_003 + rep, **fit_options)
        row.update(lam=model.params.lam, theta=model.params.theta.tolist(), b=model.params.b,
                   objective=report.objective, error="")
    except CompGPError as exc:
        row.update(lam=float("nan"), theta=[], b=float("nan"), objective=float("nan"),
                   error=f"{type(exc).__name__}: {exc}")
    return row


def curve_data(fn: TestFunction, fitted, grid, level=0.95):
    """Columns x, truth, mean, lower, upper for 1-d plot files."""
    pred = fitted(grid)
    z = z_value(level)
    return {
        "x": fn.from_unit(grid)[:, 0],
        "truth": fn.on_unit(grid),
        "mean": pred.mean,
        "global": pred.glob,
        "lower": pred.mean - z * pred.sd,
        "upper": pred.mean + z * pred.sd,
    }


def one_dimensional_comparison(function, design_name, models=("ok", "cgp"), n_test=5000, seed=0, level=0.95,
                               grid_size=400):
    """Fit models to a bundled 1-d design and score them on uniform test points.

    Returns ``(scores, curves)``: per-model metric dicts and plot columns.
    """
    fn = test_function(function)
    design = bundled_design(design_name)
    data = Dataset.from_unit(design.points, fn.on_unit(design.points))
    Xt = np.random.default_rng([seed, 17]).random((n_test, 1))
    truth = fn.on_unit(Xt)
    grid = np.linspace(0.0, 1.0, grid_size)[:, None]
    scores, curves = {}, {}
    for m in models:
        predictor, lam = fit_model(m, data, seed=seed)
        err, score, cov = score_model(predictor(Xt), truth, level)
        scores[m] = {"rmspe": err, "interval_score": score, "coverage": cov, "lambda": lam}
        curves[m] = curve_data(fn, predictor, grid, level)
    return scores, curves


def rows_as_dicts(rows, timings=False):
    out = []
    for r in rows:
        d = asdict(r)
        if not timings:
            d.pop("fit_seconds")
        out.append(d)
    return out
