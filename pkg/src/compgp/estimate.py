"""Maximum-likelihood estimation for the composite model.

The mean and global variance are profiled out in closed form; the
remaining parameters are searched inside a box with a multi-start,
bound-projected Nelder-Mead. Every search runs in the unit cube and is
mapped to the parameter box by monotone warps, so every evaluated point
is feasible by construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
import time

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .cgp import CgpParams, VolatilityState, assemble_Q, build_cgp, fit_volatility
from .data import Dataset
from .errors import CompGPError, EstimationFailedError, InvalidArgumentError, SingularMatrixError
from .gls import closed_form_mu_tau2
from .kernels import JITTER_LADDER, design_stats, sq_diffs

__all__ = [
    "FitReport",
    "FitOptions",
    "ProfileObjective",
    "closed_form_mu_tau2",
    "profile_neg_loglik",
    "multistart_minimize",
    "fit_cgp",
]

logger = logging.getLogger(__name__)

PENALTY = 1e12
KAPPA_SPAN = 1000.0
THETA_DECADES = 8.0
LAMBDA_DECADES = 4.0
THETA_FLOOR = 1e-6
TIE_TOL = 1e-10


def log_warp(u, decades):
    """Map [0, 1] onto [0, 1] with exact endpoints and log spacing near 0."""
    lo = 10.0 ** (-decades)
    return (10.0 ** (decades * (np.asarray(u, dtype=float) - 1.0)) - lo) / (1.0 - lo)


def log_unwarp(t, decades):
    lo = 10.0 ** (-decades)
    t = np.asarray(t, dtype=float)
    return 1.0 + np.log10(t * (1.0 - lo) + lo) / decades


@dataclass
class OptimResult:
    x: np.ndarray
    fun: float
    nfev: int
    success: bool


@dataclass
class MultiStartResult:
    x: np.ndarray
    fun: float
    runs: list
    best_so_far: list
    nfev: int


def multistart_minimize(fun, dim, *, n_starts=None, seed=0, maxfev=None, xatol=1e-4, fatol=1e-7,
                        tie_key=None, step=0.15):
    """Minimize ``fun`` over the unit cube [0, 1]^dim.

    Starting points come from a scrambled Halton sequence; each start runs
    scipy's bounded Nelder-Mead, which clips trial points onto the box.
    Candidates whose objectives are within ``TIE_TOL`` of the best are
    ranked by ``tie_key(x)`` (smaller wins).
    """
    if n_starts is None:
        n_starts = max(10, 2 * dim)
    if maxfev is None:
        maxfev = 200 * dim
    starts = qmc.Halton(dim, scramble=True, seed=np.random.default_rng(seed)).random(n_starts)
    runs = []
    best_so_far = []
    nfev = 0
    for x0 in starts:
        simplex = [x0]
        for j in range(dim):
            v = x0.copy()
            v[j] = v[j] + step if v[j] + step <= 1.0 else v[j] - step
            simplex.append(v)
        res = minimize(fun, x0, method="Nelder-Mead", bounds=[(0.0, 1.0)] * dim,
                       options={"initial_simplex": np.array(simplex), "maxfev": maxfev,
                                "xatol": xatol, "fatol": fatol, "adaptive": dim > 4})
        x = np.clip(res.x, 0.0, 1.0)
        f = float(fun(x))
        runs.append(OptimResult(x, f, int(res.nfev) + 1, bool(res.success)))
        nfev += int(res.nfev) + 1
        best_so_far.append(min(best_so_far[-1], f) if best_so_far else f)
    best = _pick(runs, tie_key)
    return MultiStartResult(best.x, best.fun, runs, best_so_far, nfev)


def _pick(runs, tie_key):
    finite = [r for r in runs if np.isfinite(r.fun)]
    if not finite:
        return runs[0]
    fbest = min(r.fun for r in finite)
    near = [r for r in finite if r.fun <= fbest + TIE_TOL]
    if tie_key is None or len(near) == 1:
        return min(near, key=lambda r: r.fun)
    return min(near, key=lambda r: (tuple(tie_key(r.x)), r.fun))


@dataclass(frozen=True)
class CgpSpace:
    """Unit-cube coordinates for the composite-model parameters.

    Reduced mode: ``(lam, theta_1..theta_p, kappa, b)``; full mode:
    ``(lam, theta_1..theta_p, alpha_1..alpha_p, b)``.
    """

    p: int
    alpha_lower: float
    mode: str = "reduced"

    @property
    def dim(self):
        return self.p + 3 if self.mode == "reduced" else 2 * self.p + 2

    @property
    def kappa_max(self):
        return KAPPA_SPAN * self.alpha_lower

    def to_params(self, u) -> CgpParams:
        u = np.asarray(u, dtype=float)
        p, al = self.p, self.alpha_lower
        lam = float(log_warp(u[0], LAMBDA_DECADES))
        theta = al * log_warp(u[1:p + 1], THETA_DECADES)
        if theta.max() < THETA_FLOOR:
            theta[np.argmax(theta)] = min(THETA_FLOOR, al)
        b = float(u[-1])
        if self.mode == "reduced":
            kappa = float(al * KAPPA_SPAN ** u[p + 1])
            return CgpParams(lam, theta, theta + kappa, b, kappa=kappa)
        if self.mode == "full":
            # upper end matches the reduced space: theta + kappa <= al + kappa_max
            alpha = al * (1.0 + KAPPA_SPAN) ** u[p + 1:2 * p + 1]
            return CgpParams(lam, theta, alpha, b)
        raise InvalidArgumentError(f"unknown parameterization {self.mode!r}")

    def to_unit(self, params: CgpParams):
        al = self.alpha_lower
        parts = [np.atleast_1d(log_unwarp(params.lam, LAMBDA_DECADES)),
                 log_unwarp(params.theta / al, THETA_DECADES)]
        if self.mode == "reduced":
            kappa = params.kappa if params.kappa is not None else float(np.min(params.alpha - params.theta))
            parts.append(np.atleast_1d(math.log(kappa / al) / math.log(KAPPA_SPAN)))
        else:
            parts.append(np.log(params.alpha / al) / math.log(1.0 + KAPPA_SPAN))
        parts.append(np.atleast_1d(params.b))
        return np.clip(np.concatenate(parts), 0.0, 1.0)


@dataclass
class FitReport:
    best_params: CgpParams
    objective: float
    restarts: int
    converged: bool
    jitter_events: int
    failures: int = 0
    wall_time: float = 0.0
    nfev: int = 0
    alpha_lower: float = float("nan")
    mode: str = "reduced"
    restart_objectives: list = field(default_factory=list)
    best_so_far: list = field(default_factory=list)

    def summary(self):
        p = self.best_params
        out = {
            "objective": self.objective,
            "lambda": p.lam,
            "theta": p.theta.tolist(),
            "alpha": p.alpha.tolist(),
            "b": p.b,
            "alpha_lower": self.alpha_lower,
            "mode": self.mode,
            "restarts": self.restarts,
            "converged": self.converged,
            "jitter_events": self.jitter_events,
            "failures": self.failures,
            "evaluations": self.nfev,
        }
        if p.kappa is not None:
            out["kappa"] = p.kappa
        return out


class ProfileObjective:
    """Negative log profile likelihood with the volatility loop nested inside.

    Instances count evaluations, jitter events and factorization failures.
    """

    def __init__(self, dataset: Dataset, alpha_lower: float, mode="reduced", *,
                 inner_iters=4, inner_tol=1e-4, ladder=JITTER_LADDER):
        self.dataset = dataset
        self.alpha_lower = float(alpha_lower)
        self.space = CgpSpace(dataset.p, self.alpha_lower, mode)
        self.inner_iters = inner_iters
        self.inner_tol = inner_tol
        self.ladder = ladder
        self.D2 = sq_diffs(dataset.X, dataset.X)
        self.evaluations = 0
        self.jitter_events = 0
        self.failures = 0

    def volatility(self, params: CgpParams) -> VolatilityState:
        vol, _, events = fit_volatility(self.D2, self.dataset.y, params.lam, params.theta, params.alpha,
                                        params.b, iters=self.inner_iters, tol=self.inner_tol,
                                        ladder=self.ladder, X=self.dataset.X)
        self.jitter_events += events
        return vol

    def __call__(self, params: CgpParams) -> float:
        self.evaluations += 1
        y = self.dataset.y
        try:
            vol = self.volatility(params)
            _, fac = assemble_Q(self.dataset.X, params, vol.sigma_diag, ladder=self.ladder, D2=self.D2)
            self.jitter_events += fac.jitter > 0
            _, tau2, _ = closed_form_mu_tau2(y, fac)
        except (SingularMatrixError, EstimationFailedError, FloatingPointError):
            self.failures += 1
            return PENALTY
        if tau2 <= 0.0:
            self.failures += 1
            return PENALTY
        value = y.shape[0] * math.log(tau2) + fac.logdet()
        return value if math.isfinite(value) else PENALTY

    def at_unit(self, u):
        return self(self.space.to_params(u))


def profile_neg_loglik(dataset: Dataset, params: CgpParams, alpha_lower=None, **kw) -> float:
    """phi = n log(tau2_hat) + log det(Q), with Sigma from the inner loop."""
    if alpha_lower is None:
        alpha_lower = design_stats(dataset.X).alpha_lower
    return ProfileObjective(dataset, alpha_lower, **kw)(params)


@dataclass
class FitOptions:
    mode: str = "reduced"
    n_starts: int | None = None
    seed: int = 0
    maxfev: int | None = None
    xatol: float = 1e-4
    fatol: float = 1e-7
    inner_iters: int = 4
    inner_tol: float = 1e-4
    ladder: tuple = JITTER_LADDER
    alpha_lower: float | None = None


def fit_cgp(dataset: Dataset, options: FitOptions | None = None, **kw):
    """Fit the composite model by maximum likelihood.

    Returns ``(FittedCgp, FitReport)``. Keyword arguments override fields of
    ``options``.
    """
    opts = options or FitOptions()
    if kw:
        opts = FitOptions(**{**opts.__dict__, **kw})
    t0 = time.perf_counter()
    dataset.check_distinct()
    if dataset.n < 3:
        logger.warning("fitting a composite model to %d points", dataset.n)
    alpha_lower = opts.alpha_lower or design_stats(dataset.X).alpha_lower
    obj = ProfileObjective(dataset, alpha_lower, opts.mode, inner_iters=opts.inner_iters,
                           inner_tol=opts.inner_tol, ladder=opts.ladder)
    space = obj.space

    if np.ptp(dataset.y) == 0.0:
        logger.warning("degenerate constant response")
        params = space.to_params(np.full(space.dim, 0.5))
        params = CgpParams(0.0, params.theta, params.alpha, params.b, kappa=params.kappa)
        vol = VolatilityState.constant(dataset.n, params.theta, params.b)
        model = build_cgp(dataset, params, vol, alpha_lower=alpha_lower, ladder=opts.ladder,
                          degenerate=True, info={"constant_response": True})
        report = FitReport(model.params, float("-inf"), 0, True, 0, 0, time.perf_counter() - t0, 0,
                           alpha_lower, opts.mode)
        return model, report

    def tie_key(u):
        prm = space.to_params(u)
        return (prm.lam, prm.kappa if prm.kappa is not None else float(np.mean(prm.alpha)))

    res = multistart_minimize(obj.at_unit, space.dim, n_starts=opts.n_starts, seed=opts.seed,
                              maxfev=opts.maxfev, xatol=opts.xatol, fatol=opts.fatol, tie_key=tie_key)
    best = space.to_params(res.x)
    report = FitReport(best, res.fun, len(res.runs), any(r.success for r in res.runs), obj.jitter_events,
                       obj.failures, 0.0, res.nfev, alpha_lower, opts.mode,
                       [r.fun for r in res.runs], res.best_so_far)
    if not np.isfinite(res.fun) or res.fun >= PENALTY:
        report.wall_time = time.perf_counter() - t0
        raise EstimationFailedError("every restart failed to evaluate the likelihood", report)
    try:
        model = finalize(dataset, best, alpha_lower, obj)
    except CompGPError as exc:
        report.wall_time = time.perf_counter() - t0
        raise EstimationFailedError(f"could not assemble the fitted model: {exc}", report) from exc
    report.best_params = model.params
    report.wall_time = time.perf_counter() - t0
    return model, report


def finalize(dataset: Dataset, params: CgpParams, alpha_lower: float, obj: ProfileObjective | None = None):
    """Assemble a :class:`FittedCgp` for fixed parameters.

    ``lam == 0`` yields ordinary kriging with ``Sigma = I`` and the
    degeneracy flag set.
    """
    if obj is None:
        obj = ProfileObjective(dataset, alpha_lower)
    if params.lam == 0.0:
        vol = VolatilityState.constant(dataset.n, params.theta, params.b)
        return build_cgp(dataset, params, vol, alpha_lower=alpha_lower, ladder=obj.ladder, degenerate=True)
    vol = obj.volatility(params)
    return build_cgp(dataset, params, vol, alpha_lower=alpha_lower, ladder=obj.ladder,
                     degenerate=vol.degenerate)
