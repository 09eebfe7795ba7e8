"""Stationary kriging baselines: ordinary, universal and nugget kriging.

All three share one implementation: a generalized-least-squares trend on
a basis ``F`` plus a Gaussian-correlated residual with correlation
``R + nugget * I``. Ordinary kriging is the constant basis with zero
nugget.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
import re
import time

import numpy as np

from .data import Dataset
from .errors import CompGPError, EstimationFailedError, InvalidArgumentError, SingularMatrixError
from .estimate import PENALTY, log_warp, multistart_minimize
from .gls import gls_coefficients
from .kernels import CONDITION_LIMIT, JITTER_LADDER, Factor, corr_from_sqdiff, cross_corr, design_stats, safe_cholesky, sq_diffs
from .prediction import Prediction, clamp_variance

logger = logging.getLogger(__name__)

OK_THETA_SPAN = 100.0
DECADES = 10.0

_TERM = re.compile(r"^x(\d+)(?:\^(\d+))?$")


class Basis:
    """Named trend functions ``f_0 = 1, f_1, ..., f_m``.

    Terms are monomials written like ``1``, ``x2``, ``x1^2`` or ``x1*x3``
    (1-based column indices on the unit-cube scale). Arbitrary callables
    can be passed as ``(name, fn)`` pairs, where ``fn`` maps an (m, p)
    array to an m-vector; such bases cannot be saved to an archive.
    """

    def __init__(self, terms=("1",)):
        self.terms = []
        for t in terms:
            if isinstance(t, tuple):
                self.terms.append(t)
            else:
                self.terms.append((str(t).strip(), self._monomial(str(t).strip())))
        if not self.terms or self.terms[0][0] != "1":
            self.terms.insert(0, ("1", self._monomial("1")))

    @classmethod
    def parse(cls, spec: str, p: int):
        spec = spec.strip().lower()
        if spec in ("", "constant", "1"):
            return cls(("1",))
        if spec == "linear":
            return cls(["1"] + [f"x{j + 1}" for j in range(p)])
        if spec == "quadratic":
            terms = ["1"] + [f"x{j + 1}" for j in range(p)]
            terms += [f"x{i + 1}*x{j + 1}" if i != j else f"x{i + 1}^2" for i in range(p) for j in range(i, p)]
            return cls(terms)
        return cls([t for t in spec.split(",") if t.strip()])

    @staticmethod
    def _monomial(name):
        if name == "1":
            return lambda X: np.ones(X.shape[0])
        powers = {}
        for factor in name.split("*"):
            m = _TERM.match(factor.strip())
            if not m:
                raise InvalidArgumentError(f"cannot parse basis term {name!r}")
            j = int(m.group(1)) - 1
            if j < 0:
                raise InvalidArgumentError(f"basis columns are 1-based, got {name!r}")
            powers[j] = powers.get(j, 0) + int(m.group(2) or 1)

        def fn(X, powers=tuple(powers.items())):
            out = np.ones(X.shape[0])
            for j, k in powers:
                if j >= X.shape[1]:
                    raise InvalidArgumentError(f"basis term {name!r} refers to a missing column")
                out = out * X[:, j] ** k
            return out

        return fn

    @property
    def names(self):
        return [name for name, _ in self.terms]

    @property
    def serializable(self):
        try:
            Basis(self.names)
        except InvalidArgumentError:
            return False
        return True

    def matrix(self, X):
        return np.column_stack([fn(X) for _, fn in self.terms])

    def __len__(self):
        return len(self.terms)


@dataclass(frozen=True)
class KrigingModel:
    """Fitted stationary kriging model.

    ``kind`` is one of ``ok``, ``uk`` or ``nugget``. ``weights`` holds
    ``(R + nugget I)^{-1} (y - F beta)``.
    """

    dataset: Dataset
    kind: str
    theta: np.ndarray
    nugget: float
    basis: Basis
    beta_hat: np.ndarray
    sigma2_hat: float
    factor: Factor
    weights: np.ndarray
    Rf: np.ndarray
    degenerate: bool = False
    condition: float = float("nan")
    objective: float = float("nan")
    info: dict = field(default_factory=dict)

    @property
    def mu_hat(self):
        return float(self.beta_hat[0])

    @property
    def condition_overflow(self):
        """True when the factor's condition estimate exceeds ``CONDITION_LIMIT``."""
        return not self.condition <= CONDITION_LIMIT


OkModel = UkModel = NuggetModel = KrigingModel


def _theta_box(theta_bounds, p, alpha_lower):
    if theta_bounds is None:
        lo, hi = np.zeros(p), np.full(p, OK_THETA_SPAN * alpha_lower)
    else:
        lo, hi = (np.broadcast_to(np.asarray(b, dtype=float), (p,)).copy() for b in theta_bounds)
    if np.any(lo < 0) or np.any(hi <= lo):
        raise InvalidArgumentError(f"invalid theta bounds {theta_bounds!r}")
    return lo, hi


def _warp(u, lo, hi):
    u = np.asarray(u, dtype=float)
    out = np.where(lo > 0, lo * (hi / np.where(lo > 0, lo, 1.0)) ** u, hi * log_warp(u, DECADES))
    return out


def assemble(dataset: Dataset, theta, nugget=0.0, basis: Basis | None = None, ladder=JITTER_LADDER,
             kind="ok", D2=None, objective=float("nan"), info=None) -> KrigingModel:
    """Build a kriging model for fixed correlation parameters."""
    basis = basis or Basis()
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape == (1,) and dataset.p > 1:
        theta = np.full(dataset.p, theta[0])
    if D2 is None:
        D2 = sq_diffs(dataset.X, dataset.X)
    R = corr_from_sqdiff(D2, theta)
    if nugget:
        R = R + nugget * np.eye(dataset.n)
    factor = safe_cholesky(R, ladder)
    F = basis.matrix(dataset.X)
    y = dataset.y
    beta, Ft, Rf = gls_coefficients(F, y, factor)
    degenerate = np.ptp(y) == 0.0
    if degenerate:
        beta = np.zeros(F.shape[1])
        beta[0] = y[0]
        resid = np.zeros_like(y)
    else:
        resid = y - F @ beta
    rt = factor.solve_lower(resid)
    sigma2 = float(rt @ rt) / dataset.n
    if degenerate:
        sigma2 = 0.0
    weights = factor.solve(resid)
    cond = factor.condition_estimate()
    return KrigingModel(dataset, kind, theta, float(nugget), basis, beta, sigma2, factor, weights, Rf,
                        bool(degenerate), cond, objective, dict(info or {}))


class KrigingObjective:
    """n log sigma2_hat + log det(R + nugget I) over warped unit coordinates."""

    def __init__(self, dataset, basis, lo, hi, nug_lo=None, nug_hi=None, ladder=JITTER_LADDER):
        self.dataset = dataset
        self.basis = basis
        self.lo, self.hi = lo, hi
        self.nug = None if nug_hi is None else (nug_lo, nug_hi)
        self.ladder = ladder
        self.D2 = sq_diffs(dataset.X, dataset.X)
        self.F = basis.matrix(dataset.X)
        self.failures = 0
        self.jitter_events = 0

    @property
    def dim(self):
        return self.dataset.p + (self.nug is not None)

    def params(self, u):
        u = np.asarray(u, dtype=float)
        p = self.dataset.p
        theta = _warp(u[:p], self.lo, self.hi)
        nugget = 0.0
        if self.nug is not None:
            lo, hi = self.nug
            nugget = float(_warp(u[p:p + 1], np.array([lo]), np.array([hi]))[0])
        return theta, nugget

    def value(self, theta, nugget=0.0):
        R = corr_from_sqdiff(self.D2, theta)
        if nugget:
            R = R + nugget * np.eye(self.dataset.n)
        try:
            fac = safe_cholesky(R, self.ladder)
            beta, _, _ = gls_coefficients(self.F, self.dataset.y, fac)
        except (SingularMatrixError, np.linalg.LinAlgError):
            self.failures += 1
            return PENALTY
        self.jitter_events += fac.jitter > 0
        rt = fac.solve_lower(self.dataset.y - self.F @ beta)
        sigma2 = float(rt @ rt) / self.dataset.n
        if not sigma2 > 0:
            self.failures += 1
            return PENALTY
        val = self.dataset.n * math.log(sigma2) + fac.logdet()
        return val if math.isfinite(val) else PENALTY

    def __call__(self, u):
        return self.value(*self.params(u))


def _fit(dataset, basis, kind, theta_bounds, nugget_bounds, theta, nugget, n_starts, seed, maxfev,
         ladder, alpha_lower):
    t0 = time.perf_counter()
    dataset.check_distinct()
    if theta is not None:
        return assemble(dataset, theta, nugget or 0.0, basis, ladder, kind)
    if np.ptp(dataset.y) == 0.0:
        logger.warning("degenerate constant response")
        return assemble(dataset, np.ones(dataset.p), nugget or 0.0, basis, ladder, kind,
                        info={"constant_response": True})
    if alpha_lower is None:
        alpha_lower = design_stats(dataset.X).alpha_lower
    lo, hi = _theta_box(theta_bounds, dataset.p, alpha_lower)
    nlo = nhi = None
    if kind == "nugget" and nugget is None:
        nlo, nhi = nugget_bounds if nugget_bounds is not None else (0.0, 1.0)
    obj = KrigingObjective(dataset, basis, lo, hi, nlo, nhi, ladder)
    if kind == "nugget" and nugget is not None:
        fixed = float(nugget)
        fun = lambda u: obj.value(obj.params(u)[0], fixed)  # noqa: E731
    else:
        fun = obj
    res = multistart_minimize(fun, obj.dim, n_starts=n_starts, seed=seed, maxfev=maxfev)
    info = {"restarts": len(res.runs), "evaluations": res.nfev, "failures": obj.failures,
            "jitter_events": obj.jitter_events, "alpha_lower": alpha_lower,
            "best_so_far": res.best_so_far}
    if res.fun >= PENALTY:
        raise EstimationFailedError("every restart failed to evaluate the likelihood", info)
    th, nug = obj.params(res.x)
    if nugget is not None:
        nug = float(nugget)
    try:
        model = assemble(dataset, th, nug, basis, ladder, kind, obj.D2, res.fun, info)
    except CompGPError as exc:
        raise EstimationFailedError(f"could not assemble the fitted model: {exc}", info) from exc
    model.info["wall_time"] = time.perf_counter() - t0
    return model


def fit_ok(data: Dataset, theta_bounds=None, *, theta=None, n_starts=None, seed=0, maxfev=None,
           ladder=JITTER_LADDER, alpha_lower=None) -> KrigingModel:
    """Ordinary kriging by profile likelihood.

    ``theta`` fixes the correlation scales and skips estimation. Default
    bounds are ``[0, 100 * alpha_lower]`` per coordinate.
    """
    return _fit(data, Basis(), "ok", theta_bounds, None, theta, None, n_starts, seed, maxfev, ladder,
                alpha_lower)


def fit_uk(data: Dataset, basis, theta_bounds=None, *, theta=None, n_starts=None, seed=0, maxfev=None,
           ladder=JITTER_LADDER, alpha_lower=None) -> KrigingModel:
    """Universal kriging with a user-supplied trend basis."""
    if not isinstance(basis, Basis):
        basis = Basis.parse(basis, data.p) if isinstance(basis, str) else Basis(basis)
    return _fit(data, basis, "uk", theta_bounds, None, theta, None, n_starts, seed, maxfev, ladder,
                alpha_lower)


def fit_nugget(data: Dataset, theta_bounds=None, nugget_bounds=None, *, theta=None, nugget=None,
               n_starts=None, seed=0, maxfev=None, ladder=JITTER_LADDER, alpha_lower=None) -> KrigingModel:
    """Kriging with a nugget added to the correlation diagonal.

    The nugget is searched in ``nugget_bounds`` (default ``[0, 1]``)
    unless fixed with ``nugget``.
    """
    return _fit(data, Basis(), "nugget", theta_bounds, nugget_bounds, theta, nugget, n_starts, seed, maxfev,
                ladder, alpha_lower)


def predict(model: KrigingModel, Xq) -> Prediction:
    """Kriging mean and posterior sd (including trend-estimation variance)."""
    Xq = np.asarray(Xq, dtype=float)
    if Xq.ndim == 1:
        Xq = Xq[:, None] if model.dataset.p == 1 else Xq[None, :]
    if Xq.shape[1] != model.dataset.p:
        raise InvalidArgumentError(f"query has {Xq.shape[1]} columns, model expects {model.dataset.p}")
    r = cross_corr(Xq, model.dataset.X, model.theta)
    Fq = model.basis.matrix(Xq)
    mean = Fq @ model.beta_hat + r @ model.weights
    fac = model.factor
    A = fac.solve_lower(r.T)
    Ft = fac.solve_lower(model.basis.matrix(model.dataset.X))
    u = Fq.T - Ft.T @ A
    Z = np.linalg.solve(model.Rf.T, u)
    var = model.sigma2_hat * (1.0 - np.sum(A * A, axis=0) + np.sum(Z * Z, axis=0))
    scale = model.sigma2_hat if model.sigma2_hat > 0 else 1.0
    var = clamp_variance(var, scale)
    m = Xq.shape[0]
    return Prediction(mean, mean.copy(), np.zeros(m), np.sqrt(var), np.ones(m))


predict_ok = predict_uk = predict_nugget = predict
