"""Composite Gaussian process: a smooth global GP plus a variance-modulated
local GP.

The covariance of the response at the design points is
``tau2 * Q`` with ``Q = G + lam * S^{1/2} L S^{1/2}``, where ``G`` and ``L``
are Gaussian correlation matrices with scales ``theta`` and ``alpha`` and
``S = diag(v(x_1), ..., v(x_n))`` holds the standardized local volatility.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset
from .errors import InvalidArgumentError
from .gls import closed_form_mu_tau2
from .kernels import JITTER_LADDER, Factor, corr_from_sqdiff, cross_corr, safe_cholesky, sq_diffs
from .prediction import Prediction, clamp_variance, z_value

VOLATILITY_FLOOR = 1e-8
VOLATILITY_ITERS = 4
VOLATILITY_TOL = 1e-4


@dataclass(frozen=True)
class CgpParams:
    """Composite-model parameters.

    ``kappa`` is set when the local scales were produced by the reduced
    parameterization ``alpha = theta + kappa``.
    """

    lam: float
    theta: np.ndarray
    alpha: np.ndarray
    b: float
    mu: float = float("nan")
    tau2: float = float("nan")
    kappa: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "theta", np.atleast_1d(np.asarray(self.theta, dtype=float)))
        object.__setattr__(self, "alpha", np.atleast_1d(np.asarray(self.alpha, dtype=float)))
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "b", float(self.b))

    def check(self, alpha_lower=None):
        if not 0.0 <= self.lam <= 1.0:
            raise InvalidArgumentError(f"lambda must be in [0, 1], got {self.lam}")
        if not 0.0 <= self.b <= 1.0:
            raise InvalidArgumentError(f"b must be in [0, 1], got {self.b}")
        if np.any(self.theta < 0) or np.any(self.alpha < 0):
            raise InvalidArgumentError("correlation scales must be nonnegative")
        if self.theta.shape != self.alpha.shape:
            raise InvalidArgumentError("theta and alpha must have the same length")
        if alpha_lower is not None:
            tol = 1e-12 * alpha_lower
            if np.any(self.theta > alpha_lower + tol) or np.any(self.alpha < alpha_lower - tol):
                raise InvalidArgumentError("need theta <= alpha_lower <= alpha elementwise")


@dataclass(frozen=True)
class VolatilityState:
    """Kernel-regression volatility model fitted to squared residuals.

    ``sigma_diag`` is the standardized volatility at the design points
    (unit mean). ``scale`` is the pre-standardization mean and ``floor``
    the lower clip applied to raw kernel-regression values.
    """

    sigma_diag: np.ndarray
    s2: np.ndarray
    theta: np.ndarray
    b: float
    scale: float = 1.0
    floor: float = 0.0
    degenerate: bool = False

    @classmethod
    def constant(cls, n, theta, b=0.0, degenerate=True):
        return cls(np.ones(n), np.zeros(n), np.asarray(theta, dtype=float), float(b), 1.0, 0.0, degenerate)

    @property
    def is_constant(self):
        return self.degenerate or not np.any(self.s2)


def _nw_weights(exponent):
    # rows are shifted by their minimum so the normalizer never underflows
    shifted = exponent - exponent.min(axis=1, keepdims=True)
    return np.exp(-shifted)


def volatility_fn(s2, X, theta, b, x):
    """Gaussian kernel regression of squared residuals at a query point.

    Returns the raw (unstandardized) value; weights use
    ``exp(-b * sum_j theta_j h_j^2)``.
    """
    s2 = np.asarray(s2, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    x = np.atleast_1d(np.asarray(x, dtype=float))
    theta = np.asarray(theta, dtype=float)
    return float(_raw_volatility(s2, X, theta, b, x[None, :])[0])


def _raw_volatility(s2, X, theta, b, Xq):
    exponent = b * (sq_diffs(Xq, X) @ theta)
    W = _nw_weights(exponent)
    return (W @ s2) / W.sum(axis=1)


def update_volatility(residuals, X, theta, b, floor=VOLATILITY_FLOOR):
    """Volatility state from global-trend residuals at the design points.

    Raw values are floored at ``floor`` times their mean and then divided
    by the mean of the floored values, so the diagonal has unit mean.
    All-zero residuals give the constant state with ``degenerate=True``.
    """
    s = np.asarray(residuals, dtype=float)
    if not np.all(np.isfinite(s)):
        raise InvalidArgumentError("residuals must be finite")
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    theta = np.asarray(theta, dtype=float)
    n = s.shape[0]
    s2 = s * s
    if not np.any(s2):
        return VolatilityState.constant(n, theta, b, degenerate=True)
    if b == 0.0 or np.ptp(s2) == 0.0:
        # weighted average of a constant, or uniform weights: v is flat
        return VolatilityState(np.ones(n), s2, theta, float(b), float(np.mean(s2)), 0.0, False)
    raw = _raw_volatility(s2, X, theta, b, X)
    clip = floor * float(np.mean(raw))
    raw = np.maximum(raw, clip)
    scale = float(np.mean(raw))
    return VolatilityState(raw / scale, s2, theta, float(b), scale, clip, False)


def volatility_at(vol: VolatilityState, X, Xq):
    """Standardized volatility v(x) at query rows."""
    if vol.is_constant or vol.b == 0.0 or np.ptp(vol.s2) == 0.0:
        return np.ones(Xq.shape[0])
    raw = _raw_volatility(vol.s2, X, vol.theta, vol.b, Xq)
    return np.maximum(raw, vol.floor) / vol.scale


def assemble_Q(X, params: CgpParams, sigma_diag, extra_diag=None, ladder=JITTER_LADDER, D2=None):
    """Form ``G + lam * S^{1/2} L S^{1/2}`` (plus ``extra_diag``) and factor it.

    Returns ``(Q, factor)``.
    """
    if D2 is None:
        X = np.asarray(X, dtype=float)
        D2 = sq_diffs(X, X)
    G = corr_from_sqdiff(D2, params.theta)
    Q = G
    if params.lam != 0.0:
        L = corr_from_sqdiff(D2, params.alpha)
        root = np.sqrt(np.asarray(sigma_diag, dtype=float))
        Q = G + params.lam * (L * np.outer(root, root))
    if extra_diag is not None:
        Q = Q + np.diag(extra_diag)
    return Q, safe_cholesky(Q, ladder)


@dataclass(frozen=True)
class NoiseSpec:
    """Known measurement-error variances at the design points."""

    error_variances: np.ndarray
    rho: float

    def __post_init__(self):
        ev = np.asarray(self.error_variances, dtype=float).ravel()
        if not np.all(np.isfinite(ev)) or np.any(ev < 0):
            raise InvalidArgumentError("error variances must be finite and nonnegative")
        if not self.rho > 0:
            raise InvalidArgumentError("rho must be positive")
        object.__setattr__(self, "error_variances", ev)


@dataclass(frozen=True)
class FittedCgp:
    """Immutable fitted composite model ready for prediction."""

    dataset: Dataset
    params: CgpParams
    vol: VolatilityState
    factor: Factor
    mu_hat: float
    tau2_hat: float
    weights: np.ndarray
    alpha_lower: float | None = None
    noise: NoiseSpec | None = None
    degenerate: bool = False
    info: dict = field(default_factory=dict)

    @property
    def jitter(self):
        return self.factor.jitter


def build_cgp(dataset: Dataset, params: CgpParams, vol: VolatilityState, *, alpha_lower=None,
              noise: NoiseSpec | None = None, tau2=None, ladder=JITTER_LADDER, degenerate=False, info=None):
    """Factor Q for fixed parameters and volatility; compute mu, tau2, weights.

    With ``noise`` the matrix becomes ``Q + rho * Sigma_eps`` and ``tau2``
    (if given) is kept rather than re-estimated.
    """
    extra = None
    if noise is not None:
        if noise.error_variances.shape != (dataset.n,):
            raise InvalidArgumentError("need one error variance per design point")
        extra = noise.rho * noise.error_variances
    _, factor = assemble_Q(dataset.X, params, vol.sigma_diag, extra_diag=extra, ladder=ladder)
    mu, tau2_hat, weights = closed_form_mu_tau2(dataset.y, factor)
    if tau2 is not None:
        tau2_hat = float(tau2)
    params = replace(params, mu=mu, tau2=tau2_hat)
    return FittedCgp(dataset, params, vol, factor, mu, tau2_hat, weights, alpha_lower, noise,
                     degenerate, dict(info or {}))


def with_noise(model: FittedCgp, error_variances):
    """Noisy-data variant of a fitted model, with rho = 1 / tau2_hat."""
    noise = NoiseSpec(error_variances, 1.0 / model.tau2_hat)
    return build_cgp(model.dataset, model.params, model.vol, alpha_lower=model.alpha_lower,
                     noise=noise, tau2=model.tau2_hat, degenerate=model.degenerate, info=model.info)


def _query(model, Xq):
    Xq = np.asarray(Xq, dtype=float)
    if Xq.ndim == 1:
        Xq = Xq[:, None] if model.dataset.p == 1 else Xq[None, :]
    if Xq.shape[1] != model.dataset.p:
        raise InvalidArgumentError(f"query has {Xq.shape[1]} columns, model expects {model.dataset.p}")
    return Xq


def _cross_terms(model: FittedCgp, Xq):
    X = model.dataset.X
    p = model.params
    Gq = cross_corr(Xq, X, p.theta)
    vq = volatility_at(model.vol, X, Xq)
    if p.lam == 0.0:
        Lq = np.zeros_like(Gq)
    else:
        Lq = p.lam * np.sqrt(vq)[:, None] * cross_corr(Xq, X, p.alpha) * np.sqrt(model.vol.sigma_diag)[None, :]
    return Gq, Lq, vq


def posterior_variance_terms(model: FittedCgp, Xq):
    Xq = _query(model, Xq)
    Gq, Lq, vq = _cross_terms(model, Xq)
    return _variance(model, Gq + Lq, vq)


def _variance(model, q, vq):
    fac = model.factor
    A = fac.solve_lower(q.T)
    a1 = fac.solve_lower(np.ones(fac.n))
    one_q_one = float(a1 @ a1)
    prior = 1.0 + model.params.lam * vq
    bracket = prior - np.sum(A * A, axis=0) + (1.0 - a1 @ A) ** 2 / one_q_one
    return model.tau2_hat * bracket


def cgp_predict(model: FittedCgp, Xq) -> Prediction:
    """Posterior mean (global + local parts) and sd at unit-cube queries."""
    Xq = _query(model, Xq)
    Gq, Lq, vq = _cross_terms(model, Xq)
    glob = model.mu_hat + Gq @ model.weights
    local = Lq @ model.weights
    mean = glob + local
    var = clamp_variance(_variance(model, Gq + Lq, vq), model.tau2_hat)
    return Prediction(mean, glob, local, np.sqrt(var), vq)


def cgp_predict_noisy(model: FittedCgp, Xq, error_variances=None) -> Prediction:
    """Prediction from the noisy-data extension.

    ``error_variances`` may be omitted when ``model`` already carries a
    :class:`NoiseSpec`.
    """
    if error_variances is not None:
        model = with_noise(model, error_variances)
    elif model.noise is None:
        raise InvalidArgumentError("model has no noise specification")
    return cgp_predict(model, Xq)


def posterior_variance(model: FittedCgp, x) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    var = posterior_variance_terms(model, x[None, :])
    return float(clamp_variance(var, model.tau2_hat)[0])


def prediction_interval(model: FittedCgp, x, level=0.95):
    z = z_value(level)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    pred = cgp_predict(model, x[None, :])
    m, s = float(pred.mean[0]), float(pred.sd[0])
    return m - z * s, m + z * s


def cgp_predict_sequential(model: FittedCgp, Xq) -> Prediction:
    """Two-step form: global trend, then kriging of standardized residuals.

    Kept as an independent check of :func:`cgp_predict`; the two agree for
    identical parameters.
    """
    Xq = _query(model, Xq)
    X = model.dataset.X
    p = model.params
    D2 = sq_diffs(X, X)
    G = corr_from_sqdiff(D2, p.theta)
    centered = model.dataset.y - model.mu_hat
    w = model.factor.solve(centered)
    glob = model.mu_hat + cross_corr(Xq, X, p.theta) @ w
    vq = volatility_at(model.vol, X, Xq)
    if p.lam == 0.0:
        local = np.zeros(Xq.shape[0])
    else:
        s = centered - G @ w
        s_std = s / np.sqrt(model.vol.sigma_diag)
        L_fac = safe_cholesky(corr_from_sqdiff(D2, p.alpha))
        adj = cross_corr(Xq, X, p.alpha) @ L_fac.solve(s_std)
        local = np.sqrt(vq) * adj
    mean = glob + local
    sd = cgp_predict(model, Xq).sd
    return Prediction(mean, glob, local, sd, vq)


def fit_volatility(D2, y, lam, theta, alpha, b, *, iters=VOLATILITY_ITERS, tol=VOLATILITY_TOL,
                   ladder=JITTER_LADDER, extra_diag=None, X=None):
    """Alternate global-trend refits and volatility updates.

    Starts from ``Sigma = I``. Each round factors Q, takes the global-trend
    residuals at the design points and re-estimates the volatility. Stops
    after ``iters`` rounds or when the largest relative change of the
    diagonal drops below ``tol``. Returns ``(vol, rounds, jitter_events)``.
    """
    n = y.shape[0]
    params = CgpParams(lam, theta, alpha, b)
    if lam == 0.0:
        return VolatilityState.constant(n, theta, b), 0, 0
    if X is None:
        raise InvalidArgumentError("design points are required for the volatility model")
    vol = VolatilityState.constant(n, theta, b, degenerate=False)
    G = corr_from_sqdiff(D2, params.theta)
    jitter_events = 0
    rounds = 0
    for rounds in range(1, iters + 1):
        _, fac = assemble_Q(X, params, vol.sigma_diag, extra_diag=extra_diag, ladder=ladder, D2=D2)
        jitter_events += fac.jitter > 0
        mu, _, w = closed_form_mu_tau2(y, fac)
        resid = (y - mu) - G @ w
        new = update_volatility(resid, X, theta, b)
        change = float(np.max(np.abs(new.sigma_diag - vol.sigma_diag) / vol.sigma_diag))
        vol = new
        if new.degenerate or change < tol:
            break
    return vol, rounds, jitter_events

