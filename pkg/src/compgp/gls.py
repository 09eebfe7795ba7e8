"""Generalized least squares pieces shared by kriging and the composite model."""
from __future__ import annotations

import numpy as np

from .errors import EstimationFailedError, IllPosedBasisError


def closed_form_mu_tau2(y, factor):
    """Closed-form MLEs of the constant mean and the global variance.

    Returns ``(mu_hat, tau2_hat, weights)`` where ``weights`` is
    ``Q^{-1}(y - mu_hat)``. Only triangular solves on ``factor`` are used.
    A constant response yields ``tau2_hat == 0`` exactly; any other
    nonpositive variance means the factorization is broken.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    ones = np.ones(n)
    a1 = factor.solve_lower(ones)
    ay = factor.solve_lower(y)
    mu = float(a1 @ ay) / float(a1 @ a1)
    if np.ptp(y) == 0.0:
        return float(y[0]), 0.0, np.zeros(n)
    resid_t = ay - mu * a1
    tau2 = float(resid_t @ resid_t) / n
    if not tau2 > 0.0:
        raise EstimationFailedError(f"nonpositive variance estimate {tau2!r}")
    weights = factor.solve(y - mu)
    return mu, tau2, weights


def gls_coefficients(F, y, factor):
    """beta = (F^T R^-1 F)^-1 F^T R^-1 y via whitened least squares.

    Returns ``(beta, Ft, Rf)`` with ``Ft = L^{-1} F`` and ``Rf`` the upper
    triangular factor of ``Ft`` (so ``F^T R^-1 F = Rf^T Rf``).
    """
    F = np.asarray(F, dtype=float)
    if np.linalg.matrix_rank(F) < F.shape[1]:
        raise IllPosedBasisError(f"basis matrix of shape {F.shape} is rank deficient")
    Ft = factor.solve_lower(F)
    yt = factor.solve_lower(y)
    Qf, Rf = np.linalg.qr(Ft)
    beta = np.linalg.solve(Rf, Qf.T @ yt)
    return beta, Ft, Rf
