"""Prediction container and normal-theory interval helpers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import InvalidArgumentError, SingularMatrixError


def z_value(level: float) -> float:
    """Upper (1 - level)/2 standard-normal critical value."""
    if not 0.0 < level < 1.0:
        raise InvalidArgumentError(f"interval level must be in (0, 1), got {level}")
    return float(norm.ppf(0.5 + level / 2.0))


@dataclass(frozen=True)
class Prediction:
    """Per-query predictive summaries.

    ``mean == glob + local`` elementwise. Stationary models report
    ``local = 0`` and ``v = 1``.
    """

    mean: np.ndarray
    glob: np.ndarray
    local: np.ndarray
    sd: np.ndarray
    v: np.ndarray

    def interval(self, level=0.95):
        z = z_value(level)
        return self.mean - z * self.sd, self.mean + z * self.sd


def clamp_variance(var, scale, rel_tol=1e-8):
    """Zero out slightly negative variances from cancellation.

    Values below ``-rel_tol * scale`` indicate a broken factorization.
    """
    var = np.asarray(var, dtype=float)
    if np.any(var < -rel_tol * scale):
        worst = float(var.min())
        raise SingularMatrixError(
            f"posterior variance {worst:.3e} is negative beyond tolerance",
            {"min_variance": worst, "scale": scale},
        )
    return np.maximum(var, 0.0)
