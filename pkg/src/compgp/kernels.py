"""Gaussian correlation functions, design distance statistics and a guarded
Cholesky factorization shared by every model in the package.

All inputs are assumed to live in the unit cube; callers standardize.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DegenerateDesignError, InvalidArgumentError, SingularMatrixError

# Relative jitter steps, multiplied by the mean diagonal of the matrix.
JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8, 1e-6)
NO_JITTER = (0.0,)
# the smallest nonzero jitter rung bounds the condition number near this value
CONDITION_LIMIT = 1e12

PSD_EIGEN_FLOOR = -1e-8


def _as_2d(X, name="X"):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise InvalidArgumentError(f"{name} must be a 2-d array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return X


def _as_scales(scales, p):
    scales = np.atleast_1d(np.asarray(scales, dtype=float))
    if scales.shape == (1,) and p != 1:
        scales = np.full(p, scales[0])
    if scales.shape != (p,):
        raise InvalidArgumentError(f"expected {p} correlation scales, got {scales.shape[0]}")
    if not np.all(np.isfinite(scales)) or np.any(scales < 0):
        raise InvalidArgumentError("correlation scales must be finite and nonnegative")
    return scales


def gaussian_corr(h, scales) -> float:
    """exp(-sum_j scales_j * h_j**2) for a single lag vector ``h``."""
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if not np.all(np.isfinite(h)):
        raise InvalidArgumentError("lag vector contains non-finite values")
    scales = _as_scales(scales, h.shape[0])
    return float(np.exp(-np.dot(scales, h * h)))


def sq_diffs(A, B) -> np.ndarray:
    """Per-coordinate squared differences, shape (len(A), len(B), p)."""
    diff = A[:, None, :] - B[None, :, :]
    return diff * diff


def cross_corr(A, B, scales) -> np.ndarray:
    """Correlation matrix between the rows of ``A`` and the rows of ``B``."""
    A = _as_2d(A, "A")
    B = _as_2d(B, "B")
    if A.shape[1] != B.shape[1]:
        raise InvalidArgumentError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]} columns")
    scales = _as_scales(scales, A.shape[1])
    return np.exp(-(sq_diffs(A, B) @ scales))


def corr_matrix(X, scales) -> np.ndarray:
    """Symmetric correlation matrix with unit diagonal.

    Built from the upper triangle and mirrored so the result is exactly
    symmetric.
    """
    X = _as_2d(X)
    if X.shape[0] < 1:
        raise InvalidArgumentError("need at least one point")
    scales = _as_scales(scales, X.shape[1])
    return corr_from_sqdiff(sq_diffs(X, X), scales)


def corr_from_sqdiff(D2, scales) -> np.ndarray:
    """Same as :func:`corr_matrix` but from precomputed squared differences."""
    R = np.exp(-(D2 @ scales))
    upper = np.triu(R, 1)
    R = upper + upper.T
    np.fill_diagonal(R, 1.0)
    return R


def corr_vector(X, x, scales) -> np.ndarray:
    X = _as_2d(X)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (X.shape[1],):
        raise InvalidArgumentError(f"query has {x.shape[0]} coordinates, design has {X.shape[1]}")
    return cross_corr(x[None, :], X, scales)[0]


@dataclass(frozen=True)
class DesignStats:
    d_avg: float
    alpha_lower: float


def alpha_lower_bound(d_avg: float) -> float:
    """Local-process correlation floor: correlation 0.01 at distance d_avg."""
    return math.log(100.0) / d_avg**2


def design_stats(X) -> DesignStats:
    """Harmonic-type average inter-point distance and the derived bound."""
    X = _as_2d(X)
    n = X.shape[0]
    if n < 2:
        raise DegenerateDesignError("design statistics need at least two points")
    iu = np.triu_indices(n, 1)
    d2 = sq_diffs(X, X).sum(axis=2)[iu]
    if np.any(d2 <= 0.0):
        raise DegenerateDesignError("design contains duplicated points")
    mean_inv = np.mean(1.0 / d2)
    d_avg = float(mean_inv ** -0.5)
    return DesignStats(d_avg=d_avg, alpha_lower=alpha_lower_bound(d_avg))


@dataclass(frozen=True)
class Factor:
    """Lower Cholesky factor of ``M + jitter * I``.

    ``ladder`` is the relative jitter policy the factor was produced under.
    """

    L: np.ndarray
    jitter: float
    ladder: tuple = JITTER_LADDER

    @property
    def n(self):
        return self.L.shape[0]

    def solve_lower(self, b):
        return solve_triangular(self.L, b, lower=True, check_finite=False)

    def solve(self, b):
        z = solve_triangular(self.L, b, lower=True, check_finite=False)
        return solve_triangular(self.L, z, lower=True, trans="T", check_finite=False)

    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.L))))

    def condition_estimate(self) -> float:
        """Cheap lower bound on cond_2 from the factor's diagonal."""
        d = np.diag(self.L)
        return float((d.max() / d.min()) ** 2)


def safe_cholesky(M, ladder=JITTER_LADDER) -> Factor:
    """Cholesky factorization with escalating diagonal jitter.

    Tries each relative jitter in ``ladder`` (scaled by the mean diagonal)
    until the factorization succeeds. The jitter actually added is stored
    on the returned :class:`Factor`.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise SingularMatrixError("matrix has non-finite entries", {"finite": False})
    scale = float(np.mean(np.diag(M))) if M.size else 1.0
    if scale <= 0:
        scale = 1.0
    eye = np.eye(M.shape[0])
    for rel in ladder:
        jitter = rel * scale
        try:
            L = np.linalg.cholesky(M + jitter * eye if jitter else M)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(L)) and np.all(np.diag(L) > 0):
            return Factor(L, jitter, tuple(ladder))
    raise SingularMatrixError(
        "Cholesky factorization failed at every jitter level",
        {
            "mean_diag": scale,
            "min_diag": float(np.min(np.diag(M))) if M.size else float("nan"),
            "min_eigenvalue": float(np.linalg.eigvalsh((M + M.T) / 2).min()),
            "ladder": tuple(rel * scale for rel in ladder),
        },
    )


def is_psd(M, floor=PSD_EIGEN_FLOOR) -> bool:
    return bool(np.linalg.eigvalsh(M).min() >= floor)
