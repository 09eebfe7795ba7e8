"""Training data container with its min-max standardization map."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataParseError, DegenerateDesignError, InvalidArgumentError


@dataclass(frozen=True)
class Dataset:
    """Inputs standardized to [0, 1]^p, responses, and the affine map back.

    ``lower`` and ``upper`` are the raw-scale column bounds; a raw point
    ``z`` maps to ``(z - lower) / (upper - lower)``.
    """

    X: np.ndarray
    y: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    names: tuple = field(default=())
    response_name: str = "y"

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise InvalidArgumentError(f"{X.shape[0]} input rows but {y.shape[0]} responses")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InvalidArgumentError("dataset contains non-finite values")
        lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (X.shape[1],)).copy()
        upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (X.shape[1],)).copy()
        names = tuple(self.names) or tuple(f"x{j + 1}" for j in range(X.shape[1]))
        for arr in (X, y, lower, upper):
            arr.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "names", names)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @classmethod
    def from_unit(cls, X, y, **kw):
        """Wrap data that is already on the unit cube."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        return cls(X, y, np.zeros(X.shape[1]), np.ones(X.shape[1]), **kw)

    @classmethod
    def from_raw(cls, Z, y, names=(), response_name="y", lower=None, upper=None):
        """Standardize raw inputs column-wise by their observed min and max."""
        Z = np.asarray(Z, dtype=float)
        if Z.ndim == 1:
            Z = Z[:, None]
        if not np.all(np.isfinite(Z)):
            raise DataParseError("inputs contain non-finite values")
        lo = Z.min(axis=0) if lower is None else np.asarray(lower, dtype=float)
        hi = Z.max(axis=0) if upper is None else np.asarray(upper, dtype=float)
        span = hi - lo
        if np.any(span <= 0):
            j = int(np.flatnonzero(span <= 0)[0])
            label = names[j] if names else f"column {j + 1}"
            raise DataParseError(f"input {label!r} has zero range; cannot standardize")
        return cls((Z - lo) / span, y, lo, hi, names=tuple(names), response_name=response_name)

    def to_unit(self, Z):
        Z = np.asarray(Z, dtype=float)
        if Z.ndim == 1:
            Z = Z[:, None] if self.p == 1 else Z[None, :]
        if Z.shape[1] != self.p:
            raise InvalidArgumentError(f"query has {Z.shape[1]} columns, model expects {self.p}")
        return (Z - self.lower) / (self.upper - self.lower)

    def to_raw(self, X):
        return self.lower + np.asarray(X, dtype=float) * (self.upper - self.lower)

    def check_distinct(self):
        d2 = ((self.X[:, None, :] - self.X[None, :, :]) ** 2).sum(axis=2)
        np.fill_diagonal(d2, np.inf)
        if np.any(d2 <= 0):
            raise DegenerateDesignError("design contains duplicated points")
