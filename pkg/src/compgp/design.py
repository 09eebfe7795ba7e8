"""Space-filling designs on the unit cube."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .kernels import DesignStats, design_stats


@dataclass(frozen=True)
class Design:
    points: np.ndarray
    kind: str
    seed: int | None = None

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def p(self):
        return self.points.shape[1]

    @property
    def stats(self) -> DesignStats:
        return design_stats(self.points)

    def min_distance(self):
        return min_distance(self.points)


def min_distance(X):
    d2 = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
    iu = np.triu_indices(X.shape[0], 1)
    return float(np.sqrt(d2[iu].min()))


def is_lhd(X):
    """Each column, scaled by n and floored, is a permutation of 0..n-1."""
    n = X.shape[0]
    cells = np.floor(X * n).astype(int)
    return all(np.array_equal(np.sort(c), np.arange(n)) for c in cells.T)


def _rng(seed):
    return np.random.default_rng(seed)


def random_lhd(n, p, seed=0) -> Design:
    """Latin hypercube with a uniform random position inside each cell."""
    if n < 2:
        raise InvalidArgumentError("a Latin hypercube needs at least two runs")
    if p < 1:
        raise InvalidArgumentError("need at least one dimension")
    rng = _rng(seed)
    cells = np.column_stack([rng.permutation(n) for _ in range(p)])
    X = (cells + rng.random((n, p))) / n
    # guard against a draw rounding up to the cell's upper edge
    X = np.minimum(X, (cells + 1) / n - np.finfo(float).eps)
    return Design(X, "random-lhd", seed)


def maximin_lhd(n, p, seed=0, iters=10_000) -> Design:
    """Row-exchange search for a Latin hypercube with large minimum distance.

    Each proposal swaps two entries within one column, which keeps the
    Latin property. A swap is kept when it does not reduce the minimum
    pairwise distance; ties on the minimum are broken by the number of
    pairs attaining it.
    """
    start = random_lhd(n, p, seed)
    X = start.points.copy()
    rng = _rng([seed, 1])
    diff = X[:, None, :] - X[None, :, :]
    D2 = (diff * diff).sum(axis=2)
    np.fill_diagonal(D2, np.inf)

    def score(D):
        m = D.min()
        return m, -int(np.count_nonzero(D == m))

    current = score(D2)
    best_X, best = X.copy(), current
    for _ in range(iters):
        j = rng.integers(p)
        a, c = rng.choice(n, 2, replace=False)
        delta = X[c, j] - X[a, j]
        if delta == 0.0:
            continue
        # only rows a and c change: update their distance rows in place
        old_a, old_c = D2[a].copy(), D2[c].copy()
        Xa, Xc = X[a].copy(), X[c].copy()
        Xa[j], Xc[j] = X[c, j], X[a, j]
        new_a = ((X - Xa) ** 2).sum(axis=1)
        new_c = ((X - Xc) ** 2).sum(axis=1)
        new_a[c] = new_c[a] = ((Xa - Xc) ** 2).sum()
        new_a[a] = new_c[c] = np.inf
        D2[a], D2[:, a], D2[c], D2[:, c] = new_a, new_a, new_c, new_c
        cand = score(D2)
        if cand >= current:
            X[a, j], X[c, j] = X[c, j], X[a, j]
            current = cand
            if cand > best:
                best, best_X = cand, X.copy()
        else:
            D2[a], D2[:, a], D2[c], D2[:, c] = old_a, old_a, old_c, old_c
    return Design(best_X, "maximin-lhd", seed)


def sparse_1d_design(n, clusters=None) -> Design:
    """Deterministic 1-d design with points packed into given subintervals.

    ``clusters`` is a sequence of ``(lo, hi, count)``; points are evenly
    spaced within each closed interval and the counts must sum to ``n``.
    Without clusters the design is ``linspace(0, 1, n)``.
    """
    if clusters is None:
        pts = np.linspace(0.0, 1.0, n)
    else:
        if sum(c for _, _, c in clusters) != n:
            raise InvalidArgumentError("cluster counts must add up to n")
        pts = np.concatenate([np.linspace(lo, hi, c) if c > 1 else np.array([(lo + hi) / 2])
                              for lo, hi, c in clusters])
        pts = np.sort(pts)
    if np.any(np.diff(pts) <= 0) or pts.min() < 0 or pts.max() > 1:
        raise InvalidArgumentError("clusters must give distinct points inside [0, 1]")
    return Design(pts[:, None], "explicit", None)


# Fixed reconstructed stand-ins for the sparse 1-d demonstrations; absolute
# scores on them depend on these exact coordinates.
XIONG_CLUSTERS = ((0.0, 0.36, 12), (0.48, 1.0, 5))
GRAMACY_CLUSTERS = ((0.0, 0.12, 4), (0.22, 0.40, 5), (0.52, 0.62, 4), (0.75, 1.0, 7))
DAMPED_CLUSTERS = ((0.0, 1.0, 6),)

BUNDLED = {
    "xiong1d": (17, XIONG_CLUSTERS),
    "gramacy1d": (20, GRAMACY_CLUSTERS),
    "damped1d": (6, DAMPED_CLUSTERS),
}


def bundled_design(name) -> Design:
    try:
        n, clusters = BUNDLED[name]
    except KeyError:
        raise InvalidArgumentError(f"no bundled design named {name!r}; have {sorted(BUNDLED)}") from None
    return sparse_1d_design(n, clusters)
