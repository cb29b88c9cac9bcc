"""Convex-hull membership and intersections of reduced-subset hulls.

Point sets are numpy arrays of shape (m, d), one row per point.  Duplicate
rows are kept and counted: agent states may coincide, and multiplicity
matters when deciding how many values an intersection survives losing.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations

import numpy as np

from .lp import FEAS_TOL, solve_feasibility

# Hulls can intersect in a measure-zero set (a single point), so exact
# boundary points must classify as inside; 1e-7 leaves headroom over the
# solver's own 1e-9 residual.
MEMBERSHIP_TOL = 1e-7


def as_points(points, dim: int | None = None) -> np.ndarray:
    """Coerce to a float (m, d) array; 1-D input is treated as m scalars."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise ValueError("a point set must be an (m, d) array")
    if dim is not None and pts.shape[1] != dim:
        raise ValueError(f"points have dimension {pts.shape[1]}, expected {dim}")
    return pts


def _check_drop_count(n: int, m: int) -> None:
    if not 0 <= n <= m:
        raise ValueError(f"cannot drop {n} points from a set of {m}")


def hull_contains(q, points, tol: float = MEMBERSHIP_TOL) -> bool:
    """Whether ``q`` is a convex combination of ``points``.

    Decided by a feasibility solve over the combination weights; ``tol``
    bounds the accepted constraint residual, so points within ``tol`` of the
    hull count as members.
    """
    pts = as_points(points)
    m, d = pts.shape
    if m == 0:
        raise ValueError("empty point set")
    qv = np.asarray(q, dtype=float).ravel()
    if qv.shape[0] != d:
        raise ValueError(f"query has dimension {qv.shape[0]}, points have {d}")
    a = np.vstack([pts.T, np.ones((1, m))])
    b = np.concatenate([qv, [1.0]])
    return solve_feasibility(a, b, nonneg=True, tol=tol).optimal


@lru_cache(maxsize=None)
def _kept_index_sets(m: int, n: int) -> tuple[tuple[int, ...], ...]:
    """All size-(m-n) index subsets of range(m), lexicographic by index."""
    return tuple(combinations(range(m), m - n))


def enumerate_reduced_subsets(points, n: int) -> list[np.ndarray]:
    """All C(m, n) sub-multisets obtained by dropping n of the m points.

    Order is deterministic: lexicographic in the kept row indices.
    """
    pts = as_points(points)
    m = pts.shape[0]
    _check_drop_count(n, m)
    return [pts[list(ix)] for ix in _kept_index_sets(m, n)]


def psi_contains(q, points, n: int, tol: float = MEMBERSHIP_TOL) -> bool:
    """Whether ``q`` lies in every hull of every n-points-removed subset."""
    pts = as_points(points)
    _check_drop_count(n, pts.shape[0])
    return all(
        hull_contains(q, pts[list(ix)], tol=tol)
        for ix in _kept_index_sets(pts.shape[0], n)
    )


def intersection_system(points, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Equality system whose nonnegative solutions pick one common point of
    all reduced-subset hulls.

    Variables are per-subset convex weights, stacked block by block in
    ``enumerate_reduced_subsets`` order.  The first d*r rows chain each
    block's combination to equal the next one (circulant differences); the
    final r rows force each block's weights to sum to one.
    """
    pts = as_points(points)
    m, d = pts.shape
    _check_drop_count(n, m)
    sets = _kept_index_sets(m, n)
    r = len(sets)
    w = m - n
    # Centring the points keeps the solution set unchanged (the convexity
    # rows pin every block's weight sum to one) but makes the difference
    # rows scale with the cloud's spread instead of its absolute position,
    # which keeps the solve well-conditioned for nearly-agreeing points.
    shifted = pts - pts.mean(axis=0)
    a = np.zeros((d * r + r, w * r))
    for j, ix in enumerate(sets):
        jn = (j + 1) % r
        rows = slice(j * d, (j + 1) * d)
        a[rows, j * w:(j + 1) * w] += shifted[list(ix)].T
        a[rows, jn * w:(jn + 1) * w] -= shifted[list(sets[jn])].T
        a[d * r + j, j * w:(j + 1) * w] = 1.0
    b = np.zeros(d * r + r)
    b[d * r:] = 1.0
    return a, b


def recover_intersection_point(points, n: int, beta: np.ndarray) -> np.ndarray:
    """Map a feasible weight vector of ``intersection_system`` to the point
    it encodes (the average of the per-block combinations)."""
    pts = as_points(points)
    m, d = pts.shape
    sets = _kept_index_sets(m, n)
    w = m - n
    blocks = [pts[list(ix)].T @ beta[j * w:(j + 1) * w] for j, ix in enumerate(sets)]
    return np.mean(blocks, axis=0)


def psi_point_oracle(points, n: int, tol: float = FEAS_TOL) -> np.ndarray | None:
    """A point lying in every reduced-subset hull, or None if there is none.

    Whenever m >= n*(d+1)+1 the intersection is guaranteed nonempty (any d+1
    of the hulls still share a surviving point, so Helly's theorem applies)
    and this never returns None.
    """
    pts = as_points(points)
    _check_drop_count(n, pts.shape[0])
    a, b = intersection_system(pts, n)
    res = solve_feasibility(a, b, nonneg=True, tol=tol)
    if not res.optimal:
        return None
    return recover_intersection_point(pts, n, res.beta)
