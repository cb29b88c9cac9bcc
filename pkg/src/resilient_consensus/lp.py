"""Dense equality-constrained linear programs, solved by a two-phase simplex.

Every program in this package is tiny (tens of rows and columns), so the
solver favours robustness and determinism over speed: dense tableaus,
Bland's rule for anti-cycling, and a rank pre-pass that drops dependent
equality rows before phase 1.  Identical inputs produce bitwise-identical
outputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-11
# Reduced costs below this are treated as zero when picking the entering
# column; chasing smaller ones just walks roundoff noise.
COST_TOL = 1e-9
# A descent ray whose reduced cost is smaller than this is roundoff, not a
# real unbounded direction: its cost is clamped to zero and the solve goes on.
STALL_TOL = 1e-6
# The max-min-slack objective is unbounded for some equality systems; any
# feasible point with slack >= 0 is as good as another, so the slack is capped.
ALPHA_CAP = 1.0

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_MAX_PIVOTS = 20_000


@dataclass(frozen=True)
class MaxMinSlack:
    """Maximise the smallest variable value (capped at ``ALPHA_CAP``)."""


@dataclass(frozen=True)
class MaxVariable:
    """Maximise one variable over the nonnegative solutions of the system."""

    index: int


Objective = Union[MaxMinSlack, MaxVariable]


@dataclass(frozen=True)
class LinearProgram:
    """``a_eq @ beta = b_eq`` plus one of the objectives above."""

    a_eq: np.ndarray
    b_eq: np.ndarray
    objective: Objective = MaxMinSlack()

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a_eq, dtype=float))
        b = np.asarray(self.b_eq, dtype=float).ravel()
        if a.shape[0] != b.shape[0]:
            raise ValueError(
                f"a_eq has {a.shape[0]} rows but b_eq has {b.shape[0]} entries"
            )
        if not (np.isfinite(a).all() and np.isfinite(b).all()):
            raise ValueError("linear program contains non-finite entries")
        object.__setattr__(self, "a_eq", a)
        object.__setattr__(self, "b_eq", b)

    @property
    def n_vars(self) -> int:
        return self.a_eq.shape[1]


@dataclass(frozen=True)
class LpResult:
    """Solver outcome.

    ``alpha`` holds the achieved objective: the min-slack for MaxMinSlack,
    the variable's value for MaxVariable, and the smallest entry of ``beta``
    for plain feasibility solves.
    """

    status: str
    beta: np.ndarray | None = None
    alpha: float | None = None

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _independent_rows(a, b, pivot_tol: float, feas_tol: float):
    """Indices of a maximal independent row subset of ``[a | b]``.

    Returns None when a dependent row is inconsistent with the rows it
    depends on (the system has no solution at all).
    """
    m, n = a.shape
    work = np.hstack([a.astype(float), b.reshape(-1, 1).astype(float)])
    keep: list[int] = []
    free = list(range(m))
    for col in range(n):
        if not free:
            break
        rows = np.asarray(free)
        piv = int(rows[np.argmax(np.abs(work[rows, col]))])
        if abs(work[piv, col]) <= pivot_tol:
            continue
        keep.append(piv)
        free.remove(piv)
        if free:
            rest = np.asarray(free)
            factors = work[rest, col] / work[piv, col]
            work[rest] -= factors[:, None] * work[piv]
    for i in free:
        if abs(work[i, -1]) > feas_tol:
            return None
    return sorted(keep)


def _pivot(t, basis, i, j):
    t[i] /= t[i, j]
    col = t[:, j].copy()
    col[i] = 0.0
    t -= np.outer(col, t[i])
    # kill roundoff in the pivot column so later sign tests are exact
    t[:, j] = 0.0
    t[i, j] = 1.0
    basis[i] = j


def _pivot_until_optimal(t, basis, pivot_tol: float, cost_tol: float = COST_TOL) -> str:
    """Run the simplex on a tableau whose last row is the reduced-cost row.

    The entering column is Bland's (lowest index with a negative reduced
    cost).  The leaving row is the minimum ratio, but among near-ties the
    largest pivot element wins: at degenerate vertices the tie set routinely
    contains roundoff-sized entries, and pivoting on one of those destroys
    the tableau.  If that stable rule ever cycles, a pivot-count threshold
    switches to the strict lowest-basic-index rule, whose termination is
    guaranteed.
    """
    m = t.shape[0] - 1
    strict_after = 8 * (t.shape[0] + t.shape[1])
    for it in range(_MAX_PIVOTS):
        entering = np.flatnonzero(t[m, :-1] < -cost_tol)
        if entering.size == 0:
            return OPTIMAL
        j = int(entering[0])
        col = t[:m, j]
        # entries tiny relative to the column are elimination roundoff: they
        # must neither become pivots nor constrain the step length
        floor = max(pivot_tol, 1e-9 * float(col.max(initial=0.0)))
        viable = np.flatnonzero(col > floor)
        if viable.size == 0:
            if t[m, j] > -STALL_TOL:
                t[m, j] = 0.0
                continue
            return UNBOUNDED
        ratios = t[viable, -1] / col[viable]
        best = ratios.min()
        if it < strict_after:
            near = viable[ratios <= best + 1e-10 * (1.0 + abs(best))]
            i = int(near[np.argmax(t[near, j])])
        else:
            tied = viable[ratios == best]
            i = int(tied[np.argmin(basis[tied])])
        _pivot(t, basis, i, j)
        # degenerate steps can leave roundoff-negative basic values behind
        rhs = t[:m, -1]
        rhs[(rhs < 0.0) & (rhs > -1e-11)] = 0.0
    raise RuntimeError(f"simplex exceeded {_MAX_PIVOTS} pivots")


def _upscale_rows(e, h, pivot_tol: float = PIVOT_TOL):
    """Divide rows smaller than unit size by their max-abs entry.

    Same feasible set and rank; the feasibility tolerance only ever tightens
    because rows above unit size are left alone.
    """
    e = np.array(e, dtype=float)
    h = np.array(h, dtype=float)
    scale = np.maximum(np.abs(e).max(axis=1, initial=0.0), np.abs(h))
    small = (scale > pivot_tol) & (scale < 1.0)
    e[small] /= scale[small, None]
    h[small] /= scale[small]
    return e, h


def _solve_standard(
    e, h, c,
    feas_tol: float = FEAS_TOL,
    pivot_tol: float = PIVOT_TOL,
    prebasic: dict[int, int] | None = None,
    trusted: bool = False,
):
    """min ``c @ x``  s.t.  ``e @ x = h``, ``x >= 0``.  Returns (status, x).

    ``prebasic`` optionally maps a row index to a column that is a unit
    vector on that row with a nonnegative right-hand side (a ready-made
    slack); those rows then start phase 1 without an artificial variable.
    ``trusted`` skips the scaling and rank pre-pass for callers that already
    guarantee scaled, independent rows.
    """
    if trusted:
        e = np.asarray(e, dtype=float)
        h = np.asarray(h, dtype=float)
    else:
        e, h = _upscale_rows(e, h, pivot_tol)
        rows = _independent_rows(e, h, pivot_tol, feas_tol)
        if rows is None:
            return INFEASIBLE, None
        if prebasic and len(rows) != e.shape[0]:
            raise RuntimeError("prebasic system must have independent rows")
        e = e[rows]
        h = h[rows]
    m, n = e.shape
    c = np.asarray(c, dtype=float)
    if m == 0:
        if (c < -PIVOT_TOL).any():
            return UNBOUNDED, None
        return OPTIMAL, np.zeros(n)

    # phase 1: minimise the sum of artificial variables over the rows that
    # bring no slack of their own
    sign = np.where(h < 0.0, -1.0, 1.0)
    e1 = e * sign[:, None]
    h1 = h * sign
    prebasic = prebasic or {}
    art_rows = [i for i in range(m) if i not in prebasic]
    n_art = len(art_rows)
    t = np.zeros((m + 1, n + n_art + 1))
    t[:m, :n] = e1
    basis = np.empty(m, dtype=int)
    for idx, row in enumerate(art_rows):
        t[row, n + idx] = 1.0
        basis[row] = n + idx
    for row, col in prebasic.items():
        basis[row] = col
    t[:m, -1] = h1
    if art_rows:
        t[m, :] = -t[art_rows].sum(axis=0)
        t[m, n:n + n_art] = 0.0
    if _pivot_until_optimal(t, basis, pivot_tol) != OPTIMAL:
        raise RuntimeError("phase-1 simplex failed to reach an optimum")
    if -t[m, -1] > feas_tol:
        return INFEASIBLE, None

    # drive leftover artificials out of the basis (always possible: the
    # pre-pass left only independent rows)
    for i in range(m):
        if basis[i] >= n:
            real = np.flatnonzero(np.abs(t[i, :n]) > pivot_tol)
            if real.size == 0:
                raise RuntimeError("artificial stuck in basis of independent row")
            _pivot(t, basis, i, int(real[0]))

    # phase 2 on the real columns only
    t2 = np.ascontiguousarray(t[:, np.r_[np.arange(n), n + n_art]])
    t2[m, :] = 0.0
    t2[m, :n] = c
    for i in range(m):
        cb = c[basis[i]]
        if cb != 0.0:
            t2[m] -= cb * t2[i]
    status = _pivot_until_optimal(t2, basis, pivot_tol)
    if status != OPTIMAL:
        return status, None
    x = np.zeros(n)
    for i in range(m):
        x[basis[i]] = t2[i, -1]
    return OPTIMAL, x


def solve_feasibility(a_eq, b_eq, nonneg: bool = True, tol: float = FEAS_TOL) -> LpResult:
    """Any ``beta`` with ``a_eq @ beta = b_eq`` (and ``beta >= 0`` if asked).

    ``tol`` is the acceptance threshold on the phase-1 residual: systems
    whose best L1 constraint violation exceeds it report Infeasible.
    """
    a = np.atleast_2d(np.asarray(a_eq, dtype=float))
    b = np.asarray(b_eq, dtype=float).ravel()
    if a.shape[0] != b.shape[0]:
        raise ValueError(
            f"a_eq has {a.shape[0]} rows but b_eq has {b.shape[0]} entries"
        )
    n = a.shape[1]
    if nonneg:
        status, x = _solve_standard(a, b, np.zeros(n), feas_tol=tol)
        beta = x
    else:
        status, x = _solve_standard(np.hstack([a, -a]), b, np.zeros(2 * n), feas_tol=tol)
        beta = x[:n] - x[n:] if x is not None else None
    if status != OPTIMAL:
        return LpResult(status)
    return LpResult(OPTIMAL, beta=beta, alpha=float(beta.min()) if beta.size else 0.0)


def solve_max_min_slack(lp: LinearProgram, tol: float = FEAS_TOL) -> LpResult:
    """Maximise ``min_i beta_i`` subject to ``a_eq @ beta = b_eq``.

    The slack is capped at ``ALPHA_CAP`` so the program is always bounded.
    Callers that need a nonnegative solution must check ``alpha >= -tol``
    themselves: an Optimal result only certifies the equality system.
    """
    if not isinstance(lp.objective, MaxMinSlack):
        raise ValueError("objective must be MaxMinSlack")
    a, b = _upscale_rows(lp.a_eq, lp.b_eq)
    rows = _independent_rows(a, b, PIVOT_TOL, tol)
    if rows is None:
        return LpResult(INFEASIBLE)
    a = a[rows]
    b = b[rows]
    m, n = a.shape
    if n == 0:
        raise ValueError("linear program has no variables")

    # columns: beta+ (n), beta- (n), alpha+, alpha-, sigma (n), cap slack.
    # Rows: the equality system over beta = beta+ - beta-, then one slack row
    # sigma_i = beta_i - alpha >= 0 per variable, then alpha <= ALPHA_CAP.
    # Keeping the slacks as explicit unit columns avoids the badly mixed
    # row-sum columns a direct substitution would create, and they seed the
    # initial basis so only the equality rows need artificials.
    ncols = 3 * n + 3
    e = np.zeros((m + n + 1, ncols))
    e[:m, :n] = a
    e[:m, n:2 * n] = -a
    for i in range(n):
        row = m + i
        e[row, i] = -1.0
        e[row, n + i] = 1.0
        e[row, 2 * n] = 1.0
        e[row, 2 * n + 1] = -1.0
        e[row, 2 * n + 2 + i] = 1.0
    e[m + n, 2 * n] = 1.0
    e[m + n, 2 * n + 1] = -1.0
    e[m + n, 3 * n + 2] = 1.0
    h = np.concatenate([b, np.zeros(n), [ALPHA_CAP]])
    c = np.zeros(ncols)
    c[2 * n] = -1.0
    c[2 * n + 1] = 1.0
    prebasic = {m + i: 2 * n + 2 + i for i in range(n)}
    prebasic[m + n] = 3 * n + 2

    try:
        status, x = _solve_standard(e, h, c, feas_tol=tol, prebasic=prebasic, trusted=True)
    except RuntimeError:
        status, x = None, None
    if status == OPTIMAL:
        beta = x[:n] - x[n:2 * n]
        alpha = float(x[2 * n] - x[2 * n + 1])
        residual = np.abs(a @ beta - b).max()
        if residual <= 10 * tol and beta.min() >= alpha - 10 * tol:
            return LpResult(OPTIMAL, beta=beta, alpha=alpha)

    # Severely multiscale systems (near-coincident points plus one far
    # outlier) can defeat the optimising solve in double precision.  The
    # slack optimum is a tie-break, not a correctness requirement, so fall
    # back to a deterministic plain feasible point.
    fallback = solve_feasibility(a, b, nonneg=True, tol=tol)
    if fallback.optimal:
        return fallback
    return solve_feasibility(a, b, nonneg=False, tol=tol)


def solve(lp: LinearProgram, tol: float = FEAS_TOL) -> LpResult:
    """Dispatch on the program's objective."""
    if isinstance(lp.objective, MaxMinSlack):
        return solve_max_min_slack(lp, tol=tol)
    if isinstance(lp.objective, MaxVariable):
        idx = lp.objective.index
        n = lp.n_vars
        if not 0 <= idx < n:
            raise ValueError(f"objective index {idx} out of range for {n} variables")
        c = np.zeros(n)
        c[idx] = -1.0
        status, x = _solve_standard(lp.a_eq, lp.b_eq, c, feas_tol=tol)
        if status != OPTIMAL:
            return LpResult(status)
        return LpResult(OPTIMAL, beta=x, alpha=float(x[idx]))
    raise TypeError(f"unknown objective: {lp.objective!r}")
