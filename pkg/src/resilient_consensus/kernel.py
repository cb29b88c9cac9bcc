"""One resilient update for one agent: sorted extremes, middle points, mean.

Each round an agent sorts the values received from its neighbours along the
round's active coordinate, takes the (d+1)F+1 lowest and highest of them,
computes one point inside the intersection of each group's reduced-subset
hulls (the "middle points"), and averages them with its own state.  The
middle points are immune to any F of the received values being hostile.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .geometry import MEMBERSHIP_TOL, as_points, intersection_system, recover_intersection_point
from .lp import FEAS_TOL, LinearProgram, MaxMinSlack, solve_max_min_slack


class NeighborhoodTooSmallError(ValueError):
    """Fewer received values than the sorted-extremes rule needs."""


def kappa(d: int, F: int) -> int:
    """Size of each sorted extreme group: (d+1)F+1."""
    return (d + 1) * F + 1


def active_dimension(k: int, d: int) -> int:
    """1-based coordinate sorted at round k: (k mod d) + 1."""
    if k < 0:
        raise ValueError("round index must be nonnegative")
    if d < 1:
        raise ValueError("dimension must be positive")
    return k % d + 1


@dataclass(frozen=True)
class MiddlePointProblem:
    """A group of exactly (d+1)F+1 points to take a middle point of."""

    subset: np.ndarray
    d: int
    F: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be positive")
        if self.F < 0:
            raise ValueError("fault bound must be nonnegative")
        pts = as_points(self.subset, dim=self.d)
        if pts.shape[0] != kappa(self.d, self.F):
            raise ValueError(
                f"middle-point group must have {kappa(self.d, self.F)} points, "
                f"got {pts.shape[0]}"
            )
        object.__setattr__(self, "subset", pts)

    @property
    def r(self) -> int:
        """Number of reduced-subset hulls being intersected."""
        return comb(kappa(self.d, self.F), self.F)

    @property
    def cols_per_block(self) -> int:
        """Points per reduced subset: dF+1."""
        return self.d * self.F + 1


@dataclass(frozen=True)
class RoundInputs:
    """What one benign agent works with in one round."""

    own_state: np.ndarray
    received: np.ndarray
    k: int

    def __post_init__(self):
        own = np.asarray(self.own_state, dtype=float).ravel()
        rec = as_points(self.received, dim=own.shape[0])
        object.__setattr__(self, "own_state", own)
        object.__setattr__(self, "received", rec)

    @property
    def p(self) -> int:
        return active_dimension(self.k, self.own_state.shape[0])


def select_extreme_subsets(received, p: int, d: int, F: int):
    """Split the received values into the (d+1)F+1 lowest and highest along
    the p-th coordinate (1-based).

    The sort is stable, so ties keep the caller's row order; callers that
    pass rows ordered by sender id get the (value, sender id) tie-break.
    """
    pts = as_points(received)
    m = pts.shape[0]
    kap = kappa(d, F)
    if m < kap:
        raise NeighborhoodTooSmallError(
            f"need at least {kap} received values for d={d}, F={F}, got {m}"
        )
    if not 1 <= p <= pts.shape[1]:
        raise ValueError(f"active dimension {p} out of range for d={pts.shape[1]}")
    order = np.argsort(pts[:, p - 1], kind="stable")
    return pts[order[:kap]], pts[order[m - kap:]]


def assemble_lemma1_system(prob: MiddlePointProblem) -> LinearProgram:
    """Stack the per-subset convex-combination constraints into one program.

    Block j of the block-diagonal coefficient matrix holds the j-th reduced
    subset's points as columns; circulant difference rows force all block
    combinations to coincide and one row per block normalises its weights.
    Weight nonnegativity is expressed through the max-min-slack objective.
    """
    a, b = intersection_system(prob.subset, prob.F)
    return LinearProgram(a, b, MaxMinSlack())


def middle_point(prob: MiddlePointProblem, tol: float = FEAS_TOL) -> np.ndarray:
    """The max-min-slack point of the group's reduced-subset intersection.

    The intersection is nonempty for every well-formed group, so an
    infeasible solve (or a negative optimal slack) can only mean a numerical
    failure and is raised as a hard error.
    """
    res = solve_max_min_slack(assemble_lemma1_system(prob), tol=tol)
    # the weights may carry nonnegativity drift up to the membership
    # tolerance; anything worse signals a genuine numerical failure
    if not res.optimal or res.alpha < -MEMBERSHIP_TOL:
        raise RuntimeError(
            "middle-point system unexpectedly infeasible "
            f"(status={res.status}, alpha={res.alpha})"
        )
    return recover_intersection_point(prob.subset, prob.F, res.beta)


def update_state(x, y, z) -> np.ndarray:
    """Componentwise mean of the old state and the two middle points."""
    xv = np.asarray(x, dtype=float).ravel()
    yv = np.asarray(y, dtype=float).ravel()
    zv = np.asarray(z, dtype=float).ravel()
    if not xv.shape == yv.shape == zv.shape:
        raise ValueError("state and middle points must share one dimension")
    return (xv + yv + zv) / 3.0


def round_middle_points(inputs: RoundInputs, d: int, F: int):
    """(active dimension, low middle point, high middle point) for a round."""
    p = active_dimension(inputs.k, d)
    low, high = select_extreme_subsets(inputs.received, p, d, F)
    y = middle_point(MiddlePointProblem(low, d, F))
    z = middle_point(MiddlePointProblem(high, d, F))
    return p, y, z


def benign_round(inputs: RoundInputs, d: int, F: int) -> np.ndarray:
    """The full per-round update of a rule-following agent."""
    _, y, z = round_middle_points(inputs, d, F)
    return update_state(inputs.own_state, y, z)
