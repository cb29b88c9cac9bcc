"""Coordinate-wise trimmed-mean baseline (scalar W-MSR on every dimension).

Each dimension is treated as an independent scalar consensus: an agent
discards up to F received values strictly above its own (the largest ones)
and up to F strictly below (the smallest ones), then averages itself with
the survivors.  Per-dimension trimming confines benign states to the
initial bounding box, not to the initial convex hull, which is exactly the
gap the middle-point update closes.
"""

from __future__ import annotations

import numpy as np

from .kernel import NeighborhoodTooSmallError
from .sim import SimConfig, Trace, _run_with_rule, validate_config


def wmsr_scalar_round(own: float, received, F: int) -> float:
    """One trimmed-mean update on scalars.

    Among ties at the trim boundary the later-listed values are dropped
    first, so with rows ordered by sender id the higher ids lose out; the
    average is unaffected because tied values are equal.
    """
    if F < 0:
        raise ValueError("F must be nonnegative")
    vals = np.asarray(received, dtype=float).ravel()
    if vals.size == 0:
        raise ValueError("received values must be nonempty")
    order = np.argsort(vals, kind="stable")
    above = [i for i in order if vals[i] > own]
    below = [i for i in order if vals[i] < own]
    drop = set(above[len(above) - min(F, len(above)):])
    drop |= set(below[: min(F, len(below))])
    kept = [float(vals[i]) for i in order if i not in drop]
    return (float(own) + sum(kept)) / (1 + len(kept))


def wmsr_vector_run(cfg: SimConfig) -> Trace:
    """Run the per-dimension trimmed mean under the same engine, producing
    the same trace and metrics schema as the middle-point run."""
    validate_config(cfg)
    for i in cfg.benign:
        if cfg.graph.degree(i) < 1:
            raise NeighborhoodTooSmallError(f"benign node {i} has no neighbours")

    def rule(own: np.ndarray, received: np.ndarray, k: int):
        new = np.array(
            [wmsr_scalar_round(own[q], received[:, q], cfg.F) for q in range(cfg.d)]
        )
        return new, []

    return _run_with_rule(cfg, rule)
