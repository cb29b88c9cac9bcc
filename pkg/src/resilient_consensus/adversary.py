"""Fault-set placement rules and misbehaving-agent value generators.

A faulty agent may send different values to different receivers in the same
round (Byzantine behaviour), and it sees the full previous-round benign
snapshot: strategies are written for the worst case, where the attacker
knows the topology, the update rule, and every state.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sin
from typing import Mapping, Union

import numpy as np

from .graph import Graph

F_TOTAL = "f_total"
F_LOCAL = "f_local"


@dataclass(frozen=True)
class AttackModel:
    """Scope of the threat: at most F faulty overall, or per neighbourhood."""

    kind: str
    F: int

    def __post_init__(self):
        if self.kind not in (F_TOTAL, F_LOCAL):
            raise ValueError(f"attack model must be {F_TOTAL!r} or {F_LOCAL!r}")
        if self.F < 0:
            raise ValueError("fault bound must be nonnegative")


def validate_fault_set(g: Graph, faults, model: AttackModel) -> bool:
    """Whether the fault placement respects the attack model's bound."""
    fault_set = frozenset(faults)
    for i in fault_set:
        if not 0 <= i < g.n:
            raise ValueError(f"fault id {i} out of range for n={g.n}")
    if model.kind == F_TOTAL:
        return len(fault_set) <= model.F
    return all(len(g.adjacency[i] & fault_set) <= model.F for i in range(g.n))


@dataclass(frozen=True)
class Scripted:
    """Fixed 2-D trajectory: a sine sweep in x_1 and a slow ramp in x_2."""


@dataclass(frozen=True)
class Stubborn:
    """Broadcast the same constant to everyone, forever."""

    value: tuple[float, ...]


@dataclass(frozen=True)
class RandomBounded:
    """Seeded uniform draw from a box, fresh per (round, sender, receiver)."""

    box: tuple[tuple[float, float], ...]
    seed: int


@dataclass(frozen=True)
class HullEscape:
    """Pull each receiver toward ``target``, overshooting past it by ``gain``
    times the gap from the benign centroid (computed without the receiver,
    so different receivers get different values)."""

    target: tuple[float, ...]
    gain: float


AdversaryStrategy = Union[Scripted, Stubborn, RandomBounded, HullEscape]


def validate_strategy(strategy: AdversaryStrategy, d: int) -> None:
    """Raise if the strategy cannot produce d-dimensional values."""
    if isinstance(strategy, Scripted):
        if d != 2:
            raise ValueError("scripted strategy produces 2-D values")
    elif isinstance(strategy, Stubborn):
        if len(strategy.value) != d:
            raise ValueError(f"stubborn value has {len(strategy.value)} entries, need {d}")
    elif isinstance(strategy, RandomBounded):
        box = np.asarray(strategy.box, dtype=float)
        if box.shape != (d, 2):
            raise ValueError(f"random_bounded box must be {d} (lo, hi) pairs")
        if (box[:, 0] > box[:, 1]).any():
            raise ValueError("random_bounded box has lo > hi")
    elif isinstance(strategy, HullEscape):
        if len(strategy.target) != d:
            raise ValueError(f"hull_escape target has {len(strategy.target)} entries, need {d}")
        if not np.isfinite(strategy.gain):
            raise ValueError("hull_escape gain must be finite")
    else:
        raise TypeError(f"unknown adversary strategy: {strategy!r}")


def adversary_value(
    strategy: AdversaryStrategy,
    k: int,
    sender: int,
    receiver: int,
    observation: Mapping[int, np.ndarray],
) -> np.ndarray:
    """Value the faulty ``sender`` transmits to ``receiver`` at round ``k``.

    ``observation`` maps benign agent ids to their current states.
    """
    if isinstance(strategy, Scripted):
        return np.array([4.5 * sin(k / 5.0), k / 25.0 + 1.0])
    if isinstance(strategy, Stubborn):
        return np.asarray(strategy.value, dtype=float)
    if isinstance(strategy, RandomBounded):
        box = np.asarray(strategy.box, dtype=float)
        rng = np.random.default_rng((strategy.seed, k, sender, receiver))
        return box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random(box.shape[0])
    if isinstance(strategy, HullEscape):
        target = np.asarray(strategy.target, dtype=float)
        others = [x for i, x in sorted(observation.items()) if i != receiver]
        if not others:
            others = [x for _, x in sorted(observation.items())]
        centroid = np.mean(others, axis=0)
        return target + strategy.gain * (target - centroid)
    raise TypeError(f"unknown adversary strategy: {strategy!r}")
