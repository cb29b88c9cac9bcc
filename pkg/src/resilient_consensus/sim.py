"""Synchronous-round simulation with per-round metrics and CSV export.

All agents read round-k values and write round-k+1 values; links are
reliable and rounds are a strict barrier.  Benign agents follow the
middle-point update (optionally split across dimension groups), faulty
agents broadcast whatever their strategy dictates, per receiver.  Runs are
bitwise reproducible for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .adversary import (
    AdversaryStrategy,
    AttackModel,
    adversary_value,
    validate_fault_set,
    validate_strategy,
)
from .geometry import hull_contains
from .graph import Graph
from .kernel import (
    NeighborhoodTooSmallError,
    RoundInputs,
    kappa,
    round_middle_points,
)

CONVERGED = "converged"
ROUND_LIMIT = "round_limit"

# Benign states stay in the initial benign hull up to LP residual; 1e-9
# matches the membership check used to certify that claim.
VALIDITY_TOL = 1e-9


class ConfigError(ValueError):
    """Simulation configuration is inconsistent."""


@dataclass(frozen=True)
class SimConfig:
    """Full description of one experiment.

    Exactly one of ``init_states`` (benign id -> tuple of floats) and
    ``init_box`` (d pairs of (lo, hi), sampled with the run seed) must be
    given.  ``grouping`` optionally partitions the 1-based dimensions into
    blocks updated independently each round.
    """

    graph: Graph
    d: int
    F: int
    attack: AttackModel
    faults: frozenset[int] = frozenset()
    strategies: Mapping[int, AdversaryStrategy] = field(default_factory=dict)
    init_states: Mapping[int, tuple[float, ...]] | None = None
    init_box: tuple[tuple[float, float], ...] | None = None
    max_rounds: int = 1000
    convergence_tol: float = 1e-6
    seed: int = 0
    grouping: tuple[tuple[int, ...], ...] | None = None

    @property
    def benign(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.graph.n) if i not in self.faults)

    @property
    def groups(self) -> tuple[tuple[int, ...], ...]:
        return self.grouping or (tuple(range(1, self.d + 1)),)


def validate_config(cfg: SimConfig) -> None:
    if cfg.d < 1:
        raise ConfigError("d must be positive")
    if cfg.F < 0:
        raise ConfigError("F must be nonnegative")
    if cfg.max_rounds < 0:
        raise ConfigError("max_rounds must be nonnegative")
    if cfg.convergence_tol <= 0:
        raise ConfigError("convergence_tol must be positive")
    for i in cfg.faults:
        if not 0 <= i < cfg.graph.n:
            raise ConfigError(f"fault id {i} out of range")
    if not cfg.benign:
        raise ConfigError("at least one benign agent is required")
    if not validate_fault_set(cfg.graph, cfg.faults, cfg.attack):
        raise ConfigError(
            f"fault set {sorted(cfg.faults)} violates the "
            f"{cfg.attack.kind} model with F={cfg.attack.F}"
        )
    if set(cfg.strategies) != set(cfg.faults):
        raise ConfigError("strategies must be given for exactly the faulty nodes")
    for i, strat in cfg.strategies.items():
        try:
            validate_strategy(strat, cfg.d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"strategy for node {i}: {exc}") from None
    if (cfg.init_states is None) == (cfg.init_box is None):
        raise ConfigError("give exactly one of init_states and init_box")
    if cfg.init_box is not None:
        box = np.asarray(cfg.init_box, dtype=float)
        if box.shape != (cfg.d, 2):
            raise ConfigError(f"init_box must be {cfg.d} (lo, hi) pairs")
        if (box[:, 0] > box[:, 1]).any():
            raise ConfigError("init_box has lo > hi")
    if cfg.init_states is not None:
        if set(cfg.init_states) != set(cfg.benign):
            raise ConfigError("init_states must cover exactly the benign nodes")
        for i, x in cfg.init_states.items():
            if len(x) != cfg.d:
                raise ConfigError(f"initial state of node {i} has wrong dimension")
    if cfg.grouping is not None:
        flat = [q for block in cfg.grouping for q in block]
        if not cfg.grouping or any(not block for block in cfg.grouping):
            raise ConfigError("grouping blocks must be nonempty")
        if sorted(flat) != list(range(1, cfg.d + 1)):
            raise ConfigError("grouping must partition dimensions 1..d")


@dataclass(frozen=True)
class MetricsRecord:
    """Per-round extrema over benign states, all computed from scratch.

    ``low``/``high``/``spread`` have one entry per dimension; ``validity``
    says every benign state sits inside the hull of the initial benign
    states.  Faulty broadcasts never enter these extrema.
    """

    low: np.ndarray
    high: np.ndarray
    spread: np.ndarray
    max_pairwise: float
    validity: bool


@dataclass(frozen=True)
class RoundRecord:
    k: int
    states: dict[int, np.ndarray]
    broadcasts: dict[int, dict[int, np.ndarray]]
    middles: dict[int, list[tuple[tuple[int, ...], np.ndarray, np.ndarray]]]
    metrics: MetricsRecord


@dataclass(frozen=True)
class Trace:
    config: SimConfig
    rounds: list[RoundRecord]
    status: str

    def spread_history(self) -> np.ndarray:
        """(rounds, d) array of per-dimension benign spreads."""
        return np.array([rec.metrics.spread for rec in self.rounds])

    @property
    def validity_always(self) -> bool:
        return all(rec.metrics.validity for rec in self.rounds)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    @property
    def rounds_used(self) -> int:
        return self.rounds[-1].k


def initial_states(cfg: SimConfig) -> dict[int, np.ndarray]:
    """Benign starting states: explicit, or a seeded uniform box draw
    (benign ids in ascending order, so the draw is reproducible)."""
    if cfg.init_states is not None:
        return {i: np.asarray(cfg.init_states[i], dtype=float) for i in cfg.benign}
    box = np.asarray(cfg.init_box, dtype=float)
    rng = np.random.default_rng(cfg.seed)
    return {
        i: box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random(cfg.d)
        for i in cfg.benign
    }


def broadcasts_for_round(
    cfg: SimConfig, states: Mapping[int, np.ndarray], k: int
) -> dict[int, dict[int, np.ndarray]]:
    """Per-receiver values every faulty node sends at round k."""
    return {
        f: {
            j: adversary_value(cfg.strategies[f], k, f, j, states)
            for j in sorted(cfg.graph.adjacency[f])
        }
        for f in sorted(cfg.faults)
    }


def received_matrix(
    cfg: SimConfig,
    states: Mapping[int, np.ndarray],
    broadcasts: Mapping[int, Mapping[int, np.ndarray]],
    i: int,
) -> np.ndarray:
    """Values agent i receives this round, one row per neighbour in id order."""
    rows = [
        broadcasts[j][i] if j in cfg.faults else states[j]
        for j in sorted(cfg.graph.adjacency[i])
    ]
    return np.array(rows, dtype=float)


UpdateRule = Callable[[np.ndarray, np.ndarray, int], tuple[np.ndarray, list]]


def _middle_point_rule(cfg: SimConfig) -> UpdateRule:
    groups = cfg.groups

    def rule(own: np.ndarray, received: np.ndarray, k: int):
        new = np.empty(cfg.d)
        middles = []
        for dims in groups:
            cols = np.asarray(dims) - 1
            _, y, z = round_middle_points(
                RoundInputs(own[cols], received[:, cols], k), len(dims), cfg.F
            )
            new[cols] = (own[cols] + y + z) / 3.0
            middles.append((dims, y, z))
        return new, middles

    return rule


def _check_degrees(cfg: SimConfig) -> None:
    need = max(kappa(len(dims), cfg.F) for dims in cfg.groups)
    for i in cfg.benign:
        if cfg.graph.degree(i) < need:
            raise NeighborhoodTooSmallError(
                f"benign node {i} has {cfg.graph.degree(i)} neighbours, "
                f"needs at least {need}"
            )


def _metrics(
    states: Mapping[int, np.ndarray],
    benign: tuple[int, ...],
    init_arr: np.ndarray,
    tol: float = VALIDITY_TOL,
) -> MetricsRecord:
    arr = np.array([states[i] for i in benign])
    low = arr.min(axis=0)
    high = arr.max(axis=0)
    diffs = arr[:, None, :] - arr[None, :, :]
    max_pairwise = float(np.sqrt((diffs ** 2).sum(axis=2)).max())
    validity = all(hull_contains(x, init_arr, tol=tol) for x in arr)
    return MetricsRecord(low, high, high - low, max_pairwise, validity)


def step(
    cfg: SimConfig, snapshot: Mapping[int, np.ndarray], k: int
) -> dict[int, np.ndarray]:
    """One synchronous round: every benign agent's next state from the
    round-k values its neighbours sent it."""
    next_states, _, _ = _advance(cfg, dict(snapshot), k, _middle_point_rule(cfg))
    return next_states


def _advance(cfg: SimConfig, states: dict[int, np.ndarray], k: int, rule: UpdateRule):
    bc = broadcasts_for_round(cfg, states, k)
    next_states = {}
    middles = {}
    for i in cfg.benign:
        received = received_matrix(cfg, states, bc, i)
        next_states[i], middles[i] = rule(states[i], received, k)
    return next_states, bc, middles


def _run_with_rule(cfg: SimConfig, rule: UpdateRule) -> Trace:
    validate_config(cfg)
    states = initial_states(cfg)
    benign = cfg.benign
    init_arr = np.array([states[i] for i in benign])
    rounds: list[RoundRecord] = []
    k = 0
    while True:
        metrics = _metrics(states, benign, init_arr)
        done = float(metrics.spread.max()) < cfg.convergence_tol
        if done or k == cfg.max_rounds:
            bc = broadcasts_for_round(cfg, states, k)
            rounds.append(RoundRecord(k, dict(states), bc, {}, metrics))
            status = CONVERGED if done else ROUND_LIMIT
            return Trace(cfg, rounds, status)
        next_states, bc, middles = _advance(cfg, states, k, rule)
        rounds.append(RoundRecord(k, dict(states), bc, middles, metrics))
        states = next_states
        k += 1


def run(cfg: SimConfig) -> Trace:
    """Run the middle-point update until the benign spread drops below the
    convergence tolerance in every dimension, or the round limit hits."""
    validate_config(cfg)
    _check_degrees(cfg)
    return _run_with_rule(cfg, _middle_point_rule(cfg))


def run_grouped(cfg: SimConfig) -> Trace:
    """Like ``run`` but requires an explicit dimension grouping."""
    if cfg.grouping is None:
        raise ConfigError("run_grouped needs a grouping in the config")
    return run(cfg)


def rate_bound_check(trace: Trace, d: int, n_benign: int, atol: float = 1e-9) -> bool:
    """Whether the first dimension's spread contracts at least by the
    guaranteed factor over every window of d*n_benign rounds."""
    window = d * n_benign
    spread1 = trace.spread_history()[:, 0]
    factor = 1.0 - 0.5 * 3.0 ** (-window)
    for k in range(len(spread1) - window):
        if spread1[k + window] > factor * spread1[k] + atol:
            return False
    return True


def _fmt(x: float) -> str:
    return repr(float(x))


def write_trace_csv(trace: Trace, path) -> None:
    """One row per (round, agent): round, agent_id, is_faulty, x_1..x_d.

    Faulty rows record the value sent to the agent's lowest-id neighbour
    (the full per-receiver matrix lives in the Trace object only).
    """
    d = trace.config.d
    cols = ",".join(f"x_{q}" for q in range(1, d + 1))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"round,agent_id,is_faulty,{cols}\n")
        for rec in trace.rounds:
            for i in range(trace.config.graph.n):
                if i in trace.config.faults:
                    sent = rec.broadcasts[i]
                    value = sent[min(sent)] if sent else np.full(d, np.nan)
                    flag = 1
                else:
                    value = rec.states[i]
                    flag = 0
                vals = ",".join(_fmt(v) for v in value)
                fh.write(f"{rec.k},{i},{flag},{vals}\n")


def write_metrics_csv(trace: Trace, path) -> None:
    """One row per round: per-dimension extrema and spread, then the maximum
    pairwise benign distance and the validity flag."""
    d = trace.config.d
    header = ["round"]
    for q in range(1, d + 1):
        header += [f"m_{q}", f"M_{q}", f"delta_{q}"]
    header += ["max_pairwise_distance", "validity"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for rec in trace.rounds:
            met = rec.metrics
            fields = [str(rec.k)]
            for q in range(d):
                fields += [_fmt(met.low[q]), _fmt(met.high[q]), _fmt(met.spread[q])]
            fields += [_fmt(met.max_pairwise), str(int(met.validity))]
            fh.write(",".join(fields) + "\n")
