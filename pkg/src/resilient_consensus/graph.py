"""Undirected communication graphs and exact robustness certification.

Robustness asks, for every pair of disjoint nonempty node subsets, whether
enough members have at least r neighbours outside their own subset.  That
membership count depends on a subset alone, not on its partner, so instead
of walking all 3^n subset pairs the checkers tabulate per-subset counts over
all 2^n subsets and combine them with a subset-lattice sweep.  The result is
exact and returns a concrete violating pair when the property fails.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np

# Exact certification tabulates all 2^n subsets; past ~14 nodes rely on the
# growth-rule certificate instead.
ENUMERATION_CAP = 14

_BIG = np.int32(1 << 20)


class CapExceededError(ValueError):
    """Graph is too large for exact robustness enumeration."""


class GraphParseError(ValueError):
    """Malformed graph file."""


@dataclass(frozen=True)
class Graph:
    """Undirected graph on nodes 0..n-1 with a set of (u, v), u < v edges."""

    n: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one node")
        for u, v in self.edges:
            if not (0 <= u < v < self.n):
                raise ValueError(f"bad edge ({u}, {v}) for n={self.n}")

    @cached_property
    def adjacency(self) -> tuple[frozenset[int], ...]:
        nbrs: list[set[int]] = [set() for _ in range(self.n)]
        for u, v in self.edges:
            nbrs[u].add(v)
            nbrs[v].add(u)
        return tuple(frozenset(s) for s in nbrs)

    @cached_property
    def neighbor_masks(self) -> tuple[int, ...]:
        masks = [0] * self.n
        for u, v in self.edges:
            masks[u] |= 1 << v
            masks[v] |= 1 << u
        return tuple(masks)

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])


@dataclass(frozen=True)
class RobustnessReport:
    """Outcome of a robustness check; ``s`` is None for plain r-robustness.

    When ``holds`` is false, ``witness`` is a disjoint nonempty subset pair
    that fails every clause of the checked property.
    """

    r: int
    s: int | None
    holds: bool
    witness: tuple[frozenset[int], frozenset[int]] | None = None


def make_graph(n: int, edges: Iterable[tuple[int, int]]) -> Graph:
    """Normalise an edge list (either orientation, no self-loops) to a Graph."""
    norm = set()
    for u, v in edges:
        if u == v:
            raise ValueError(f"self-loop at node {u}")
        norm.add((min(u, v), max(u, v)))
    return Graph(n, frozenset(norm))


def complete_graph(n: int) -> Graph:
    return make_graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise ValueError("a cycle needs at least 3 nodes")
    return make_graph(n, [(i, (i + 1) % n) for i in range(n)])


def neighbors(g: Graph, i: int) -> frozenset[int]:
    """Ids adjacent to node i (never including i itself)."""
    if not 0 <= i < g.n:
        raise ValueError(f"node {i} out of range for n={g.n}")
    return g.adjacency[i]


def check_min_degree(g: Graph, d: int, F: int) -> bool:
    """Whether every node has at least (d+1)F+1 neighbours."""
    if d < 1 or F < 0:
        raise ValueError("need d >= 1 and F >= 0")
    need = (d + 1) * F + 1
    return all(g.degree(i) >= need for i in range(g.n))


def _popcount(v: np.ndarray) -> np.ndarray:
    """Vectorised 32-bit population count."""
    v = v - ((v >> np.uint32(1)) & np.uint32(0x55555555))
    v = (v & np.uint32(0x33333333)) + ((v >> np.uint32(2)) & np.uint32(0x33333333))
    v = (v + (v >> np.uint32(4))) & np.uint32(0x0F0F0F0F)
    return ((v * np.uint32(0x01010101)) >> np.uint32(24)).astype(np.int32)


def _subset_stats(g: Graph, r: int):
    """Per-subset counts over all 2^n bitmask subsets.

    Returns (counts, sizes): counts[S] is the number of members of S with at
    least r neighbours outside S, sizes[S] the cardinality of S.
    """
    n = g.n
    masks = np.arange(1 << n, dtype=np.uint32)
    counts = np.zeros(1 << n, dtype=np.int32)
    for i in range(n):
        nb = np.uint32(g.neighbor_masks[i])
        outside_ok = _popcount(nb & ~masks) >= r
        member = (masks >> np.uint32(i)) & np.uint32(1)
        counts += outside_ok * member.astype(np.int32)
    return counts, _popcount(masks)


def _any_flagged_submask(flag: np.ndarray) -> np.ndarray:
    """out[S] = whether some flagged subset is contained in S."""
    out = flag.copy()
    size = out.shape[0]
    step = 1
    while step < size:
        v = out.reshape(-1, 2, step)
        v[:, 1, :] |= v[:, 0, :]
        step *= 2
    return out


def _min_over_submasks(values: np.ndarray) -> np.ndarray:
    """out[S] = min of values over all subsets of S (including S itself)."""
    out = values.copy()
    size = out.shape[0]
    step = 1
    while step < size:
        v = out.reshape(-1, 2, step)
        np.minimum(v[:, 1, :], v[:, 0, :], out=v[:, 1, :])
        step *= 2
    return out


def _mask_to_set(mask: int) -> frozenset[int]:
    return frozenset(i for i in range(mask.bit_length()) if mask >> i & 1)


def _check_cap(g: Graph, cap: int) -> None:
    if g.n > cap:
        raise CapExceededError(
            f"exact robustness check supports up to {cap} nodes, graph has {g.n}"
        )


def is_r_robust(g: Graph, r: int, cap: int = ENUMERATION_CAP) -> RobustnessReport:
    """Whether every disjoint nonempty subset pair has, in one of its sides,
    a node with at least r neighbours outside that side."""
    if r < 1:
        raise ValueError("r must be at least 1")
    _check_cap(g, cap)
    counts, _ = _subset_stats(g, r)
    bad = counts == 0
    bad[0] = False
    full = (1 << g.n) - 1
    complement = full ^ np.arange(1 << g.n)
    violating = np.flatnonzero(bad & _any_flagged_submask(bad)[complement])
    if violating.size == 0:
        return RobustnessReport(r=r, s=None, holds=True)
    s_mask = int(violating[0])
    t_mask = next(
        int(t) for t in np.flatnonzero(bad) if int(t) & s_mask == 0
    )
    return RobustnessReport(
        r=r, s=None, holds=False, witness=(_mask_to_set(s_mask), _mask_to_set(t_mask))
    )


def is_rs_robust(g: Graph, r: int, s: int, cap: int = ENUMERATION_CAP) -> RobustnessReport:
    """Whether every disjoint nonempty subset pair satisfies one of: all of
    side one qualifies, all of side two qualifies, or at least s nodes across
    both sides have r neighbours outside their own side."""
    if r < 1 or s < 1:
        raise ValueError("need r >= 1 and s >= 1")
    _check_cap(g, cap)
    counts, sizes = _subset_stats(g, r)
    partial = counts < sizes  # nonempty sides where not every member qualifies
    partial[0] = False
    masked = np.where(partial, counts, _BIG)
    best_partner = _min_over_submasks(masked)
    full = (1 << g.n) - 1
    complement = full ^ np.arange(1 << g.n)
    failing = np.flatnonzero(partial & (counts + best_partner[complement] < s))
    if failing.size == 0:
        return RobustnessReport(r=r, s=s, holds=True)
    s_mask = int(failing[0])
    c_s = int(counts[s_mask])
    t_mask = next(
        int(t)
        for t in np.flatnonzero(partial & (counts + c_s < s))
        if int(t) & s_mask == 0
    )
    return RobustnessReport(
        r=r, s=s, holds=False, witness=(_mask_to_set(s_mask), _mask_to_set(t_mask))
    )


def grow_robust_graph(
    g: Graph,
    r: int,
    s: int,
    new_node_degree: int,
    seed,
    cap: int = ENUMERATION_CAP,
) -> Graph:
    """Attach one new node to ``new_node_degree`` seeded-random distinct nodes.

    Attaching with degree at least r+s-1 preserves (r, s)-robustness, so
    growing an already robust graph yields a robust one; while the result
    still fits under the enumeration cap this is re-certified exactly.
    """
    if new_node_degree > g.n:
        raise ValueError(f"cannot attach to {new_node_degree} of {g.n} nodes")
    if new_node_degree < r + s - 1:
        raise ValueError(
            f"attachment degree {new_node_degree} below r+s-1={r + s - 1} "
            "does not preserve robustness"
        )
    rng = np.random.default_rng(seed)
    targets = sorted(int(t) for t in rng.choice(g.n, size=new_node_degree, replace=False))
    grown = Graph(g.n + 1, g.edges | {(t, g.n) for t in targets})
    if grown.n <= cap:
        report = is_rs_robust(grown, r, s, cap=cap)
        if not report.holds:
            raise ValueError(
                "grown graph is not robust; the base graph violated the "
                f"(r={r}, s={s}) precondition"
            )
    return grown


def grow_to(
    g: Graph,
    r: int,
    s: int,
    new_node_degree: int,
    target_n: int,
    seed: int,
    cap: int = ENUMERATION_CAP,
) -> Graph:
    """Repeat ``grow_robust_graph`` until the graph has ``target_n`` nodes."""
    if target_n < g.n:
        raise ValueError("target size smaller than the starting graph")
    step = 0
    while g.n < target_n:
        g = grow_robust_graph(g, r, s, new_node_degree, seed=(seed, step), cap=cap)
        step += 1
    return g


def read_graph(path) -> Graph:
    """Parse the text format: first data line ``n``, then ``u v`` per edge.

    Blank lines are skipped and ``#`` starts a comment.
    """
    n = None
    edges = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if n is None:
                if len(parts) != 1:
                    raise GraphParseError(f"{path}:{lineno}: expected node count")
                try:
                    n = int(parts[0])
                except ValueError:
                    raise GraphParseError(f"{path}:{lineno}: bad node count {parts[0]!r}") from None
                continue
            if len(parts) != 2:
                raise GraphParseError(f"{path}:{lineno}: expected 'u v'")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphParseError(f"{path}:{lineno}: bad edge {line!r}") from None
            edges.append((u, v))
    if n is None:
        raise GraphParseError(f"{path}: empty graph file")
    try:
        return make_graph(n, edges)
    except ValueError as exc:
        raise GraphParseError(f"{path}: {exc}") from None


def write_graph(g: Graph, path) -> None:
    """Emit the text format with edges sorted lexicographically."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{g.n}\n")
        for u, v in sorted(g.edges):
            fh.write(f"{u} {v}\n")
