"""
Static Brandes — framework Step 1.

Provides:
  - SourceData             → per-source (d, σ, δ) columns, the BD[s] triple
  - CentralityScores       → VBC vector + EBC map
  - PartialScores          → sparse per-source score deltas (what a Map task emits)
  - brandes_single_source  → BFS + predecessor-free dependency accumulation
  - brandes_range / reduce_ranges → tree-ordered sums for a source range, combined per graph
  - brandes_full           → all sources

Dependency accumulation scans neighbors instead of predecessor lists: levels
are processed from the deepest down, and each vertex pulls its dependency from
the neighbors one level below it:

    δ[v] = Σ_{w ∈ N(v), d[w] = d[v]+1}  σ[v]/σ[w] · (1 + δ[w])

The incremental engine uses the very same expression (pull_dependency), so a
recomputed δ is bit-identical to the one a fresh run would produce.
Scores use the ordered-pair convention (no halving for undirected graphs).
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional

import numpy as np

from graph_core import DynamicGraph, Edge, edge_key

log = logging.getLogger("brandes")

UNREACHABLE = int(np.iinfo(np.int32).max)
DIST_DTYPE = np.int32
SIGMA_DTYPE = np.uint64
DELTA_DTYPE = np.float64


# ─── Data types ──────────────────────────────────────────────

@dataclass
class SourceData:
    """BD[s]: distance, shortest-path count and dependency of every vertex w.r.t. one source."""
    d: np.ndarray
    sigma: np.ndarray
    delta: np.ndarray

    @classmethod
    def from_lists(cls, d: list[int], sigma: list[int], delta: list[float]) -> "SourceData":
        return cls(
            d=np.array(d, dtype=DIST_DTYPE),
            sigma=np.array(sigma, dtype=SIGMA_DTYPE),
            delta=np.array(delta, dtype=DELTA_DTYPE),
        )

    @classmethod
    def isolated(cls, n: int, s: int) -> "SourceData":
        """A source that reaches nothing but itself."""
        d = np.full(n, UNREACHABLE, dtype=DIST_DTYPE)
        sigma = np.zeros(n, dtype=SIGMA_DTYPE)
        d[s] = 0
        sigma[s] = 1
        return cls(d=d, sigma=sigma, delta=np.zeros(n, dtype=DELTA_DTYPE))

    @property
    def n(self) -> int:
        return len(self.d)

    def grown(self, n: int) -> "SourceData":
        """Copy extended to n vertices; the new vertices are unreachable."""
        extra = n - self.n
        return SourceData(
            d=np.concatenate([self.d, np.full(extra, UNREACHABLE, dtype=DIST_DTYPE)]),
            sigma=np.concatenate([self.sigma, np.zeros(extra, dtype=SIGMA_DTYPE)]),
            delta=np.concatenate([self.delta, np.zeros(extra, dtype=DELTA_DTYPE)]),
        )

    def copy(self) -> "SourceData":
        return SourceData(self.d.copy(), self.sigma.copy(), self.delta.copy())

    def same_as(self, other: "SourceData") -> bool:
        """Bit-level equality of all three columns."""
        return (
            np.array_equal(self.d, other.d)
            and np.array_equal(self.sigma, other.sigma)
            and self.delta.tobytes() == other.delta.tobytes()
        )


@dataclass
class PartialScores:
    """Sparse VBC/EBC deltas contributed by one source (or a group of sources)."""
    vbc: dict[int, float] = field(default_factory=dict)
    ebc: dict[Edge, float] = field(default_factory=dict)


@dataclass
class CentralityScores:
    """VBC per vertex and EBC per current edge."""
    vbc: np.ndarray
    ebc: dict[Edge, float]

    @classmethod
    def zeros(cls, g: DynamicGraph) -> "CentralityScores":
        return cls(vbc=np.zeros(g.n, dtype=np.float64), ebc={e: 0.0 for e in g.edges()})

    def copy(self) -> "CentralityScores":
        return CentralityScores(self.vbc.copy(), dict(self.ebc))

    def add_vertex(self) -> None:
        self.vbc = np.append(self.vbc, 0.0)

    def apply(self, partial: PartialScores) -> None:
        """Add one source's deltas. Call in ascending source order for reproducible sums."""
        vbc = self.vbc
        for v, dv in partial.vbc.items():
            vbc[v] += dv
        ebc = self.ebc
        for e, de in partial.ebc.items():
            ebc[e] += de


# ─── Single source ───────────────────────────────────────────

def pull_dependency(adj: list[list[int]], v: int, d: list[int], sigma: list[int], delta: list[float]) -> float:
    """δ[v] from the neighbors exactly one level below v (ascending neighbor order)."""
    below = d[v] + 1
    sv = sigma[v]
    acc = 0.0
    for w in adj[v]:
        if d[w] == below:
            acc += sv / sigma[w] * (1.0 + delta[w])
    return acc


def shortest_path_counts(adj: list[list[int]], s: int, n: int) -> tuple[list[int], list[int], list[int]]:
    """BFS from s. Returns (d, σ, order) where order is the discovery order (levels ascending)."""
    d = [UNREACHABLE] * n
    sigma = [0] * n
    d[s] = 0
    sigma[s] = 1
    order = [s]
    i = 0
    while i < len(order):
        v = order[i]
        i += 1
        below = d[v] + 1
        sv = sigma[v]
        for w in adj[v]:
            dw = d[w]
            if dw == UNREACHABLE:
                d[w] = below
                sigma[w] = sv
                order.append(w)
            elif dw == below:
                sigma[w] += sv
    return d, sigma, order


def _levels_descending(order: list[int], d: list[int]) -> Iterator[list[int]]:
    """Slices of the BFS order, one per level, deepest first (discovery order inside a level)."""
    end = len(order)
    while end > 0:
        level = d[order[end - 1]]
        start = end - 1
        while start > 0 and d[order[start - 1]] == level:
            start -= 1
        yield order[start:end]
        end = start


def brandes_single_source(g: DynamicGraph, s: int) -> tuple[SourceData, np.ndarray, dict[Edge, float]]:
    """
    One source of the modified Brandes algorithm.

    Returns:
        (SourceData, per-vertex VBC contribution, per-edge EBC contribution).
        The VBC contribution is δ itself (δ[s] = 0).
    """
    n = g.n
    adj = g.adjacency
    g.neighbors(s)  # bounds check
    d, sigma, order = shortest_path_counts(adj, s, n)

    delta = [0.0] * n
    ebc: dict[Edge, float] = {}
    for level in _levels_descending(order, d):
        for v in level:
            below = d[v] + 1
            sv = sigma[v]
            acc = 0.0
            for w in adj[v]:
                if d[w] == below:
                    c = sv / sigma[w] * (1.0 + delta[w])
                    acc += c
                    ebc[edge_key(v, w)] = c
            if v != s:
                delta[v] = acc

    data = SourceData.from_lists(d, sigma, delta)
    return data, data.delta, ebc


# ─── All sources ─────────────────────────────────────────────
#
# Per-source contributions are summed along one fixed binary tree over the
# source ids [0, n): node [l, r) splits at (l + r) // 2. A worker owning
# [lo, hi) sums the maximal tree nodes inside its range and the coordinator
# combines those nodes up the same tree, so every addition happens in an
# order that depends on n only, never on how the sources were partitioned.

Node = tuple[int, int]


def cover_nodes(n: int, lo: int, hi: int) -> list[Node]:
    """Maximal nodes of the summation tree over [0, n) lying inside [lo, hi), ascending."""
    nodes: list[Node] = []

    def visit(l: int, r: int) -> None:
        if r <= lo or hi <= l:
            return
        if lo <= l and r <= hi:
            nodes.append((l, r))
            return
        mid = (l + r) // 2
        visit(l, mid)
        visit(mid, r)

    if lo < hi:
        visit(0, n)
    return nodes


@dataclass
class RangeSums:
    """
    Tree-node sums for one source range. Every vector holds the n VBC entries
    followed by one EBC entry per edge, in `edges` order.
    """
    n: int
    edges: list[Edge]
    nodes: dict[Node, np.ndarray]


def brandes_range(
    g: DynamicGraph,
    lo: int,
    hi: int,
    on_source: Optional[Callable[[int, SourceData], None]] = None,
) -> RangeSums:
    """
    Run sources lo..hi-1 in ascending order and sum their contributions per tree node.

    on_source(s, data) receives every SourceData as it is produced, so callers
    can stream BD blocks to disk without keeping all of them in memory.
    """
    n = g.n
    edges = list(g.edges())
    index = {e: n + i for i, e in enumerate(edges)}
    width = n + len(edges)

    def leaf(s: int) -> np.ndarray:
        data, contrib, edge_contrib = brandes_single_source(g, s)
        vec = np.zeros(width, dtype=np.float64)
        vec[:n] = contrib
        for e, c in edge_contrib.items():
            vec[index[e]] = c
        if on_source is not None:
            on_source(s, data)
        return vec

    def node_sum(l: int, r: int) -> np.ndarray:
        if r - l == 1:
            return leaf(l)
        mid = (l + r) // 2
        left = node_sum(l, mid)
        return left + node_sum(mid, r)

    return RangeSums(n=n, edges=edges, nodes={node: node_sum(*node) for node in cover_nodes(n, lo, hi)})


def reduce_ranges(g: DynamicGraph, parts: Iterable[RangeSums]) -> CentralityScores:
    """Combine the node sums of ranges that together cover every source of g."""
    n = g.n
    nodes: dict[Node, np.ndarray] = {}
    edges = list(g.edges())
    for part in parts:
        if part.n != n or part.edges != edges:
            raise ValueError(f"range sums were computed for another graph (n={part.n}, m={len(part.edges)})")
        nodes.update(part.nodes)
    if n == 0:
        return CentralityScores.zeros(g)

    def total(l: int, r: int) -> np.ndarray:
        found = nodes.get((l, r))
        if found is not None:
            return found
        if r - l == 1:
            raise ValueError(f"source {l} is missing from the reduction")
        mid = (l + r) // 2
        return total(l, mid) + total(mid, r)

    vec = total(0, n)
    return CentralityScores(
        vbc=vec[:n].copy(),
        ebc={e: float(vec[n + i]) for i, e in enumerate(edges)},
    )


def brandes_full(g: DynamicGraph, keep_sources: bool = True) -> tuple[CentralityScores, Optional[list[SourceData]]]:
    """Step 1 over every source: exact VBC/EBC plus BD[s] for all s (when keep_sources)."""
    blocks: list[SourceData] = []
    sums = brandes_range(g, 0, g.n, on_source=(lambda s, data: blocks.append(data)) if keep_sources else None)
    log.debug(f"Full Brandes over n={g.n} m={g.m}")
    return reduce_ranges(g, [sums]), (blocks if keep_sources else None)
