"""
Dynamic Graph — undirected, unweighted, simple, dense integer vertex ids.

Provides:
  - DynamicGraph         → adjacency kept as ascending neighbor lists
  - edge_key(u, v)       → canonical (min, max) edge tuple
  - load_edge_list(path) → graph + external labels (ids remapped in first-seen order)
  - random_graph / small_world_graph → generators (networkx based)
  - connected_components(g)

Neighbor lists are always ascending. Every traversal in the engine iterates
them in that order, which fixes BFS discovery order and therefore the order
of every floating-point accumulation downstream.
"""

import logging
from bisect import bisect_left, insort
from collections import deque
from pathlib import Path
from typing import Iterable, Iterator, Optional

import networkx as nx

from errors import GraphError

log = logging.getLogger("graph")

Edge = tuple[int, int]


def edge_key(u: int, v: int) -> Edge:
    """Canonical edge tuple with the smaller endpoint first."""
    return (u, v) if u < v else (v, u)


class DynamicGraph:
    """Mutable undirected graph over vertices 0..n-1."""

    __slots__ = ("_adj", "_m")

    def __init__(self, n: int = 0):
        if n < 0:
            raise GraphError(f"vertex count must be non-negative, got {n}")
        self._adj: list[list[int]] = [[] for _ in range(n)]
        self._m = 0

    # ─── Construction ────────────────────────────────────────

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "DynamicGraph":
        g = cls(n)
        for u, v in edges:
            g.add_edge(u, v)
        return g

    @classmethod
    def from_networkx(cls, nxg: nx.Graph) -> "DynamicGraph":
        """Relabel a networkx graph densely (sorted node order) and copy its edges."""
        index = {node: i for i, node in enumerate(sorted(nxg.nodes()))}
        g = cls(len(index))
        for a, b in nxg.edges():
            if a != b:
                g.add_edge(index[a], index[b])
        return g

    def to_networkx(self) -> nx.Graph:
        nxg = nx.Graph()
        nxg.add_nodes_from(range(self.n))
        nxg.add_edges_from(self.edges())
        return nxg

    def copy(self) -> "DynamicGraph":
        g = DynamicGraph(0)
        g._adj = [list(nbrs) for nbrs in self._adj]
        g._m = self._m
        return g

    # ─── Queries ─────────────────────────────────────────────

    @property
    def n(self) -> int:
        return len(self._adj)

    @property
    def m(self) -> int:
        return self._m

    def _check(self, v: int) -> None:
        if not 0 <= v < len(self._adj):
            raise GraphError(f"vertex {v} out of bounds (n={len(self._adj)})")

    def neighbors(self, v: int) -> list[int]:
        """Neighbors of v in ascending id order. The list is live; do not mutate it."""
        self._check(v)
        return self._adj[v]

    def degree(self, v: int) -> int:
        self._check(v)
        return len(self._adj[v])

    def has_edge(self, u: int, v: int) -> bool:
        self._check(u)
        self._check(v)
        nbrs = self._adj[u]
        i = bisect_left(nbrs, v)
        return i < len(nbrs) and nbrs[i] == v

    def edges(self) -> Iterator[Edge]:
        """All edges as canonical tuples, in lexicographic order."""
        for u, nbrs in enumerate(self._adj):
            for v in nbrs:
                if u < v:
                    yield (u, v)

    @property
    def adjacency(self) -> list[list[int]]:
        """Raw ascending neighbor lists, for hot loops that index by vertex directly."""
        return self._adj

    # ─── Mutation ────────────────────────────────────────────

    def add_vertex(self) -> int:
        self._adj.append([])
        return len(self._adj) - 1

    def add_edge(self, u: int, v: int) -> bool:
        """Insert (u, v). Returns False when the edge already existed."""
        self._check(u)
        self._check(v)
        if u == v:
            raise GraphError(f"self-loop ({u}, {v}) rejected")
        if self.has_edge(u, v):
            return False
        insort(self._adj[u], v)
        insort(self._adj[v], u)
        self._m += 1
        return True

    def remove_edge(self, u: int, v: int) -> bool:
        """Delete (u, v). Returns False when the edge was not present."""
        self._check(u)
        self._check(v)
        if u == v or not self.has_edge(u, v):
            return False
        nbrs = self._adj[u]
        del nbrs[bisect_left(nbrs, v)]
        nbrs = self._adj[v]
        del nbrs[bisect_left(nbrs, u)]
        self._m -= 1
        return True

    def __getstate__(self):
        return (self._adj, self._m)

    def __setstate__(self, state) -> None:
        self._adj, self._m = state

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DynamicGraph):
            return NotImplemented
        return self._adj == other._adj

    def __repr__(self) -> str:
        return f"DynamicGraph(n={self.n}, m={self.m})"


# ─── Components ──────────────────────────────────────────────

def connected_components(g: DynamicGraph) -> list[list[int]]:
    """Components as ascending vertex lists, ordered by their smallest vertex."""
    adj = g.adjacency
    seen = [False] * g.n
    components = []
    for root in range(g.n):
        if seen[root]:
            continue
        seen[root] = True
        comp = [root]
        queue = deque([root])
        while queue:
            v = queue.popleft()
            for w in adj[v]:
                if not seen[w]:
                    seen[w] = True
                    comp.append(w)
                    queue.append(w)
        components.append(sorted(comp))
    return components


def reachable(g: DynamicGraph, src: int, dst: int) -> bool:
    """Plain BFS connectivity test between two vertices."""
    if src == dst:
        return True
    adj = g.adjacency
    seen = {src}
    queue = deque([src])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w == dst:
                return True
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return False


# ─── Edge-list loader ────────────────────────────────────────

def load_edge_list(path: str | Path) -> tuple[DynamicGraph, list[str]]:
    """
    Read a whitespace-separated edge list.

    One edge per line (`u v`), `#` starts a comment, blank lines ignored.
    Labels are remapped to dense ids in first-seen order; duplicate edges
    are ignored and self-loops rejected.

    Returns:
        (graph, labels) where labels[i] is the external label of vertex i.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Edge list not found: {path}")

    index: dict[str, int] = {}
    labels: list[str] = []
    pairs: list[tuple[int, int]] = []

    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) < 2:
                raise GraphError(f"{path}:{lineno}: expected 'u v', got {raw.strip()!r}")
            ids = []
            for label in parts[:2]:
                if label not in index:
                    index[label] = len(labels)
                    labels.append(label)
                ids.append(index[label])
            if ids[0] == ids[1]:
                raise GraphError(f"{path}:{lineno}: self-loop on {parts[0]!r}")
            pairs.append((ids[0], ids[1]))

    g = DynamicGraph.from_edges(len(labels), pairs)
    log.info(f"Loaded {path.name}: n={g.n} m={g.m}")
    return g, labels


def save_edge_list(g: DynamicGraph, path: str | Path, labels: Optional[list[str]] = None) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# n={g.n} m={g.m}\n")
        for u, v in g.edges():
            a = labels[u] if labels else str(u)
            b = labels[v] if labels else str(v)
            f.write(f"{a} {b}\n")


# ─── Generators ──────────────────────────────────────────────

def random_graph(n: int, m: int, seed: Optional[int] = None) -> DynamicGraph:
    """Uniform G(n, m) random graph (may be disconnected)."""
    m = min(m, n * (n - 1) // 2)
    return DynamicGraph.from_networkx(nx.gnm_random_graph(n, m, seed=seed))


def small_world_graph(n: int, k: int = 12, p: float = 0.1, seed: Optional[int] = None) -> DynamicGraph:
    """
    Connected Watts–Strogatz graph.

    k=12 gives an average degree close to the ~11.8 of the synthetic social
    graphs used for the published speedup measurements.
    """
    return DynamicGraph.from_networkx(nx.connected_watts_strogatz_graph(n, k, p, seed=seed))
