"""
Test oracles — independent ways to get the same numbers as brandes.py.

Provides:
  - all_pairs_counts(g)      → dense distance + shortest-path-count matrices
  - oracle_scores(g)         → VBC/EBC straight from the path-counting definitions
  - reference_brandes(g)     → textbook Brandes with predecessor lists (MP mode)
  - networkx_scores(g)       → networkx betweenness rescaled to ordered pairs
  - pair_sums(g)             → the two conservation totals
  - compare_scores(a, b)     → max absolute / relative deviation
"""

import logging
from collections import deque

import networkx as nx
import numpy as np

from brandes import UNREACHABLE, CentralityScores, SourceData
from config import ORACLE_MAX_VERTICES, REFERENCE_MAX_VERTICES
from errors import SizeGuardError
from graph_core import DynamicGraph, Edge, edge_key

log = logging.getLogger("oracle")


def _guard(g: DynamicGraph, limit: int, what: str) -> None:
    if g.n > limit:
        raise SizeGuardError(f"{what} limited to n ≤ {limit}, graph has n={g.n}")


# ─── All pairs ───────────────────────────────────────────────

def all_pairs_counts(g: DynamicGraph) -> tuple[np.ndarray, np.ndarray]:
    """
    D[s, t] hop distance (-1 when unreachable) and S[s, t] number of shortest
    paths, via one plain BFS per source.
    """
    _guard(g, ORACLE_MAX_VERTICES, "all-pairs oracle")
    n = g.n
    D = np.full((n, n), -1, dtype=np.int64)
    S = np.zeros((n, n), dtype=np.float64)
    for s in range(n):
        dist = D[s]
        count = S[s]
        dist[s] = 0
        count[s] = 1.0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            for w in g.neighbors(v):
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
                if dist[w] == dist[v] + 1:
                    count[w] += count[v]
    return D, S


def oracle_scores(g: DynamicGraph) -> CentralityScores:
    """
    Betweenness by the definitions, over ordered pairs (s, t), s != t:

        VBC(v)    = Σ σ(s,v)·σ(v,t) / σ(s,t)       where d(s,v) + d(v,t) = d(s,t)
        EBC(v,w)  = Σ σ(s,v)·σ(w,t) / σ(s,t)       where d(s,v) + 1 + d(w,t) = d(s,t)
                    (both orientations of the edge)

    Pairs in different components contribute nothing.
    """
    D, S = all_pairs_counts(g)
    n = g.n
    reach = D >= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(reach, 1.0 / S, 0.0)
    np.fill_diagonal(inv, 0.0)

    vbc = np.zeros(n, dtype=np.float64)
    for v in range(n):
        on_path = reach[:, [v]] & reach[[v], :] & (D[:, [v]] + D[[v], :] == D)
        on_path[v, :] = False
        on_path[:, v] = False
        vbc[v] = float(np.sum(np.where(on_path, np.outer(S[:, v], S[v, :]) * inv, 0.0)))

    ebc: dict[Edge, float] = {}
    for a, b in g.edges():
        total = 0.0
        for v, w in ((a, b), (b, a)):
            on_path = reach[:, [v]] & reach[[w], :] & (D[:, [v]] + 1 + D[[w], :] == D)
            total += float(np.sum(np.where(on_path, np.outer(S[:, v], S[w, :]) * inv, 0.0)))
        ebc[(a, b)] = total
    return CentralityScores(vbc=vbc, ebc=ebc)


# ─── Reference Brandes ───────────────────────────────────────

def reference_single_source(g: DynamicGraph, s: int) -> tuple[SourceData, dict[Edge, float]]:
    """Classic Brandes: BFS with a stack and explicit predecessor lists."""
    n = g.n
    d = [UNREACHABLE] * n
    sigma = [0] * n
    preds: list[list[int]] = [[] for _ in range(n)]
    d[s] = 0
    sigma[s] = 1
    stack = []
    queue = deque([s])
    while queue:
        v = queue.popleft()
        stack.append(v)
        for w in g.neighbors(v):
            if d[w] == UNREACHABLE:
                d[w] = d[v] + 1
                queue.append(w)
            if d[w] == d[v] + 1:
                sigma[w] += sigma[v]
                preds[w].append(v)

    delta = [0.0] * n
    ebc: dict[Edge, float] = {}
    while stack:
        w = stack.pop()
        for v in preds[w]:
            c = sigma[v] / sigma[w] * (1.0 + delta[w])
            ebc[edge_key(v, w)] = c
            delta[v] += c
    delta[s] = 0.0
    return SourceData.from_lists(d, sigma, delta), ebc


def reference_brandes(g: DynamicGraph, keep_sources: bool = True) -> tuple[CentralityScores, list[SourceData] | None]:
    """All sources with predecessor lists. Same outputs as brandes_full, more memory."""
    _guard(g, REFERENCE_MAX_VERTICES, "reference Brandes")
    scores = CentralityScores.zeros(g)
    blocks: list[SourceData] = []
    for s in range(g.n):
        data, edge_contrib = reference_single_source(g, s)
        scores.vbc += data.delta
        for e, c in edge_contrib.items():
            scores.ebc[e] += c
        if keep_sources:
            blocks.append(data)
    return scores, (blocks if keep_sources else None)


# ─── Cross checks ────────────────────────────────────────────

def networkx_scores(g: DynamicGraph) -> CentralityScores:
    """networkx counts unordered pairs for undirected graphs; doubling gives ordered pairs."""
    nxg = g.to_networkx()
    vb = nx.betweenness_centrality(nxg, normalized=False)
    eb = nx.edge_betweenness_centrality(nxg, normalized=False)
    vbc = np.array([2.0 * vb[v] for v in range(g.n)], dtype=np.float64)
    ebc = {edge_key(u, v): 2.0 * value for (u, v), value in eb.items()}
    return CentralityScores(vbc=vbc, ebc=ebc)


def pair_sums(g: DynamicGraph) -> tuple[int, int]:
    """
    (Σ d(s,t), Σ (d(s,t) − 1)) over ordered reachable pairs s != t.

    The first equals Σ EBC and the second Σ VBC.
    """
    edge_total = 0
    vertex_total = 0
    for s in range(g.n):
        dist = {s: 0}
        queue = deque([s])
        while queue:
            v = queue.popleft()
            for w in g.neighbors(v):
                if w not in dist:
                    dist[w] = dist[v] + 1
                    queue.append(w)
        for t, dt in dist.items():
            if t != s:
                edge_total += dt
                vertex_total += dt - 1
    return edge_total, vertex_total


def compare_scores(a: CentralityScores, b: CentralityScores) -> dict[str, float]:
    """Max absolute and relative deviations between two score sets (EBC keys must match)."""
    if set(a.ebc) != set(b.ebc):
        missing = sorted(set(a.ebc) ^ set(b.ebc))[:5]
        raise ValueError(f"EBC key sets differ, e.g. {missing}")
    vbc_abs = float(np.max(np.abs(a.vbc - b.vbc))) if len(a.vbc) else 0.0
    vbc_rel = float(np.max(np.abs(a.vbc - b.vbc) / np.maximum(1.0, np.abs(b.vbc)))) if len(a.vbc) else 0.0
    ebc_abs = 0.0
    ebc_rel = 0.0
    for e, value in a.ebc.items():
        diff = abs(value - b.ebc[e])
        ebc_abs = max(ebc_abs, diff)
        ebc_rel = max(ebc_rel, diff / max(1.0, abs(b.ebc[e])))
    return {"vbc_abs": vbc_abs, "vbc_rel": vbc_rel, "ebc_abs": ebc_abs, "ebc_rel": ebc_rel}


def scores_close(a: CentralityScores, b: CentralityScores, rel: float = 1e-9) -> bool:
    dev = compare_scores(a, b)
    return dev["vbc_rel"] <= rel and dev["ebc_rel"] <= rel
