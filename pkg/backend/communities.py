"""
Girvan–Newman community detection on top of incremental edge betweenness.

Provides:
  - Dendrogram        → removal sequence + component snapshots at every split
  - select_edge       → max-EBC edge, near ties broken lexicographically
  - girvan_newman     → removals applied as incremental events
  - gn_reference      → same loop, Brandes recomputed from scratch after each removal
"""

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from brandes import brandes_full
from config import GN_TIE_TOLERANCE, REFERENCE_MAX_VERTICES, EngineConfig, format_score
from errors import GraphError, SizeGuardError
from graph_core import DynamicGraph, Edge, connected_components
from incremental import EdgeEvent
from partition_engine import PartitionEngine

log = logging.getLogger("gn")


@dataclass(frozen=True)
class DendrogramStep:
    step: int
    edge: Edge
    ebc: float
    components: int


@dataclass
class Dendrogram:
    initial_components: int
    steps: list[DendrogramStep] = field(default_factory=list)
    snapshots: dict[int, list[list[int]]] = field(default_factory=dict)   # step → components after it
    elapsed: float = 0.0

    @property
    def removed_edges(self) -> list[Edge]:
        return [s.edge for s in self.steps]

    @property
    def components(self) -> int:
        return self.steps[-1].components if self.steps else self.initial_components

    def final_communities(self) -> list[list[int]]:
        if not self.snapshots:
            return []
        return self.snapshots[max(self.snapshots)]

    def write_csv(self, path: str | Path, labels: Optional[list[str]] = None) -> None:
        """step,edge_u,edge_v,ebc,components"""
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["step", "edge_u", "edge_v", "ebc", "components"])
            for s in self.steps:
                u, v = s.edge
                writer.writerow([
                    s.step,
                    labels[u] if labels else u,
                    labels[v] if labels else v,
                    format_score(s.ebc),
                    s.components,
                ])


def select_edge(ebc: dict[Edge, float]) -> tuple[Edge, float]:
    """
    Edge with the highest EBC. Edges within GN_TIE_TOLERANCE (relative) of
    the maximum count as tied; the lexicographically smallest one wins.
    """
    if not ebc:
        raise GraphError("no edges left to remove")
    top = max(ebc.values())
    threshold = top - GN_TIE_TOLERANCE * max(1.0, abs(top))
    edge = min(e for e, value in ebc.items() if value >= threshold)
    return edge, ebc[edge]


def _should_stop(g: DynamicGraph, components: int, stop: Optional[int], step: int, max_steps: Optional[int]) -> bool:
    if g.m == 0 or (max_steps is not None and step >= max_steps):
        return True
    return stop is not None and components >= stop


def girvan_newman(
    g: DynamicGraph,
    stop: Optional[int] = None,
    engine: Optional[PartitionEngine] = None,
    config: Optional[EngineConfig] = None,
    max_steps: Optional[int] = None,
    progress_cb: Optional[Callable[[str], None]] = None,
) -> Dendrogram:
    """
    Remove the top-EBC edge until `stop` components exist (None: until no edges remain),
    or until max_steps edges are gone.

    With an engine, its graph and scores are consumed in place; otherwise an
    in-memory engine is built on a copy of g. A split is detected from the
    removal's own disconnect flag, so components are only rescanned at splits.
    """
    if g.n == 0 or g.m == 0:
        raise GraphError("Girvan–Newman needs a graph with at least one edge")
    own_engine = engine is None
    if own_engine:
        engine = PartitionEngine.build(g.copy(), config or EngineConfig())
    start = time.perf_counter()
    try:
        graph = engine.graph
        components = len(connected_components(graph))
        dendrogram = Dendrogram(initial_components=components)
        step = 0
        while not _should_stop(graph, components, stop, step, max_steps):
            edge, value = select_edge(engine.scores.ebc)
            report = engine.process_event(EdgeEvent.remove(*edge))
            step += 1
            if report.disconnected:
                components += 1
                dendrogram.snapshots[step] = connected_components(graph)
            dendrogram.steps.append(DendrogramStep(step, edge, value, components))
            if progress_cb and step % 50 == 0:
                progress_cb(f"{step} edges removed, {components} components")
    finally:
        if own_engine:
            engine.close()
    dendrogram.elapsed = time.perf_counter() - start
    log.info(f"Incremental GN: {len(dendrogram.steps)} removals, {components} components, {dendrogram.elapsed:.2f}s")
    return dendrogram


def gn_reference(
    g: DynamicGraph,
    stop: Optional[int] = None,
    max_steps: Optional[int] = None,
    progress_cb: Optional[Callable[[str], None]] = None,
) -> Dendrogram:
    """Baseline: identical loop, but EBC recomputed by brandes_full after every removal."""
    if g.n > REFERENCE_MAX_VERTICES:
        raise SizeGuardError(f"recompute baseline limited to n ≤ {REFERENCE_MAX_VERTICES}, graph has n={g.n}")
    if g.n == 0 or g.m == 0:
        raise GraphError("Girvan–Newman needs a graph with at least one edge")
    graph = g.copy()
    start = time.perf_counter()
    components = len(connected_components(graph))
    dendrogram = Dendrogram(initial_components=components)
    step = 0
    while not _should_stop(graph, components, stop, step, max_steps):
        scores, _ = brandes_full(graph, keep_sources=False)
        edge, value = select_edge(scores.ebc)
        graph.remove_edge(*edge)
        step += 1
        current = connected_components(graph)
        if len(current) > components:
            components = len(current)
            dendrogram.snapshots[step] = current
        dendrogram.steps.append(DendrogramStep(step, edge, value, components))
        if progress_cb and step % 50 == 0:
            progress_cb(f"{step} edges removed, {components} components")
    dendrogram.elapsed = time.perf_counter() - start
    log.info(f"Reference GN: {len(dendrogram.steps)} removals, {components} components, {dendrogram.elapsed:.2f}s")
    return dendrogram
