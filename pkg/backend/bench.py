"""
Benchmarks — per-event speedup over full recomputation, and scaling curves.

Provides:
  - addition_stream / removal_stream → the two update protocols
  - time_full_recompute              → MP / MO / DO Step 1 timings
  - bench_events                     → per-event latency distribution + speedup rows
  - strong_scaling / weak_scaling    → addition streams through 1..p worker processes
"""

import logging
import random
import statistics
import tempfile
import time
from pathlib import Path
from typing import Callable, Literal, Optional

from pydantic import BaseModel

from bd_store import StoreWriter
from brandes import brandes_full, brandes_range
from config import EngineConfig
from graph_core import DynamicGraph, reachable, small_world_graph
from incremental import EdgeEvent
from oracle import reference_brandes
from partition_engine import PartitionEngine, process_event_parallel

log = logging.getLogger("bench")

Mode = Literal["MP", "MO", "DO"]
MODES: tuple[Mode, ...] = ("MP", "MO", "DO")

# Published medians (disk, no predecessor lists) kept next to local results for context only.
CONTEXT_SPEEDUPS = {("add", 1000): 12.0, ("add", 10000): 34.0, ("remove", 10000): 35.0}


class BenchRow(BaseModel):
    n: int
    m: int
    kind: str                # "add" | "remove"
    mode: str
    workers: int
    events: int
    full_seconds: float
    median_ms: float
    min_ms: float
    max_ms: float
    median_speedup: float
    min_speedup: float
    max_speedup: float
    context_speedup: Optional[float] = None


class FullRow(BaseModel):
    n: int
    m: int
    mode: str
    seconds: float


class ScalingRow(BaseModel):
    scaling: str             # "strong" | "weak"
    workers: int
    events: int
    seconds: float
    efficiency: float


# ─── Streams ─────────────────────────────────────────────────

def addition_stream(g: DynamicGraph, count: int, seed: int = 0) -> list[EdgeEvent]:
    """Connect `count` random unconnected pairs."""
    rng = random.Random(seed)
    chosen: set[tuple[int, int]] = set()
    events = []
    limit = g.n * (g.n - 1) // 2 - g.m
    while len(events) < min(count, limit):
        u, v = rng.sample(range(g.n), 2)
        key = (min(u, v), max(u, v))
        if key in chosen or g.has_edge(u, v):
            continue
        chosen.add(key)
        events.append(EdgeEvent.add(u, v))
    return events


def removal_stream(g: DynamicGraph, count: int, seed: int = 0, keep_connected: bool = False) -> list[EdgeEvent]:
    """
    Remove `count` random existing edges. With keep_connected, edges whose
    removal would split the graph at that point of the stream are skipped.
    """
    rng = random.Random(seed)
    work = g.copy()
    candidates = list(work.edges())
    rng.shuffle(candidates)
    events = []
    for u, v in candidates:
        if len(events) >= count:
            break
        work.remove_edge(u, v)
        if keep_connected and not reachable(work, u, v):
            work.add_edge(u, v)
            continue
        events.append(EdgeEvent.remove(u, v))
    return events


# ─── Full recompute ──────────────────────────────────────────

def time_full_recompute(g: DynamicGraph, mode: Mode, sigma_width: int = 8) -> float:
    """Seconds for Step 1 in the given mode (DO streams BD to a temporary SBC1 file)."""
    start = time.perf_counter()
    if mode == "MP":
        reference_brandes(g, keep_sources=True)
    elif mode == "MO":
        brandes_full(g, keep_sources=True)
    else:
        with tempfile.TemporaryDirectory() as tmp:
            writer = StoreWriter(Path(tmp) / "bench.sbc", g.n, 0, g.n, sigma_width)
            brandes_range(g, 0, g.n, on_source=writer.append)
            writer.finish().close()
    return time.perf_counter() - start


def bench_events(
    g: DynamicGraph,
    events: list[EdgeEvent],
    kind: str,
    mode: Mode = "DO",
    workers: int = 1,
    executor: str = "inline",
    sigma_width: int = 8,
    full_seconds: Optional[float] = None,
    progress_cb: Optional[Callable[[str], None]] = None,
) -> BenchRow:
    """
    Apply the events with the incremental engine and compare each per-event
    time with one full recomputation of the same mode.
    """
    if mode == "MP":
        raise ValueError("incremental updates run without predecessor lists (MO or DO)")
    if full_seconds is None:
        full_seconds = time_full_recompute(g, mode, sigma_width)
    config = EngineConfig(
        workers=workers, executor=executor, sigma_width=sigma_width,
        storage="disk" if mode == "DO" else "memory",
    )
    with tempfile.TemporaryDirectory() as tmp:
        with PartitionEngine.build(g.copy(), config, store_dir=Path(tmp), progress_cb=progress_cb) as engine:
            times = [engine.process_event(ev).elapsed for ev in events]
    speedups = [full_seconds / t for t in times if t > 0]
    row = BenchRow(
        n=g.n, m=g.m, kind=kind, mode=mode, workers=workers, events=len(times),
        full_seconds=full_seconds,
        median_ms=statistics.median(times) * 1000,
        min_ms=min(times) * 1000,
        max_ms=max(times) * 1000,
        median_speedup=statistics.median(speedups),
        min_speedup=min(speedups),
        max_speedup=max(speedups),
        context_speedup=CONTEXT_SPEEDUPS.get((kind, g.n)) if mode == "DO" else None,
    )
    log.info(f"n={g.n} {kind} {mode} p={workers}: median speedup {row.median_speedup:.1f}x")
    return row


# ─── Scaling ─────────────────────────────────────────────────

def _timed_events(g: DynamicGraph, events: list[EdgeEvent], workers: int) -> float:
    """Wall-clock for the events through a process-based engine; Step 1 is not timed."""
    config = EngineConfig(workers=workers, executor="process")
    with PartitionEngine.build(g.copy(), config) as engine:
        start = time.perf_counter()
        for ev in events:
            process_event_parallel(engine, ev)
        return time.perf_counter() - start


def strong_scaling(g: DynamicGraph, workers_list: list[int], events: int, seed: int = 0) -> list[ScalingRow]:
    """One fixed addition stream, processed by 1..p worker processes."""
    stream = addition_stream(g, events, seed)
    rows = []
    base = None
    for p in workers_list:
        seconds = _timed_events(g, stream, p)
        if base is None:
            base = seconds * p
        rows.append(ScalingRow(scaling="strong", workers=p, events=len(stream), seconds=seconds, efficiency=base / (p * seconds)))
        log.info(f"strong p={p}: {seconds:.3f}s for {len(stream)} additions")
    return rows


def weak_scaling(g: DynamicGraph, workers_list: list[int], events_per_worker: int, seed: int = 0) -> list[ScalingRow]:
    """The addition stream grows with p, so every worker handles the same amount of update work."""
    stream = addition_stream(g, events_per_worker * max(workers_list), seed)
    rows = []
    base = None
    for p in workers_list:
        events = stream[:events_per_worker * p]
        seconds = _timed_events(g, events, p)
        if base is None:
            base = seconds
        rows.append(ScalingRow(scaling="weak", workers=p, events=len(events), seconds=seconds, efficiency=base / seconds))
        log.info(f"weak p={p}: {seconds:.3f}s for {len(events)} additions")
    return rows


def bench_sizes(
    sizes: list[int],
    events: int,
    workers_list: list[int],
    modes: list[Mode],
    kinds: list[str],
    seed: int = 0,
    keep_connected: bool = True,
    executor: str = "inline",
    progress_cb: Optional[Callable[[str], None]] = None,
) -> tuple[list[BenchRow], list[FullRow]]:
    """The cmd_bench sweep: one small-world graph per size, each kind, mode and worker count."""
    rows = []
    full_rows = []
    for n in sizes:
        g = small_world_graph(n, seed=seed)
        full = {mode: time_full_recompute(g, mode) for mode in modes}
        full_rows.extend(FullRow(n=g.n, m=g.m, mode=mode, seconds=full[mode]) for mode in modes)
        for kind in kinds:
            stream = addition_stream(g, events, seed) if kind == "add" else removal_stream(g, events, seed, keep_connected)
            for mode in modes:
                if mode == "MP":
                    continue
                for p in workers_list:
                    rows.append(bench_events(
                        g, stream, kind, mode, p, executor,
                        full_seconds=full[mode], progress_cb=progress_cb,
                    ))
    return rows, full_rows
