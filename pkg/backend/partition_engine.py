"""
Partition Engine — sources split across p workers, Map per worker, Reduce on the coordinator.

Provides:
  - Partition / partition_sources → contiguous, balanced source ranges
  - read_manifest / write_manifest → `worker_id lo hi store_path` text file
  - PartitionWorker               → graph replica + BD provider for one range
  - PartitionEngine               → coordinator: Step 1, per-event Map/Reduce, atomic commit
  - LatencyModel / estimate_update_latency / plan_workers → online-latency planning
  - simulate_online / replay_stream / OnlineReport         → missed-update accounting

Workers run inline (same process) or each in its own single-process pool.
A worker never sends BD blocks back, only per-source PartialScores; the
coordinator reduces them in ascending source order, so the result does not
depend on p.
"""

import logging
import math
import time
from collections import Counter
from concurrent.futures import Future, ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np
from pydantic import BaseModel, Field

from bd_store import BdStore, StoreWriter
from brandes import CentralityScores, PartialScores, RangeSums, SourceData, brandes_range, reduce_ranges
from config import EngineConfig
from errors import EngineError, EventError
from graph_core import DynamicGraph
from incremental import (
    EdgeEvent,
    EventReport,
    SourcePass,
    Workspace,
    merge_updates,
    mutate_graph,
    revert_graph,
    run_sources,
    validate_event,
)
from providers import MemoryProvider, StoreProvider

log = logging.getLogger("engine")


# ─── Partitions ──────────────────────────────────────────────

class Partition(BaseModel):
    worker_id: int = Field(ge=0)
    lo: int = Field(ge=0)
    hi: int = Field(ge=0)
    store_path: Optional[str] = None     # None when the worker keeps BD in memory

    @property
    def size(self) -> int:
        return self.hi - self.lo


def partition_sources(n: int, p: int) -> list[Partition]:
    """Split [0, n) into p contiguous ranges whose sizes differ by at most one."""
    if p < 1:
        raise ValueError(f"need at least one worker, got p={p}")
    if p > n:
        raise ValueError(f"cannot give {p} workers a source each with n={n}")
    base, extra = divmod(n, p)
    partitions = []
    lo = 0
    for i in range(p):
        hi = lo + base + (1 if i < extra else 0)
        partitions.append(Partition(worker_id=i, lo=lo, hi=hi))
        lo = hi
    return partitions


def write_manifest(path: str | Path, partitions: list[Partition]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for part in partitions:
            f.write(f"{part.worker_id} {part.lo} {part.hi} {part.store_path or '-'}\n")


def read_manifest(path: str | Path) -> list[Partition]:
    partitions = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            parts = raw.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 'worker_id lo hi store_path'")
            worker_id, lo, hi, store = parts
            partitions.append(Partition(
                worker_id=int(worker_id), lo=int(lo), hi=int(hi),
                store_path=None if store == "-" else store,
            ))
    check_partitions(partitions)
    return partitions


def check_partitions(partitions: list[Partition], n: Optional[int] = None) -> None:
    """Ranges must be non-empty, ordered, disjoint and cover [0, n)."""
    expected = 0
    for part in partitions:
        if part.lo != expected or part.hi <= part.lo:
            raise ValueError(f"partition {part.worker_id} covers [{part.lo}, {part.hi}), expected to start at {expected}")
        expected = part.hi
    if n is not None and expected != n:
        raise ValueError(f"partitions cover [0, {expected}), graph has n={n}")


# ─── Worker ──────────────────────────────────────────────────

@dataclass
class MapResult:
    """What a worker returns for one event: no BD blocks, only score deltas."""
    worker_id: int
    partials: list[tuple[int, PartialScores]]
    branches: Counter
    skipped: int
    touched: int
    elapsed: float

    @classmethod
    def from_pass(cls, worker_id: int, result: SourcePass) -> "MapResult":
        return cls(worker_id, result.partials, result.branches, result.skipped, result.touched, result.elapsed)

    def as_pass(self) -> SourcePass:
        return SourcePass(
            partials=self.partials, branches=self.branches,
            skipped=self.skipped, touched=self.touched, elapsed=self.elapsed,
        )


class PartitionWorker:
    """Owns one source range: a replica of the graph plus the BD blocks of its sources."""

    def __init__(self, partition: Partition, g: DynamicGraph, config: EngineConfig):
        self.partition = partition
        self.graph = g
        self.config = config
        self.ws = Workspace(g.n)
        self.provider = None
        self._pending: Optional[EdgeEvent] = None

    # ─── Step 1 ──────────────────────────────────────────────

    def initialize(self) -> RangeSums:
        """Brandes over this worker's sources; BD streams to the store or stays in memory."""
        part = self.partition
        g = self.graph
        if part.store_path:
            writer = StoreWriter(part.store_path, g.n, part.lo, part.hi, self.config.sigma_width)
            try:
                sums = brandes_range(g, part.lo, part.hi, on_source=writer.append)
            except BaseException:
                writer.abort()
                raise
            staging = self.config.staging_path(Path(part.store_path).parent)
            self.provider = StoreProvider(writer.finish(staging))
        else:
            blocks: list[SourceData] = []
            sums = brandes_range(g, part.lo, part.hi, on_source=lambda s, data: blocks.append(data))
            self.provider = MemoryProvider(blocks, part.lo)
        return sums

    def attach(self, blocks: Optional[list[SourceData]] = None) -> None:
        """Reuse existing BD: open the partition's store, or adopt in-memory blocks."""
        part = self.partition
        if part.store_path:
            staging = self.config.staging_path(Path(part.store_path).parent)
            self.provider = StoreProvider(BdStore.open(part.store_path, staging))
            if (self.provider.lo, self.provider.hi) != (part.lo, part.hi) or self.provider.store.n != self.graph.n:
                raise EngineError(f"store {part.store_path} does not match partition {part.worker_id} / n={self.graph.n}")
        else:
            if blocks is None or len(blocks) != part.size:
                raise EngineError(f"partition {part.worker_id} needs {part.size} in-memory blocks")
            self.provider = MemoryProvider(blocks, part.lo)

    # ─── Step 2 ──────────────────────────────────────────────

    def process(self, ev: EdgeEvent, attach: Optional[int] = None) -> MapResult:
        """Map: mutate the replica, update every owned BD[s], stage the blocks."""
        mutate_graph(self.graph, ev)
        try:
            result = run_sources(self.graph, ev, self.provider, self.ws, self.config.one_level_drop, attach)
        except BaseException:
            self.provider.rollback()
            revert_graph(self.graph, ev)
            raise
        self._pending = ev
        return MapResult.from_pass(self.partition.worker_id, result)

    def commit(self) -> None:
        self.provider.commit()
        self._pending = None

    def rollback(self) -> None:
        """Undo a processed-but-uncommitted event (graph replica and staged blocks)."""
        self.provider.rollback()
        if self._pending is not None:
            revert_graph(self.graph, self._pending)
            self._pending = None

    def grow(self, append: bool) -> Partition:
        """A vertex was added; the last worker also takes it on as a source."""
        v = self.graph.add_vertex()
        n = self.graph.n
        self.ws.ensure(n)
        self.provider.grow(n, SourceData.isolated(n, v) if append else None)
        if append:
            self.partition = self.partition.model_copy(update={"hi": self.partition.hi + 1})
        return self.partition

    def blocks(self) -> list[SourceData]:
        return [self.provider.load(s) for s in range(self.provider.lo, self.provider.hi)]

    def io_counters(self) -> dict[str, int]:
        if isinstance(self.provider, StoreProvider):
            store = self.provider.store
            return {"bytes_read": store.bytes_read, "bytes_written": store.bytes_written, "block_writes": store.block_writes}
        return {"bytes_read": 0, "bytes_written": 0, "block_writes": 0}

    def close(self) -> None:
        if self.provider is not None:
            self.provider.close()


# ─── Executors ───────────────────────────────────────────────

_WORKER: Optional[PartitionWorker] = None


def _worker_init(partition: Partition, g: DynamicGraph, config: EngineConfig) -> None:
    global _WORKER
    _WORKER = PartitionWorker(partition, g, config)


def _worker_call(method: str, *args) -> Any:
    return getattr(_WORKER, method)(*args)


class InlineHandle:
    """Runs a worker in the coordinator's process; calls complete immediately."""

    def __init__(self, partition: Partition, g: DynamicGraph, config: EngineConfig):
        self.worker = PartitionWorker(partition, g.copy(), config)

    def submit(self, method: str, *args) -> Future:
        future: Future = Future()
        try:
            future.set_result(getattr(self.worker, method)(*args))
        except BaseException as exc:
            future.set_exception(exc)
        return future

    def shutdown(self) -> None:
        self.worker.close()


class ProcessHandle:
    """A worker living in its own process (a one-process pool, so its state persists between calls)."""

    def __init__(self, partition: Partition, g: DynamicGraph, config: EngineConfig):
        self.pool = ProcessPoolExecutor(max_workers=1, initializer=_worker_init, initargs=(partition, g, config))

    def submit(self, method: str, *args) -> Future:
        return self.pool.submit(_worker_call, method, *args)

    def shutdown(self) -> None:
        try:
            self.pool.submit(_worker_call, "close").result()
        finally:
            self.pool.shutdown(wait=True)


# ─── Coordinator ─────────────────────────────────────────────

class PartitionEngine:
    """
    Coordinator. Owns the authoritative graph and the scores; each event is
    validated here, mapped over every worker, and either committed on all of
    them or rolled back on all of them.
    """

    def __init__(self, g: DynamicGraph, partitions: list[Partition], config: Optional[EngineConfig] = None):
        self.config = config or EngineConfig(workers=len(partitions))
        check_partitions(partitions, g.n)
        self.graph = g
        self.partitions = list(partitions)
        handle_cls = ProcessHandle if self.config.executor == "process" else InlineHandle
        self.handles = [handle_cls(part, g, self.config) for part in self.partitions]
        self.scores: Optional[CentralityScores] = None
        self.reports: list[EventReport] = []
        self.merge_times: list[float] = []
        self.map_times: list[float] = []
        self.step1_seconds = 0.0

    # ─── Construction ────────────────────────────────────────

    @classmethod
    def build(
        cls,
        g: DynamicGraph,
        config: Optional[EngineConfig] = None,
        store_dir: Optional[Path] = None,
        progress_cb: Optional[Callable[[str], None]] = None,
    ) -> "PartitionEngine":
        """Partition the sources and run Step 1 on every worker."""
        config = config or EngineConfig()
        partitions = partition_sources(g.n, config.workers)
        if config.storage == "disk":
            if store_dir is None:
                raise ValueError("disk storage needs a store directory")
            store_dir = Path(store_dir)
            store_dir.mkdir(parents=True, exist_ok=True)
            partitions = [
                p.model_copy(update={"store_path": str(store_dir / f"part-{p.worker_id:03d}.sbc")})
                for p in partitions
            ]
        engine = cls(g, partitions, config)
        try:
            engine.initialize(progress_cb)
        except BaseException:
            engine._discard()
            raise
        return engine

    @classmethod
    def resume(
        cls,
        g: DynamicGraph,
        partitions: list[Partition],
        scores: CentralityScores,
        config: Optional[EngineConfig] = None,
        blocks: Optional[list[SourceData]] = None,
    ) -> "PartitionEngine":
        """Reattach to existing stores (or in-memory blocks) and known scores."""
        engine = cls(g, partitions, config)
        futures = []
        for part, handle in zip(engine.partitions, engine.handles):
            own = blocks[part.lo:part.hi] if blocks is not None else None
            futures.append(handle.submit("attach", own))
        engine._gather(futures)
        engine.scores = scores
        return engine

    def initialize(self, progress_cb: Optional[Callable[[str], None]] = None) -> CentralityScores:
        """Step 1 on all workers; their tree-node sums are combined by reduce_ranges."""
        def log_progress(msg: str):
            if progress_cb:
                progress_cb(msg)
            else:
                log.info(msg)

        log_progress(f"Step 1: n={self.graph.n} m={self.graph.m} over {len(self.handles)} worker(s)")
        start = time.perf_counter()
        sums = self._gather([h.submit("initialize") for h in self.handles])
        scores = reduce_ranges(self.graph, sums)
        self.scores = scores
        self.step1_seconds = time.perf_counter() - start
        log_progress(f"Step 1 done in {self.step1_seconds:.2f}s")
        return scores

    # ─── Events ──────────────────────────────────────────────

    def _gather(self, futures: list[Future]) -> list[Any]:
        results = []
        errors = []
        for future in futures:
            try:
                results.append(future.result())
            except BaseException as exc:
                results.append(None)
                errors.append(exc)
        if errors:
            raise EngineError(f"{len(errors)} worker(s) failed: {errors[0]}") from errors[0]
        return results

    def process_event(self, ev: EdgeEvent, attach: Optional[int] = None, line: Optional[int] = None) -> EventReport:
        """
        Map the event over all workers and Reduce their deltas.

        Either every worker commits or none does; on failure the graph and
        every replica are back at their pre-event state and EngineError is raised.
        """
        validate_event(self.graph, ev, line)
        start = time.perf_counter()
        mutate_graph(self.graph, ev)
        futures = [h.submit("process", ev, attach) for h in self.handles]

        results: list[Optional[MapResult]] = []
        failure: Optional[BaseException] = None
        for future in futures:
            try:
                results.append(future.result())
            except BaseException as exc:
                results.append(None)
                failure = failure or exc
        if failure is not None:
            for handle, result in zip(self.handles, results):
                if result is not None:
                    handle.submit("rollback").result()
            revert_graph(self.graph, ev)
            raise EngineError(f"event {ev} aborted: {failure}") from failure

        map_done = time.perf_counter()
        self._gather([h.submit("commit") for h in self.handles])
        partials = [item for result in results for item in result.partials]
        merge_updates(self.scores, partials, ev)
        end = time.perf_counter()

        self.map_times.append(max(r.elapsed for r in results))
        self.merge_times.append(end - map_done)
        report = EventReport.from_passes(ev, [r.as_pass() for r in results], end - start)
        self.reports.append(report)
        log.debug(f"{ev}: {report.processed} sources updated, {report.skipped} skipped, {report.elapsed * 1000:.1f} ms")
        return report

    def add_vertex(self) -> int:
        """Append an isolated vertex; it becomes a source of the last partition."""
        v = self.graph.add_vertex()
        self.scores.add_vertex()
        last = len(self.handles) - 1
        self.partitions = self._gather([h.submit("grow", i == last) for i, h in enumerate(self.handles)])
        return v

    def add_edge_to_new_vertex(self, u_existing: int, timestamp: Optional[float] = None) -> tuple[int, EventReport]:
        if not 0 <= u_existing < self.graph.n:
            raise EventError(f"vertex {u_existing} out of bounds (n={self.graph.n})")
        v = self.add_vertex()
        return v, self.process_event(EdgeEvent.add(u_existing, v, timestamp), attach=v)

    def isolate_vertex(self, v: int) -> list[EventReport]:
        """Remove every edge of v, one event at a time."""
        if not 0 <= v < self.graph.n:
            raise EventError(f"vertex {v} out of bounds (n={self.graph.n})")
        return [self.process_event(EdgeEvent.remove(v, u)) for u in list(self.graph.neighbors(v))]

    # ─── Introspection ───────────────────────────────────────

    def blocks(self) -> list[SourceData]:
        """Every BD[s] in source order (pulled from the workers; for verification)."""
        out: list[SourceData] = []
        for blocks in self._gather([h.submit("blocks") for h in self.handles]):
            out.extend(blocks)
        return out

    def io_counters(self) -> dict[str, int]:
        totals: Counter = Counter()
        for counters in self._gather([h.submit("io_counters") for h in self.handles]):
            totals.update(counters)
        return dict(totals)

    def branch_counts(self) -> Counter:
        total: Counter = Counter()
        for report in self.reports:
            total.update(report.branches)
        return total

    def latency_model(self) -> "LatencyModel":
        """t_S and t_M measured over the events processed so far."""
        if not self.reports:
            raise ValueError("no events processed yet")
        p = len(self.partitions)
        per_source = [t * p / self.graph.n for t in self.map_times]
        return LatencyModel(
            t_S=max(float(np.mean(per_source)), 1e-12),
            t_M=max(float(np.mean(self.merge_times)), 1e-12),
            n=self.graph.n,
            p=p,
        )

    def close(self) -> None:
        for handle in self.handles:
            handle.shutdown()

    def _discard(self) -> None:
        """Tear down after a failed Step 1: stop every worker and delete the stores written so far."""
        for handle in self.handles:
            try:
                handle.shutdown()
            except Exception as exc:
                log.warning(f"worker shutdown after failed Step 1: {exc}")
        for part in self.partitions:
            if part.store_path:
                Path(part.store_path).unlink(missing_ok=True)

    def __enter__(self) -> "PartitionEngine":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def process_event_parallel(engine: PartitionEngine, ev: EdgeEvent) -> CentralityScores:
    """One event through Map/Reduce; returns the updated scores."""
    engine.process_event(ev)
    return engine.scores


# ─── Latency planning ────────────────────────────────────────

class LatencyModel(BaseModel):
    t_S: float = Field(gt=0)     # mean seconds per source
    t_M: float = Field(gt=0)     # mean merge seconds per event
    n: int = Field(ge=1)
    p: int = Field(default=1, ge=1)


class WorkerPlan(BaseModel):
    feasible: bool
    workers: Optional[int] = None    # smallest p' meeting the inter-arrival time
    t_I: float
    t_U: Optional[float] = None      # predicted update latency with that many workers


def estimate_update_latency(model: LatencyModel) -> float:
    """t_U = t_S · n / p + t_M"""
    return model.t_S * model.n / model.p + model.t_M


def plan_workers(model: LatencyModel, t_I: float) -> WorkerPlan:
    """
    Smallest p' with t_S · n / p' + t_M < t_I, i.e. p' > t_S · n / (t_I − t_M).
    Infeasible when t_I ≤ t_S + t_M: even one source per worker is too slow.
    """
    if t_I <= 0:
        raise ValueError(f"inter-arrival time must be positive, got {t_I}")
    if t_I <= model.t_S + model.t_M:
        return WorkerPlan(feasible=False, t_I=t_I)
    workers = math.floor(model.t_S * model.n / (t_I - model.t_M)) + 1
    t_U = estimate_update_latency(model.model_copy(update={"p": workers}))
    return WorkerPlan(feasible=True, workers=workers, t_I=t_I, t_U=t_U)


# ─── Online replay ───────────────────────────────────────────

class OnlineReport(BaseModel):
    events: int
    missed: int
    missed_fraction: float
    mean_delay: float          # seconds, over missed events only
    max_delay: float = 0.0


def simulate_online(arrivals: list[float], durations: list[float]) -> OnlineReport:
    """
    Replay arrival times against processing times on a single update pipeline.

    Event i starts at max(arrival_i, finish_{i-1}). It is missed when the
    previous update is still running at its arrival; the delay is how long
    it had to wait.
    """
    if len(arrivals) != len(durations):
        raise ValueError("arrivals and durations must have the same length")
    for i in range(1, len(arrivals)):
        if arrivals[i] < arrivals[i - 1]:
            raise ValueError(f"timestamps must be non-decreasing (event {i}: {arrivals[i]} < {arrivals[i - 1]})")

    delays = []
    finish = -math.inf
    for arrival, duration in zip(arrivals, durations):
        if finish > arrival:
            delays.append(finish - arrival)
        finish = max(arrival, finish) + duration

    events = len(arrivals)
    return OnlineReport(
        events=events,
        missed=len(delays),
        missed_fraction=len(delays) / events if events else 0.0,
        mean_delay=float(np.mean(delays)) if delays else 0.0,
        max_delay=max(delays) if delays else 0.0,
    )


@dataclass
class ReplayResult:
    reports: list[EventReport] = field(default_factory=list)
    online: Optional[OnlineReport] = None


def replay_stream(
    engine: PartitionEngine,
    events: list[EdgeEvent],
    progress_cb: Optional[Callable[[str], None]] = None,
) -> ReplayResult:
    """Process timestamped events in order and report how many updates arrived late."""
    arrivals = []
    for i, ev in enumerate(events):
        if ev.timestamp is None:
            raise ValueError(f"event {i} ({ev}) has no timestamp")
        if arrivals and ev.timestamp < arrivals[-1]:
            raise ValueError(f"timestamps must be non-decreasing (event {i}: {ev.timestamp} < {arrivals[-1]})")
        arrivals.append(ev.timestamp)

    result = ReplayResult()
    for i, ev in enumerate(events):
        result.reports.append(engine.process_event(ev))
        if progress_cb and (i + 1) % 100 == 0:
            progress_cb(f"{i + 1}/{len(events)} events")
    result.online = simulate_online(arrivals, [r.elapsed for r in result.reports])
    return result
