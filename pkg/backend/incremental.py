"""
Incremental betweenness update — framework Step 2.

Provides:
  - EdgeEvent / EventKind          → one edge addition or removal from the stream
  - classify                       → u_H / u_L / dd of an event w.r.t. one source
  - Workspace, VertexFlag, LevelQueues → per-worker scratch state, reset lazily by epoch
  - update_* routines              → one per dispatch case (same level, no level change,
                                     rise, pivots + drop, one-level drop, disconnect)
  - run_sources                    → dispatch + update for every source a provider owns
  - apply_event / handle_new_vertex_event / isolate_vertex → single-provider drivers

Every update routine follows the same three phases for one source:

  1. distance repair   (route specific; vertices whose distance changes get flag M)
  2. path recount      σ' pulled from new predecessors, ascending by new level,
                       expanding only from vertices whose d or σ changed
  3. dependency sweep  δ' pulled from new successors, descending by new level;
                       EBC loses old predecessor terms and gains new ones, and
                       every old/new predecessor of a swept vertex is swept too

Phase 3 uses the same expression as the static computation, so the BD[s]
blocks produced here are bit-identical to a fresh brandes_full. Only the
VBC/EBC sums drift, by rounding, from their recomputed values.
"""

import logging
import time
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum, IntFlag
from typing import Callable, Iterator, Optional, Protocol, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from brandes import UNREACHABLE, CentralityScores, PartialScores, SourceData, pull_dependency
from config import EngineConfig
from errors import EventError, SigmaOverflowError
from graph_core import DynamicGraph, Edge, edge_key

log = logging.getLogger("incremental")


# ─── Events ──────────────────────────────────────────────────

class EventKind(str, Enum):
    ADD = "+"
    REMOVE = "-"


class EdgeEvent(BaseModel):
    """One update from the stream."""
    model_config = ConfigDict(frozen=True)

    kind: EventKind
    u1: int = Field(ge=0)
    u2: int = Field(ge=0)
    timestamp: Optional[float] = None   # seconds; arrival time in the original stream

    @classmethod
    def add(cls, u: int, v: int, timestamp: Optional[float] = None) -> "EdgeEvent":
        return cls(kind=EventKind.ADD, u1=u, u2=v, timestamp=timestamp)

    @classmethod
    def remove(cls, u: int, v: int, timestamp: Optional[float] = None) -> "EdgeEvent":
        return cls(kind=EventKind.REMOVE, u1=u, u2=v, timestamp=timestamp)

    @property
    def edge(self) -> Edge:
        return edge_key(self.u1, self.u2)

    def __str__(self) -> str:
        return f"{self.kind.value} {self.u1} {self.u2}"


def validate_event(g: DynamicGraph, ev: EdgeEvent, line: Optional[int] = None) -> None:
    """Reject an event that does not fit the current graph. Never mutates anything."""
    if ev.u1 >= g.n or ev.u2 >= g.n:
        raise EventError(f"{ev}: vertex out of bounds (n={g.n})", line)
    if ev.u1 == ev.u2:
        raise EventError(f"{ev}: self-loop", line)
    present = g.has_edge(ev.u1, ev.u2)
    if ev.kind is EventKind.ADD and present:
        raise EventError(f"{ev}: edge already present", line)
    if ev.kind is EventKind.REMOVE and not present:
        raise EventError(f"{ev}: edge not present", line)


def mutate_graph(g: DynamicGraph, ev: EdgeEvent) -> None:
    if ev.kind is EventKind.ADD:
        g.add_edge(ev.u1, ev.u2)
    else:
        g.remove_edge(ev.u1, ev.u2)


def revert_graph(g: DynamicGraph, ev: EdgeEvent) -> None:
    if ev.kind is EventKind.ADD:
        g.remove_edge(ev.u1, ev.u2)
    else:
        g.add_edge(ev.u1, ev.u2)


# ─── Classification ──────────────────────────────────────────

@dataclass(frozen=True)
class EndpointClassification:
    uH: int     # endpoint closer to the source
    uL: int     # endpoint farther from the source
    dd: int     # old level difference; huge when only uL is unreachable
    d_uH: int = 0
    d_uL: int = 0

    @property
    def unreachable(self) -> bool:
        return self.d_uH == UNREACHABLE

    @property
    def merges_components(self) -> bool:
        return self.d_uH != UNREACHABLE and self.d_uL == UNREACHABLE


def classify(d: Union[np.ndarray, list[int]], u1: int, u2: int) -> EndpointClassification:
    """
    Order the endpoints by their old distance from the source.

    d is the distance column of BD[s] (read_distances_only is enough).
    Ties keep u1 as uH and give dd=0; when both endpoints are unreachable
    dd is 0 as well.
    """
    d1 = int(d[u1])
    d2 = int(d[u2])
    if d1 <= d2:
        return EndpointClassification(uH=u1, uL=u2, dd=d2 - d1, d_uH=d1, d_uL=d2)
    return EndpointClassification(uH=u2, uL=u1, dd=d1 - d2, d_uH=d2, d_uL=d1)


# ─── Workspace ───────────────────────────────────────────────

class VertexFlag(IntFlag):
    N_T = 0     # untouched in this pass
    D_N = 1     # reached by a descending (distance repair) scan
    U_P = 2     # queued by the dependency sweep (backtracking)
    P_V = 4     # pivot: distance provably unchanged, seeds the repair BFS
    N_P = 8     # distance increases; new value pending
    M = 16      # distance changed (moved level, or cut off)
    P_C = 32    # queued for the path recount


_D_N = int(VertexFlag.D_N)
_U_P = int(VertexFlag.U_P)
_P_V = int(VertexFlag.P_V)
_N_P = int(VertexFlag.N_P)
_M = int(VertexFlag.M)
_P_C = int(VertexFlag.P_C)


class LevelQueues:
    """FIFO queues keyed by level. Levels are visited in order; a level may grow while drained."""

    __slots__ = ("_queues",)

    def __init__(self):
        self._queues: dict[int, list[int]] = {}

    def clear(self) -> None:
        self._queues.clear()

    def push(self, level: int, v: int) -> None:
        queue = self._queues.get(level)
        if queue is None:
            self._queues[level] = [v]
        else:
            queue.append(v)

    def __bool__(self) -> bool:
        return bool(self._queues)

    def pop_lowest(self) -> tuple[int, list[int]]:
        level = min(self._queues)
        return level, self._queues.pop(level)

    def drain_ascending(self) -> Iterator[tuple[int, int]]:
        yield from self._drain(min)

    def drain_descending(self) -> Iterator[tuple[int, int]]:
        yield from self._drain(max)

    def _drain(self, pick) -> Iterator[tuple[int, int]]:
        queues = self._queues
        while queues:
            level = pick(queues)
            queue = queues[level]
            i = 0
            while i < len(queue):
                yield level, queue[i]
                i += 1
            del queues[level]


class Workspace:
    """
    Scratch state reused across sources and events by one worker.

    Flags are stamped with the current epoch; a vertex whose stamp is stale
    reads as N_T, so starting a new source pass is O(1) instead of O(n).
    """

    def __init__(self, n: int = 0):
        self._stamp = [0] * n
        self._flags = [0] * n
        self.epoch = 0
        self.touched = 0
        self.levels = LevelQueues()

    def ensure(self, n: int) -> None:
        extra = n - len(self._stamp)
        if extra > 0:
            self._stamp.extend([0] * extra)
            self._flags.extend([0] * extra)

    def begin(self) -> None:
        self.epoch += 1
        self.touched = 0
        self.levels.clear()

    def flags(self, v: int) -> VertexFlag:
        if self._stamp[v] != self.epoch:
            return VertexFlag.N_T
        return VertexFlag(self._flags[v])

    def has(self, v: int, flag: int) -> bool:
        return self._stamp[v] == self.epoch and bool(self._flags[v] & flag)

    def mark(self, v: int, flag: int) -> None:
        if self._stamp[v] != self.epoch:
            self._stamp[v] = self.epoch
            self._flags[v] = flag
            self.touched += 1
        else:
            self._flags[v] |= flag


# ─── Per-source pass ─────────────────────────────────────────

@dataclass
class UpdateContext:
    """Old and new columns of one BD[s] while it is being updated."""
    adj: list[list[int]]
    s: int
    d: list[int]
    sigma: list[int]
    delta: list[float]
    nd: list[int]
    nsig: list[int]
    ndel: list[float]
    ws: Workspace
    added: Optional[Edge] = None

    @classmethod
    def open(cls, g: DynamicGraph, s: int, data: SourceData, ws: Workspace, ev: EdgeEvent) -> "UpdateContext":
        d = data.d.tolist()
        sigma = data.sigma.tolist()
        delta = data.delta.tolist()
        ws.ensure(g.n)
        ws.begin()
        return cls(
            adj=g.adjacency, s=s,
            d=d, sigma=sigma, delta=delta,
            nd=d.copy(), nsig=sigma.copy(), ndel=delta.copy(),
            ws=ws,
            added=ev.edge if ev.kind is EventKind.ADD else None,
        )

    def result(self) -> SourceData:
        try:
            return SourceData.from_lists(self.nd, self.nsig, self.ndel)
        except OverflowError:
            v = max(range(len(self.nsig)), key=self.nsig.__getitem__)
            raise SigmaOverflowError(self.s, v, self.nsig[v], 8) from None


def _recount_paths(ctx: UpdateContext, seeds: list[int]) -> list[int]:
    """
    Recompute σ' for the seeds, ascending by new level, and for every new
    successor of a vertex whose d or σ changed. Returns the recounted vertices.
    """
    adj, d, sigma, nd, nsig, ws = ctx.adj, ctx.d, ctx.sigma, ctx.nd, ctx.nsig, ctx.ws
    lq = ws.levels
    lq.clear()
    for w in seeds:
        level = nd[w]
        if level != UNREACHABLE and level > 0 and not ws.has(w, _P_C):
            ws.mark(w, _P_C)
            lq.push(level, w)

    recounted = []
    for level, w in lq.drain_ascending():
        above = level - 1
        total = 0
        for x in adj[w]:
            if nd[x] == above:
                total += nsig[x]
        nsig[w] = total
        recounted.append(w)
        if total != sigma[w] or level != d[w]:
            below = level + 1
            for x in adj[w]:
                if nd[x] == below and not ws.has(x, _P_C):
                    ws.mark(x, _P_C)
                    lq.push(below, x)
    return recounted


def _dependency_sweep(ctx: UpdateContext, seeds: list[int], lost: list[int]) -> PartialScores:
    """
    Recompute δ' for the seeds and everything that depends on them, deepest
    level first, and collect the VBC/EBC deltas of this source.
    """
    adj = ctx.adj
    d, sigma, delta = ctx.d, ctx.sigma, ctx.delta
    nd, nsig, ndel = ctx.nd, ctx.nsig, ctx.ndel
    ws = ctx.ws
    added = ctx.added
    lq = ws.levels
    lq.clear()
    vbc: dict[int, float] = {}
    ebc: dict[Edge, float] = {}

    def touch(x: int) -> None:
        level = nd[x]
        if level != UNREACHABLE and level > 0 and not ws.has(x, _U_P):
            ws.mark(x, _U_P)
            lq.push(level, x)

    for w in seeds:
        touch(w)

    # Vertices cut off from the source: their whole old contribution goes away.
    for w in lost:
        old_w = delta[w]
        if old_w != 0.0:
            vbc[w] = -old_w
        ndel[w] = 0.0
        above = d[w] - 1
        sw = sigma[w]
        for x in adj[w]:
            if d[x] == above:
                e = edge_key(x, w)
                ebc[e] = ebc.get(e, 0.0) - sigma[x] / sw * (1.0 + old_w)
                touch(x)

    for level, w in lq.drain_descending():
        acc = pull_dependency(adj, w, nd, nsig, ndel)
        ndel[w] = acc
        old_w = delta[w]
        change = acc - old_w
        if change != 0.0:
            vbc[w] = change

        above = level - 1
        sw = nsig[w]
        dw = d[w]
        old_above = dw - 1 if dw != UNREACHABLE else -1
        old_sw = sigma[w]
        for x in adj[w]:
            new_pred = nd[x] == above
            old_pred = d[x] == old_above
            if not (new_pred or old_pred):
                continue
            e = edge_key(x, w)
            if new_pred:
                ebc[e] = ebc.get(e, 0.0) + nsig[x] / sw * (1.0 + acc)
            if old_pred and e != added:
                ebc[e] = ebc.get(e, 0.0) - sigma[x] / old_sw * (1.0 + old_w)
            touch(x)

    return PartialScores(vbc=vbc, ebc=ebc)


# ─── Dispatch cases ──────────────────────────────────────────

def update_same_level_case(cls: EndpointClassification) -> None:
    """Both endpoints at the same level: no shortest path from s uses the edge. Nothing to do."""
    assert cls.dd == 0
    return None


def update_no_level_change(
    ctx: UpdateContext,
    cls: EndpointClassification,
    kind: EventKind,
    attach: bool = False,
) -> PartialScores:
    """
    uL keeps its level: an addition with dd=1, a removal where uL keeps another
    predecessor, or (attach=True) a brand-new vertex hanging off uH.
    Only path counts below uL and dependencies above it change.
    """
    assert attach or cls.dd == 1
    if attach:
        ctx.nd[cls.uL] = ctx.d[cls.uH] + 1
        ctx.ws.mark(cls.uL, _M)
    recounted = _recount_paths(ctx, [cls.uL])
    return _dependency_sweep(ctx, recounted + [cls.uH], [])


def update_addition_rise(ctx: UpdateContext, cls: EndpointClassification) -> PartialScores:
    """uL rises to d[uH]+1 (dd > 1, or uL was unreachable and the components merge)."""
    assert cls.dd > 1
    adj, d, nd, ws = ctx.adj, ctx.d, ctx.nd, ctx.ws
    nd[cls.uL] = d[cls.uH] + 1
    ws.mark(cls.uL, _D_N | _M)
    moved = [cls.uL]
    i = 0
    while i < len(moved):
        v = moved[i]
        i += 1
        below = nd[v] + 1
        for x in adj[v]:
            if nd[x] > below:
                nd[x] = below
                ws.mark(x, _D_N | _M)
                moved.append(x)

    seeds = list(moved)
    for w in moved:
        dw = d[w]
        if dw == UNREACHABLE:
            continue
        for x in adj[w]:
            if d[x] == dw + 1 and not ws.has(x, _D_N):
                ws.mark(x, _D_N)
                seeds.append(x)

    recounted = _recount_paths(ctx, seeds)
    return _dependency_sweep(ctx, recounted + [cls.uH], [])


@dataclass
class PivotResult:
    affected: list[int]             # vertices whose distance increases (flag N_P)
    visited: list[int]              # affected plus the old successors examined with them
    queues: dict[int, list[int]]    # PQ: pivots by (unchanged) distance
    first: int                      # lowest pivot level


@dataclass
class Disconnected:
    affected: list[int]             # vertices cut off from the source


def find_pivots(ctx: UpdateContext, cls: EndpointClassification) -> Union[PivotResult, Disconnected]:
    """
    Determine which vertices below uL lose their distance after a removal.

    A vertex drops iff every old predecessor drops; uL has none left. The
    non-dropping neighbors of the dropping set are the pivots. Without any
    pivot the dropping set is cut off from the source.
    """
    adj, d, ws = ctx.adj, ctx.d, ctx.ws
    lq = ws.levels
    lq.clear()
    ws.mark(cls.uL, _D_N)
    lq.push(d[cls.uL], cls.uL)

    affected: list[int] = []
    visited: list[int] = []
    while lq:
        level, batch = lq.pop_lowest()
        above = level - 1
        below = level + 1
        for w in batch:
            visited.append(w)
            if any(d[x] == above and not ws.has(x, _N_P) for x in adj[w]):
                continue
            ws.mark(w, _N_P)
            affected.append(w)
            for x in adj[w]:
                if d[x] == below and not ws.has(x, _D_N):
                    ws.mark(x, _D_N)
                    lq.push(below, x)

    queues: dict[int, list[int]] = {}
    for w in affected:
        for x in adj[w]:
            if d[x] != UNREACHABLE and not ws.has(x, _N_P | _P_V):
                ws.mark(x, _P_V)
                queues.setdefault(d[x], []).append(x)

    if not queues:
        return Disconnected(affected=affected)
    return PivotResult(affected=affected, visited=visited, queues=queues, first=min(queues))


def update_removal_drop(ctx: UpdateContext, cls: EndpointClassification, pivots: PivotResult) -> PartialScores:
    """Repair distances of the dropping set by a level-bucketed BFS out of the pivots."""
    assert pivots.queues
    adj, nd, nsig, ws = ctx.adj, ctx.nd, ctx.nsig, ctx.ws
    for w in pivots.affected:
        nd[w] = UNREACHABLE

    lq = ws.levels
    lq.clear()
    for level in sorted(pivots.queues):
        for p in pivots.queues[level]:
            lq.push(level, p)
    while lq:
        level, batch = lq.pop_lowest()
        below = level + 1
        for v in batch:
            for x in adj[v]:
                if nd[x] > below and ws.has(x, _N_P):
                    nd[x] = below
                    ws.mark(x, _M)
                    lq.push(below, x)

    lost = [w for w in pivots.affected if nd[w] == UNREACHABLE]
    for w in lost:
        nsig[w] = 0
        ws.mark(w, _M)
    recounted = _recount_paths(ctx, pivots.visited)
    return _dependency_sweep(ctx, recounted + [cls.uH], lost)


def update_removal_one_level(ctx: UpdateContext, cls: EndpointClassification) -> PartialScores:
    """
    Removal where uL has a neighbor on its own level, so uL drops exactly one
    level and nothing below it drops more. Distances and path counts are fixed
    in a single pass over the old levels, without a pivot search.
    """
    adj, d, sigma, nd, nsig, ws = ctx.adj, ctx.d, ctx.sigma, ctx.nd, ctx.nsig, ctx.ws
    assert any(d[x] == d[cls.uL] for x in adj[cls.uL])
    lq = ws.levels
    lq.clear()
    ws.mark(cls.uL, _D_N)
    lq.push(d[cls.uL], cls.uL)

    candidates: list[int] = []
    while lq:
        level, batch = lq.pop_lowest()
        above = level - 1
        below = level + 1
        kept = []
        dropped = []
        for w in batch:
            if any(d[x] == above and not ws.has(x, _N_P) for x in adj[w]):
                kept.append(w)
            else:
                nd[w] = below
                ws.mark(w, _N_P | _M)
                dropped.append(w)
        for w in kept:
            nsig[w] = sum(nsig[x] for x in adj[w] if nd[x] == above)
        for w in dropped:
            nsig[w] = sum(nsig[x] for x in adj[w] if nd[x] == level)
        for w in batch:
            candidates.append(w)
            if nd[w] != level or nsig[w] != sigma[w]:
                for x in adj[w]:
                    if d[x] == below and not ws.has(x, _D_N):
                        ws.mark(x, _D_N)
                        lq.push(below, x)

    return _dependency_sweep(ctx, candidates + [cls.uH], [])


def update_removal_disconnect(ctx: UpdateContext, cls: EndpointClassification, cut: Disconnected) -> PartialScores:
    """The removal separates uL's side from the source: those vertices become unreachable."""
    nd, nsig, ws = ctx.nd, ctx.nsig, ctx.ws
    for w in cut.affected:
        nd[w] = UNREACHABLE
        nsig[w] = 0
        ws.mark(w, _M)
    return _dependency_sweep(ctx, [cls.uH], cut.affected)


# ─── Dispatch ────────────────────────────────────────────────

SKIP_BRANCHES = ("same_level", "unreachable")


def choose_branch(
    adj: list[list[int]],
    d: Union[np.ndarray, list[int]],
    ev: EdgeEvent,
    cls: EndpointClassification,
    one_level_drop: bool,
    attach: Optional[int] = None,
) -> str:
    """
    Pick the update routine for one source from its distance column alone.

    The graph must already reflect the event. attach names the vertex that
    was created together with this (addition) event.
    """
    if cls.unreachable:
        return "unreachable"
    if attach is not None and cls.uL == attach and cls.merges_components:
        # the new vertex's own source takes the component_merge route below
        return "new_vertex"
    if cls.dd == 0:
        return "same_level"
    if ev.kind is EventKind.ADD:
        if cls.merges_components:
            return "component_merge"
        return "add_no_level_change" if cls.dd == 1 else "add_rise"

    uL = cls.uL
    above = cls.d_uL - 1
    if any(int(d[x]) == above for x in adj[uL]):
        return "remove_no_level_change"
    if one_level_drop and any(int(d[x]) == cls.d_uL for x in adj[uL]):
        return "remove_one_level"
    return "remove_pivots"


@dataclass
class SourceUpdate:
    """What one source contributes to an event: its new BD block and score deltas."""
    source: int
    data: SourceData
    scores: PartialScores
    branch: str
    touched: int


def update_source(
    g: DynamicGraph,
    s: int,
    data: SourceData,
    ev: EdgeEvent,
    cls: EndpointClassification,
    branch: str,
    ws: Workspace,
) -> SourceUpdate:
    """Run the routine chosen by choose_branch on BD[s]."""
    ctx = UpdateContext.open(g, s, data, ws, ev)
    if branch in ("add_no_level_change", "remove_no_level_change"):
        partial = update_no_level_change(ctx, cls, ev.kind)
    elif branch == "new_vertex":
        partial = update_no_level_change(ctx, cls, ev.kind, attach=True)
    elif branch in ("add_rise", "component_merge"):
        partial = update_addition_rise(ctx, cls)
    elif branch == "remove_one_level":
        partial = update_removal_one_level(ctx, cls)
    elif branch == "remove_pivots":
        found = find_pivots(ctx, cls)
        if isinstance(found, Disconnected):
            branch = "remove_disconnect"
            partial = update_removal_disconnect(ctx, cls, found)
        else:
            branch = "remove_drop"
            partial = update_removal_drop(ctx, cls, found)
    else:
        raise ValueError(f"no update routine for branch {branch!r}")
    return SourceUpdate(source=s, data=ctx.result(), scores=partial, branch=branch, touched=ws.touched)


# ─── Providers ───────────────────────────────────────────────

class BdProvider(Protocol):
    """Where BD[s] blocks for a contiguous source range live (memory or an SBC1 store)."""
    lo: int
    hi: int

    def read_distances(self, s: int) -> np.ndarray: ...
    def load(self, s: int, d: Optional[np.ndarray] = None) -> SourceData: ...
    def stage(self, s: int, data: SourceData) -> None: ...
    def commit(self) -> None: ...
    def rollback(self) -> None: ...
    def grow(self, n: int, new_source: Optional[SourceData] = None) -> None: ...


# ─── Event drivers ───────────────────────────────────────────

@dataclass
class SourcePass:
    """Outcome of running one event over one provider's sources (not yet committed)."""
    partials: list[tuple[int, PartialScores]] = field(default_factory=list)
    branches: Counter = field(default_factory=Counter)
    skipped: int = 0
    touched: int = 0
    elapsed: float = 0.0

    @property
    def processed(self) -> int:
        return len(self.partials)

    @property
    def disconnected(self) -> bool:
        return self.branches["remove_disconnect"] > 0


def run_sources(
    g: DynamicGraph,
    ev: EdgeEvent,
    provider: BdProvider,
    ws: Workspace,
    one_level_drop: bool = True,
    attach: Optional[int] = None,
    progress_cb: Optional[Callable[[str], None]] = None,
) -> SourcePass:
    """
    Update every BD[s] the provider owns for an event already applied to g.

    Sources whose dispatch says "skip" are never loaded past their distance
    column and never rewritten. Updated blocks are staged on the provider;
    the caller commits or rolls back.
    """
    start = time.perf_counter()
    result = SourcePass()
    adj = g.adjacency
    total = provider.hi - provider.lo
    for i, s in enumerate(range(provider.lo, provider.hi)):
        d = provider.read_distances(s)
        cls = classify(d, ev.u1, ev.u2)
        branch = choose_branch(adj, d, ev, cls, one_level_drop, attach)
        if branch in SKIP_BRANCHES:
            if branch == "same_level":
                update_same_level_case(cls)
            result.branches[branch] += 1
            result.skipped += 1
            continue
        update = update_source(g, s, provider.load(s, d), ev, cls, branch, ws)
        provider.stage(s, update.data)
        result.partials.append((s, update.scores))
        result.branches[update.branch] += 1
        result.touched += update.touched
        if progress_cb and (i + 1) % 1000 == 0:
            progress_cb(f"{i + 1}/{total} sources")
    result.elapsed = time.perf_counter() - start
    return result


def merge_updates(scores: CentralityScores, partials: list[tuple[int, PartialScores]], ev: EdgeEvent) -> None:
    """Reduce per-source deltas into the scores, in ascending source order."""
    e = ev.edge
    if ev.kind is EventKind.ADD:
        scores.ebc[e] = 0.0
    for _, partial in sorted(partials, key=lambda item: item[0]):
        scores.apply(partial)
    if ev.kind is EventKind.REMOVE:
        scores.ebc.pop(e, None)


@dataclass
class EventReport:
    event: EdgeEvent
    branches: Counter
    processed: int
    skipped: int
    touched: int
    disconnected: bool
    elapsed: float

    @classmethod
    def from_passes(cls, ev: EdgeEvent, passes: list[SourcePass], elapsed: float) -> "EventReport":
        branches: Counter = Counter()
        for p in passes:
            branches.update(p.branches)
        return cls(
            event=ev,
            branches=branches,
            processed=sum(p.processed for p in passes),
            skipped=sum(p.skipped for p in passes),
            touched=sum(p.touched for p in passes),
            disconnected=any(p.disconnected for p in passes),
            elapsed=elapsed,
        )


def apply_event(
    g: DynamicGraph,
    ev: EdgeEvent,
    scores: CentralityScores,
    provider: BdProvider,
    ws: Optional[Workspace] = None,
    config: Optional[EngineConfig] = None,
    attach: Optional[int] = None,
) -> EventReport:
    """
    Apply one event end to end against a single provider that owns every source.

    On any failure the graph mutation is reverted, staged blocks are rolled
    back and the scores are left untouched.
    """
    config = config or EngineConfig()
    ws = ws or Workspace(g.n)
    validate_event(g, ev)
    start = time.perf_counter()
    mutate_graph(g, ev)
    try:
        result = run_sources(g, ev, provider, ws, config.one_level_drop, attach)
    except Exception:
        provider.rollback()
        revert_graph(g, ev)
        raise
    provider.commit()
    merge_updates(scores, result.partials, ev)
    elapsed = time.perf_counter() - start
    log.debug(f"{ev}: {result.processed} updated, {result.skipped} skipped in {elapsed * 1000:.1f} ms")
    return EventReport.from_passes(ev, [result], elapsed)


def add_isolated_vertex(g: DynamicGraph, scores: CentralityScores, provider: BdProvider) -> int:
    """Append a degree-0 vertex: every BD grows by one unreachable entry, plus a new source."""
    v = g.add_vertex()
    scores.add_vertex()
    new_block = SourceData.isolated(g.n, v) if provider.hi == v else None
    provider.grow(g.n, new_block)
    return v


def handle_new_vertex_event(
    g: DynamicGraph,
    scores: CentralityScores,
    provider: BdProvider,
    u_existing: int,
    ws: Optional[Workspace] = None,
    config: Optional[EngineConfig] = None,
    timestamp: Optional[float] = None,
) -> tuple[int, EventReport]:
    """
    Attach a brand-new vertex to u_existing.

    The vertex enters with zero VBC and an isolated BD block; the edge is
    then processed as an addition where every source reaching u_existing
    places the new vertex directly below it.
    """
    g.neighbors(u_existing)
    v = add_isolated_vertex(g, scores, provider)
    ev = EdgeEvent.add(u_existing, v, timestamp)
    return v, apply_event(g, ev, scores, provider, ws, config, attach=v)


def isolate_vertex(
    g: DynamicGraph,
    scores: CentralityScores,
    provider: BdProvider,
    v: int,
    ws: Optional[Workspace] = None,
    config: Optional[EngineConfig] = None,
) -> list[EventReport]:
    """Remove every edge of v, one removal event at a time. v keeps its id with VBC 0."""
    ws = ws or Workspace(g.n)
    return [
        apply_event(g, EdgeEvent.remove(v, u), scores, provider, ws, config)
        for u in list(g.neighbors(v))
    ]
