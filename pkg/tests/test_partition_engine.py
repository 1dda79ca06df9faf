import math
import random

import numpy as np
import pytest

from brandes import brandes_full
from config import EngineConfig
from errors import EngineError, EventError
from incremental import EdgeEvent
from oracle import oracle_scores, scores_close
from partition_engine import (
    LatencyModel,
    Partition,
    PartitionEngine,
    PartitionWorker,
    estimate_update_latency,
    partition_sources,
    plan_workers,
    process_event_parallel,
    read_manifest,
    replay_stream,
    simulate_online,
    write_manifest,
)


def mixed_stream(g, count, seed):
    rng = random.Random(seed)
    work = g.copy()
    events = []
    while len(events) < count:
        u, v = rng.sample(range(work.n), 2)
        if work.has_edge(u, v):
            events.append(EdgeEvent.remove(u, v))
            work.remove_edge(u, v)
        else:
            events.append(EdgeEvent.add(u, v))
            work.add_edge(u, v)
    return events


# ─── Partitioning ────────────────────────────────────────────

def test_partition_sources_balanced():
    parts = partition_sources(10, 3)
    assert [(p.lo, p.hi) for p in parts] == [(0, 4), (4, 7), (7, 10)]
    assert [(p.lo, p.hi) for p in partition_sources(10, 1)] == [(0, 10)]


def test_partition_sources_rejects_too_many_workers():
    with pytest.raises(ValueError):
        partition_sources(3, 4)


def test_manifest_roundtrip(tmp_path):
    parts = [Partition(worker_id=0, lo=0, hi=2, store_path="stores/a.sbc"), Partition(worker_id=1, lo=2, hi=5)]
    write_manifest(tmp_path / "manifest.txt", parts)
    assert read_manifest(tmp_path / "manifest.txt") == parts


def test_manifest_with_gap_rejected(tmp_path):
    (tmp_path / "manifest.txt").write_text("0 0 2 -\n1 3 5 -\n")
    with pytest.raises(ValueError):
        read_manifest(tmp_path / "manifest.txt")


# ─── Step 1 and Step 2 ───────────────────────────────────────

@pytest.mark.parametrize("workers", [1, 2, 3])
def test_initial_scores_match_brandes(random_graph_factory, workers):
    g = random_graph_factory(30, 60, seed=8)
    with PartitionEngine.build(g.copy(), EngineConfig(workers=workers)) as engine:
        full, blocks = brandes_full(g)
        assert engine.scores.vbc.tobytes() == full.vbc.tobytes()
        assert engine.scores.ebc == full.ebc
        assert all(a.same_as(b) for a, b in zip(engine.blocks(), blocks))


def test_worker_count_does_not_change_results(random_graph_factory):
    g = random_graph_factory(40, 80, seed=9)
    events = mixed_stream(g, 100, seed=9)
    results = []
    for workers in (1, 2, 4, 8):
        with PartitionEngine.build(g.copy(), EngineConfig(workers=workers)) as engine:
            for ev in events:
                scores = process_event_parallel(engine, ev)
            results.append((scores, engine.blocks(), engine.branch_counts()))
    first, blocks_first, branches_first = results[0]
    for scores, blocks, branches in results[1:]:
        assert scores.vbc.tobytes() == first.vbc.tobytes()
        assert scores.ebc == first.ebc
        assert all(x.same_as(y) for x, y in zip(blocks, blocks_first))
        assert branches == branches_first


def test_failed_build_closes_workers_and_removes_stores(tmp_path, random_graph_factory, monkeypatch):
    g = random_graph_factory(20, 40, seed=13)
    closed = []
    initialize = PartitionWorker.initialize
    close = PartitionWorker.close

    def failing_initialize(self):
        if self.partition.worker_id == 1:
            raise OSError("disk full")
        return initialize(self)

    def tracking_close(self):
        closed.append(self.partition.worker_id)
        close(self)

    monkeypatch.setattr(PartitionWorker, "initialize", failing_initialize)
    monkeypatch.setattr(PartitionWorker, "close", tracking_close)
    with pytest.raises(EngineError):
        PartitionEngine.build(g, EngineConfig(workers=2, storage="disk"), store_dir=tmp_path)
    assert sorted(closed) == [0, 1]
    assert list(tmp_path.glob("*.sbc")) == []
    assert list(tmp_path.glob("*.stage")) == []


def test_every_source_covered_once(random_graph_factory):
    g = random_graph_factory(20, 40, seed=10)
    with PartitionEngine.build(g, EngineConfig(workers=3)) as engine:
        report = engine.process_event(mixed_stream(g, 1, seed=10)[0])
        assert report.processed + report.skipped == g.n


def test_disk_engine_matches_recompute(tmp_path, random_graph_factory):
    g = random_graph_factory(25, 50, seed=12)
    config = EngineConfig(workers=2, storage="disk")
    with PartitionEngine.build(g, config, store_dir=tmp_path) as engine:
        assert sorted(p.name for p in tmp_path.glob("*.sbc")) == ["part-000.sbc", "part-001.sbc"]
        for ev in mixed_stream(g, 15, seed=12):
            engine.process_event(ev)
        fresh, blocks = brandes_full(engine.graph)
        assert scores_close(engine.scores, fresh, rel=1e-9)
        for got, want in zip(engine.blocks(), blocks):
            assert np.array_equal(got.d, want.d) and np.array_equal(got.sigma, want.sigma)
        assert engine.io_counters()["block_writes"] > 0
    assert list(tmp_path.glob("*.stage")) == []


def test_resume_from_stores(tmp_path, graphs):
    g = graphs("barbell")
    config = EngineConfig(workers=2, storage="disk")
    with PartitionEngine.build(g.copy(), config, store_dir=tmp_path) as engine:
        partitions, scores = engine.partitions, engine.scores
    with PartitionEngine.resume(g.copy(), partitions, scores, config) as engine:
        engine.process_event(EdgeEvent.remove(2, 3))
        assert scores_close(engine.scores, oracle_scores(engine.graph), rel=1e-9)


def test_invalid_event_leaves_engine_untouched(graphs):
    with PartitionEngine.build(graphs("p3"), EngineConfig(workers=2)) as engine:
        with pytest.raises(EventError):
            engine.process_event(EdgeEvent.remove(0, 2), line=7)
        assert engine.graph.m == 2


def test_worker_failure_rolls_back_all(graphs, monkeypatch):
    g = graphs("p5")
    with PartitionEngine.build(g, EngineConfig(workers=2)) as engine:
        scores = engine.scores.copy()
        blocks = [b.copy() for b in engine.blocks()]
        original = PartitionWorker.process

        def process(self, ev, attach=None):
            if self.partition.worker_id == 1:
                raise OSError("store unavailable")
            return original(self, ev, attach)

        monkeypatch.setattr(PartitionWorker, "process", process)
        with pytest.raises(EngineError):
            engine.process_event(EdgeEvent.add(0, 4))
        assert not engine.graph.has_edge(0, 4)
        assert scores_close(engine.scores, scores, rel=0.0)
        assert all(a.same_as(b) for a, b in zip(engine.blocks(), blocks))

        monkeypatch.setattr(PartitionWorker, "process", original)
        engine.process_event(EdgeEvent.add(0, 4))
        assert scores_close(engine.scores, oracle_scores(engine.graph), rel=1e-9)


def test_new_vertex_joins_last_partition(graphs):
    with PartitionEngine.build(graphs("p4"), EngineConfig(workers=2)) as engine:
        v, report = engine.add_edge_to_new_vertex(1)
        assert v == 4
        assert engine.partitions[-1].hi == 5
        assert engine.partitions[0].hi == 2
        assert report.branches["new_vertex"] == 4
        assert scores_close(engine.scores, oracle_scores(engine.graph), rel=1e-9)


def test_isolate_vertex(graphs):
    with PartitionEngine.build(graphs("barbell"), EngineConfig(workers=3)) as engine:
        reports = engine.isolate_vertex(3)
        assert len(reports) == 3
        assert engine.graph.degree(3) == 0
        assert scores_close(engine.scores, oracle_scores(engine.graph), rel=1e-9)


def test_process_executor(graphs):
    g = graphs("c5")
    with PartitionEngine.build(g, EngineConfig(workers=2, executor="process")) as engine:
        engine.process_event(EdgeEvent.remove(0, 4))
        engine.process_event(EdgeEvent.add(1, 3))
        assert scores_close(engine.scores, oracle_scores(engine.graph), rel=1e-9)


# ─── Latency planning ────────────────────────────────────────

def test_update_latency():
    model = LatencyModel(t_S=1e-3, n=10000, p=10, t_M=0.05)
    assert estimate_update_latency(model) == pytest.approx(1.05)
    doubled = model.model_copy(update={"p": 20})
    assert estimate_update_latency(doubled) - model.t_M == pytest.approx((estimate_update_latency(model) - model.t_M) / 2)


def test_plan_workers():
    model = LatencyModel(t_S=1e-3, n=10000, t_M=0.05)
    plan = plan_workers(model, 0.5)
    assert plan.feasible
    assert plan.workers == 23
    assert plan.t_U < 0.5
    assert plan_workers(model, 1e6).workers == 1


def test_plan_workers_infeasible():
    model = LatencyModel(t_S=0.2, n=100, t_M=0.1)
    assert not plan_workers(model, 0.3).feasible
    assert plan_workers(model, 0.3 + 1e-9).feasible


def test_latency_model_validation():
    with pytest.raises(ValueError):
        LatencyModel(t_S=0.0, n=10, t_M=0.1)


def test_measured_latency_model(graphs):
    with PartitionEngine.build(graphs("c5"), EngineConfig(workers=1)) as engine:
        with pytest.raises(ValueError):
            engine.latency_model()
        engine.process_event(EdgeEvent.add(0, 2))
        model = engine.latency_model()
        assert model.n == 5 and model.p == 1
        assert math.isfinite(estimate_update_latency(model))


# ─── Online replay ───────────────────────────────────────────

def test_simulate_online():
    report = simulate_online([0.0, 1.0, 2.0], [0.5, 1.5, 0.2])
    assert report.events == 3
    assert report.missed == 1
    assert report.missed_fraction == pytest.approx(1 / 3)
    assert report.mean_delay == pytest.approx(0.5)


def test_simulate_online_no_misses():
    report = simulate_online([0.0, 10.0], [1.0, 1.0])
    assert report.missed == 0
    assert report.mean_delay == 0.0


def test_simulate_online_rejects_decreasing_times():
    with pytest.raises(ValueError):
        simulate_online([1.0, 0.5], [0.1, 0.1])


def test_replay_stream(graphs):
    events = [EdgeEvent.add(0, 2, 0.0), EdgeEvent.remove(0, 1, 1e-9), EdgeEvent.add(0, 4, 100.0)]
    with PartitionEngine.build(graphs("p5"), EngineConfig(workers=2)) as engine:
        result = replay_stream(engine, events)
        assert len(result.reports) == 3
        assert result.online.events == 3
        assert result.online.missed <= 1
        assert scores_close(engine.scores, oracle_scores(engine.graph), rel=1e-9)


def test_replay_requires_timestamps(graphs):
    with PartitionEngine.build(graphs("p3"), EngineConfig(workers=1)) as engine:
        with pytest.raises(ValueError):
            replay_stream(engine, [EdgeEvent.add(0, 2)])
