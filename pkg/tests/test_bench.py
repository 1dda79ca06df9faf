import os

import pytest

from bench import addition_stream, bench_events, bench_sizes, removal_stream, strong_scaling, time_full_recompute, weak_scaling
from graph_core import connected_components, small_world_graph


@pytest.fixture
def small_world():
    return small_world_graph(60, k=4, p=0.1, seed=1)


def test_addition_stream_picks_new_pairs(small_world):
    events = addition_stream(small_world, 20, seed=3)
    assert len(events) == 20
    assert len({ev.edge for ev in events}) == 20
    assert not any(small_world.has_edge(ev.u1, ev.u2) for ev in events)


def test_removal_stream_keeps_graph_connected(small_world):
    events = removal_stream(small_world, 15, seed=3, keep_connected=True)
    g = small_world.copy()
    for ev in events:
        g.remove_edge(ev.u1, ev.u2)
    assert len(connected_components(g)) == 1


@pytest.mark.parametrize("mode", ["MP", "MO", "DO"])
def test_full_recompute_modes(small_world, mode):
    assert time_full_recompute(small_world, mode) > 0


def test_bench_events_row(small_world):
    row = bench_events(small_world, addition_stream(small_world, 5, seed=1), "add", mode="MO")
    assert row.events == 5
    assert row.min_ms <= row.median_ms <= row.max_ms
    assert row.context_speedup is None


def test_bench_rejects_predecessor_mode(small_world):
    with pytest.raises(ValueError):
        bench_events(small_world, [], "add", mode="MP")


def test_bench_sizes():
    rows, full_rows = bench_sizes([40], 3, [1, 2], ["MO", "DO"], ["add", "remove"], seed=2)
    assert len(full_rows) == 2
    assert len(rows) == 2 * 2 * 2
    assert {row.kind for row in rows} == {"add", "remove"}


def test_scaling_rows(small_world):
    strong = strong_scaling(small_world, [1, 2], events=3)
    assert [(row.scaling, row.workers, row.events) for row in strong] == [("strong", 1, 3), ("strong", 2, 3)]
    assert strong[0].efficiency == pytest.approx(1.0)
    weak = weak_scaling(small_world, [1, 2], events_per_worker=2)
    assert [(row.scaling, row.workers, row.events) for row in weak] == [("weak", 1, 2), ("weak", 2, 4)]


@pytest.mark.slow
def test_speedup_on_1k_graph():
    g = small_world_graph(1000, seed=0)
    row = bench_events(g, addition_stream(g, 20, seed=0), "add", mode="DO")
    assert row.median_speedup > 1
    assert row.context_speedup == 12.0


@pytest.mark.slow
def test_disk_updates_beat_recompute_on_10k_graph():
    g = small_world_graph(10000, seed=0)
    row = bench_events(g, addition_stream(g, 10, seed=0), "add", mode="DO", sigma_width=4)
    assert row.median_ms / 1000 < row.full_seconds
    assert row.context_speedup == 34.0


@pytest.mark.slow
@pytest.mark.skipif((os.cpu_count() or 1) < 4, reason="needs four cores")
def test_scaling_curves():
    g = small_world_graph(1000, k=6, p=0.1, seed=0)
    strong = strong_scaling(g, [1, 2, 4], events=20)
    seconds = [row.seconds for row in strong]
    assert seconds[0] > seconds[1] > seconds[2]
    assert strong[2].efficiency >= 0.6
    weak = weak_scaling(g, [1, 2, 4], events_per_worker=5)
    assert [row.events for row in weak] == [5, 10, 20]
    base = weak[0].seconds
    assert all(abs(row.seconds - base) <= 0.25 * base for row in weak)
