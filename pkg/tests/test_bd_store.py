import pickle

import numpy as np
import pytest

from bd_store import HEADER_SIZE, BdStore, StoreHeader, StoreWriter, create_store, encode_block
from brandes import UNREACHABLE, SourceData, brandes_full
from config import EngineConfig
from errors import DistanceOverflowError, SigmaOverflowError, StoreFormatError
from incremental import EdgeEvent, apply_event
from providers import StoreProvider


def make_store(tmp_path, g, width=2, name="bd.sbc"):
    _, blocks = brandes_full(g)
    return create_store(tmp_path / name, g.n, 0, g.n, width, blocks), blocks


def test_header_layout():
    assert HEADER_SIZE == 31
    header = StoreHeader(n=1000, lo=0, hi=1, sigma_width=2)
    assert header.block_size == 11000
    assert header.file_size == 31 + 11000
    assert StoreHeader.unpack(header.pack()) == header


def test_header_rejects_bad_width_and_range():
    with pytest.raises(StoreFormatError):
        StoreHeader(n=4, lo=0, hi=4, sigma_width=3)
    with pytest.raises(StoreFormatError):
        StoreHeader(n=4, lo=2, hi=2, sigma_width=2)


def test_load_source(tmp_path, graphs):
    store, blocks = make_store(tmp_path, graphs("p3"))
    with store:
        data = store.load_source(0)
        assert data.d.tolist() == [0, 1, 2]
        for s in range(3):
            assert store.load_source(s).same_as(blocks[s])


def test_unreachable_byte(tmp_path, graphs):
    store, _ = make_store(tmp_path, graphs("two_components"))
    store.close()
    raw = (tmp_path / "bd.sbc").read_bytes()
    assert raw[HEADER_SIZE + 2] == 0xFF
    with BdStore.open(tmp_path / "bd.sbc") as reopened:
        assert reopened.read_distances_only(0)[2] == UNREACHABLE


def test_distance_only_read_counts_n_bytes(tmp_path, graphs):
    store, blocks = make_store(tmp_path, graphs("c5"))
    with store:
        store.reset_counters()
        d = store.read_distances_only(3)
        assert store.bytes_read == 5
        assert (d == blocks[3].d).all()
        for s in range(5):
            store.read_distances_only(s)
        assert store.bytes_read == 5 + 5 * 5


def test_store_file_size(tmp_path, random_graph_factory):
    g = random_graph_factory(50, 100, seed=1)
    store, _ = make_store(tmp_path, g)
    store.close()
    assert (tmp_path / "bd.sbc").stat().st_size == HEADER_SIZE + 50 * 50 * 11


def test_in_place_rewrite_touches_one_block(tmp_path, graphs):
    store, blocks = make_store(tmp_path, graphs("c4"))
    path = tmp_path / "bd.sbc"
    before = path.read_bytes()
    changed = blocks[1].copy()
    changed.delta[0] = 0.25
    with store:
        store.write_source_in_place(1, changed)
        assert store.block_writes == 1
    after = path.read_bytes()
    size = store.header.block_size
    start = store.header.offset(1)
    assert before[:start] == after[:start]
    assert before[start + size:] == after[start + size:]
    assert before[start:start + size] != after[start:start + size]


def test_sigma_width_overflow():
    data = SourceData.from_lists([0, 1], [1, 70000], [0.0, 0.0])
    with pytest.raises(SigmaOverflowError) as info:
        encode_block(0, data, 2)
    assert info.value.vertex == 1
    assert len(encode_block(0, data, 4)) == 2 * (9 + 4)


def test_distance_overflow():
    data = SourceData.from_lists([0, 255], [1, 1], [0.0, 0.0])
    with pytest.raises(DistanceOverflowError):
        encode_block(0, data, 2)


def test_bad_magic(tmp_path, graphs):
    store, _ = make_store(tmp_path, graphs("p3"))
    store.close()
    path = tmp_path / "bd.sbc"
    raw = bytearray(path.read_bytes())
    raw[0:4] = b"XXXX"
    path.write_bytes(bytes(raw))
    with pytest.raises(StoreFormatError, match="magic"):
        BdStore.open(path)


def test_truncated_file(tmp_path, graphs):
    store, _ = make_store(tmp_path, graphs("p3"))
    store.close()
    path = tmp_path / "bd.sbc"
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(StoreFormatError):
        BdStore.open(path)


def test_staged_rollback_and_commit(tmp_path, graphs):
    store, blocks = make_store(tmp_path, graphs("p4"))
    path = tmp_path / "bd.sbc"
    original = path.read_bytes()
    changed = blocks[2].copy()
    changed.delta[1] = 9.0
    with store:
        store.stage_source(2, changed)
        assert store.staged_sources == [2]
        store.rollback()
        assert path.read_bytes() == original
        assert list(tmp_path.glob("*.stage")) == []

        store.stage_source(2, changed)
        store.stage_source(0, blocks[0])
        store.commit()
        assert store.block_writes == 2
        assert store.load_source(2).same_as(changed)
        assert list(tmp_path.glob("*.stage")) == []


def test_staging_dir_from_environment(tmp_path, graphs, monkeypatch):
    staging = tmp_path / "staging"
    monkeypatch.setenv("SBC_STAGING_DIR", str(staging))
    assert EngineConfig().staging_path(tmp_path) == staging


def test_grow(tmp_path, graphs):
    g = graphs("p3")
    store, blocks = make_store(tmp_path, g)
    with store:
        store.grow(4, SourceData.isolated(4, 3))
        assert (store.n, store.lo, store.hi) == (4, 0, 4)
        assert store.load_source(0).d.tolist() == [0, 1, 2, UNREACHABLE]
        assert store.load_source(3).d.tolist() == [UNREACHABLE] * 3 + [0]
    assert (tmp_path / "bd.sbc").stat().st_size == HEADER_SIZE + 4 * 4 * 11


def test_writer_requires_order(tmp_path, graphs):
    _, blocks = brandes_full(graphs("p3"))
    writer = StoreWriter(tmp_path / "w.sbc", 3, 0, 3, 2)
    writer.append(0, blocks[0])
    with pytest.raises(StoreFormatError):
        writer.append(2, blocks[2])
    writer.abort()
    assert not (tmp_path / "w.sbc").exists()


def test_store_not_picklable(tmp_path, graphs):
    store, _ = make_store(tmp_path, graphs("p3"))
    with store, pytest.raises(TypeError):
        pickle.dumps(store)


def test_skipped_sources_read_only_distances(tmp_path, graphs):
    g = graphs("star")
    scores, _ = brandes_full(g)
    store, _ = make_store(tmp_path, g)
    provider = StoreProvider(store)
    store.reset_counters()
    # leaves 1 and 2 sit on the same level for sources 0, 3 and 4
    report = apply_event(g, EdgeEvent.add(1, 2), scores, provider)
    assert report.skipped == 3
    block = store.header.block_size
    assert store.bytes_read == 5 * g.n + 2 * (block - g.n)
    assert store.block_writes == 2
    _, fresh = brandes_full(g)
    for s in range(g.n):
        got = store.load_source(s)
        assert np.array_equal(got.d, fresh[s].d) and np.array_equal(got.sigma, fresh[s].sigma)
    store.close()
