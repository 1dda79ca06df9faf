import pytest

from brandes import brandes_full
from config import ORACLE_MAX_VERTICES
from errors import SizeGuardError
from graph_core import DynamicGraph
from oracle import compare_scores, networkx_scores, oracle_scores, pair_sums, reference_brandes, scores_close


def test_three_oracles_agree(fixture_graph):
    exact = oracle_scores(fixture_graph)
    assert scores_close(networkx_scores(fixture_graph), exact, rel=1e-12)
    ref, _ = reference_brandes(fixture_graph, keep_sources=False)
    assert scores_close(ref, exact, rel=1e-12)


def test_reference_blocks_match_pull_blocks(random_graph_factory):
    g = random_graph_factory(20, 35, seed=5)
    _, ref_blocks = reference_brandes(g)
    _, blocks = brandes_full(g)
    for ref, got in zip(ref_blocks, blocks):
        assert (ref.d == got.d).all()
        assert (ref.sigma == got.sigma).all()
        assert ref.delta == pytest.approx(got.delta, rel=1e-12, abs=1e-12)


def test_pair_sums_on_path(graphs):
    # ordered pairs of P3: four at distance 1, two at distance 2
    assert pair_sums(graphs("p3")) == (8, 2)


def test_compare_scores_reports_deviation(graphs):
    a, _ = brandes_full(graphs("p3"))
    b = a.copy()
    b.vbc[1] += 0.5
    dev = compare_scores(b, a)
    assert dev["vbc_abs"] == pytest.approx(0.5)
    assert dev["vbc_rel"] == pytest.approx(0.25)
    assert dev["ebc_abs"] == 0.0


def test_compare_scores_requires_same_edges(graphs):
    a, _ = brandes_full(graphs("p3"))
    b, _ = brandes_full(graphs("triangle"))
    with pytest.raises(ValueError):
        compare_scores(a, b)


def test_size_guard():
    with pytest.raises(SizeGuardError):
        oracle_scores(DynamicGraph(ORACLE_MAX_VERTICES + 1))
