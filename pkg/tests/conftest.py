import numpy as np
import pytest

from brandes import CentralityScores, SourceData, brandes_full
from graph_core import DynamicGraph, random_graph
from oracle import oracle_scores, scores_close
from providers import MemoryProvider

FIXTURES = {
    "p2": (2, [(0, 1)]),
    "p3": (3, [(0, 1), (1, 2)]),
    "p4": (4, [(0, 1), (1, 2), (2, 3)]),
    "p5": (5, [(0, 1), (1, 2), (2, 3), (3, 4)]),
    "c4": (4, [(0, 1), (1, 2), (2, 3), (0, 3)]),
    "c5": (5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)]),
    "triangle": (3, [(0, 1), (1, 2), (0, 2)]),
    "star": (5, [(0, 1), (0, 2), (0, 3), (0, 4)]),
    "diamond": (4, [(0, 1), (0, 2), (1, 3), (2, 3)]),
    "kite": (4, [(0, 1), (1, 2), (2, 3), (1, 3)]),
    "barbell": (6, [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (3, 5), (4, 5)]),
    "two_components": (4, [(0, 1), (2, 3)]),
}


def make_graph(name: str) -> DynamicGraph:
    n, edges = FIXTURES[name]
    return DynamicGraph.from_edges(n, edges)


@pytest.fixture
def graphs():
    return make_graph


@pytest.fixture(params=sorted(FIXTURES))
def fixture_graph(request) -> DynamicGraph:
    return make_graph(request.param)


@pytest.fixture
def random_graph_factory():
    def factory(n: int, m: int, seed: int = 0) -> DynamicGraph:
        return random_graph(n, m, seed=seed)
    return factory


class LiveState:
    """A graph with its scores and in-memory BD blocks, updated event by event."""

    def __init__(self, g: DynamicGraph):
        self.graph = g
        self.scores, blocks = brandes_full(g)
        self.provider = MemoryProvider(blocks)

    @property
    def blocks(self) -> list[SourceData]:
        return self.provider.blocks

    def assert_matches_recompute(self, rel: float = 1e-9, delta_tol: float = 1e-12) -> None:
        fresh, blocks = brandes_full(self.graph)
        assert len(blocks) == len(self.blocks)
        for s, (got, want) in enumerate(zip(self.blocks, blocks)):
            np.testing.assert_array_equal(got.d, want.d, err_msg=f"d of source {s}")
            np.testing.assert_array_equal(got.sigma, want.sigma, err_msg=f"sigma of source {s}")
            np.testing.assert_allclose(got.delta, want.delta, rtol=delta_tol, atol=delta_tol, err_msg=f"delta of source {s}")
        assert scores_close(self.scores, fresh, rel)

    def assert_matches_oracle(self, rel: float = 1e-9) -> None:
        assert scores_close(self.scores, oracle_scores(self.graph), rel)


@pytest.fixture
def live():
    return LiveState


def scores_of(vbc: list[float], ebc: dict) -> CentralityScores:
    return CentralityScores(vbc=np.array(vbc, dtype=np.float64), ebc=dict(ebc))
