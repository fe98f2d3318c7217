import numpy as np
import pytest

from nlmod import WeightedGraph

T2_EDGES = [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)]


@pytest.fixture
def T2():
    """Two unit triangles joined by one edge."""
    return WeightedGraph.from_edges(6, T2_EDGES)


@pytest.fixture
def K2():
    return WeightedGraph.from_edges(2, [(0, 1)])


@pytest.fixture
def K3():
    return WeightedGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
