from pathlib import Path

import numpy as np
import pytest

from graph_core import Graph, SparseMatrix
from verify import greedy_sequential_mis2

FIXTURES = Path(__file__).parent / 'fixtures'

# 1-based edges 1-2, 2-3, 3-4, 4-5, 4-6 of the six-vertex walkthrough graph
FIG1_EDGES = [(0, 1), (1, 2), (2, 3), (3, 4), (3, 5)]

# priorities per iteration, indexed by 0-based vertex; decided vertices are never asked
FIG1_PRIORITIES = {
    0: np.array([1, 3, 5, 2, 7, 8], dtype=np.uint64),
    1: np.array([0, 5, 1, 0, 2, 9], dtype=np.uint64),
}


def path_edges(n):
    return [(i, i + 1) for i in range(n - 1)]


def random_edges(n, density, rng):
    upper = np.triu(rng.random((n, n)) < density, k=1)
    return list(zip(*np.nonzero(upper)))


def roots_then_greedy(num_vertices, roots):
    """Fixed phase-1 roots for the full graph, greedy MIS-2 for every subgraph"""
    def fn(graph):
        if graph.num_vertices == num_vertices:
            chosen = np.zeros(num_vertices, dtype=bool)
            chosen[roots] = True
            return chosen
        return greedy_sequential_mis2(graph)
    return fn


def random_spd(n, density, rng):
    """Symmetric, strictly diagonally dominant, positive diagonal"""
    pattern = np.triu(rng.random((n, n)) < density, k=1)
    off = np.where(pattern, -rng.random((n, n)), 0.0)
    off = off + off.T
    dense = off + np.diag(np.abs(off).sum(axis=1) + 1.0 + rng.random(n))
    return SparseMatrix.from_dense(dense)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def fig1_graph():
    return Graph.from_edges(6, FIG1_EDGES)


@pytest.fixture
def fig1_override():
    def override(iteration, worklist):
        return FIG1_PRIORITIES[iteration][worklist]
    return override


@pytest.fixture
def path_graph():
    return lambda n: Graph.from_edges(n, path_edges(n))


@pytest.fixture
def random_graph():
    def make(n, density, seed):
        return Graph.from_edges(n, random_edges(n, density, np.random.default_rng(seed)))
    return make


@pytest.fixture
def tridiagonal():
    return SparseMatrix.from_dense([[4.0, -1.0, 0.0], [-1.0, 4.0, -1.0], [0.0, -1.0, 4.0]])
