import numpy as np
import pytest

from deepgraphs.graph import Graph


def two_cycle():
    return Graph(2, [(0, 1), (1, 0)])


def bidirected(n, und_edges):
    e = [(a, b) for a, b in und_edges] + [(b, a) for a, b in und_edges]
    return Graph(n, e)


def path_graph(n):
    return bidirected(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n):
    return bidirected(n, [(i, (i + 1) % n) for i in range(n)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# dense power iteration on the chain 0 -> 1 -> 2, damping 0.85, 1000 rounds
CHAIN_PAGERANK = [0.18441678192715555, 0.3411710465652378, 0.47441217150760767]
