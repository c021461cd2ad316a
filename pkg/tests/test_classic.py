import itertools

import numpy as np
import pytest

from deepgraphs.classic import PageRankConfig, hits, hits_combined_score, pagerank, weisfeiler_lehman
from deepgraphs.graph import Graph, erdos_renyi, permute_vertices

from conftest import CHAIN_PAGERANK, bidirected, cycle_graph, path_graph, two_cycle


def dense_pagerank(g, lam=0.85, iters=1000):
    n = g.num_vertices
    a = np.zeros((n, n))
    for i, j in g.edges:
        a[i, j] = 1.0
    out = a.sum(axis=1)
    m = np.empty((n, n))
    for i in range(n):
        m[i] = a[i] / out[i] if out[i] else 1.0 / n
    pi = np.full(n, 1.0 / n)
    for _ in range(iters):
        pi = lam * m.T @ pi + (1 - lam) / n
    return pi


def test_pagerank_two_cycle():
    np.testing.assert_allclose(pagerank(two_cycle()), [0.5, 0.5], atol=1e-12)


def test_pagerank_single_dangling_vertex():
    assert pagerank(Graph(1, [])).tolist() == [1.0]


def test_pagerank_chain_golden():
    np.testing.assert_allclose(pagerank(Graph(3, [(0, 1), (1, 2)])), CHAIN_PAGERANK, rtol=0, atol=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_pagerank_matches_dense_oracle(seed):
    g = erdos_renyi(40, 0.06, seed)
    sums = []
    pi = pagerank(g, callback=lambda it, v: sums.append(v.sum()))
    np.testing.assert_allclose(pi, dense_pagerank(g), atol=1e-12)
    assert max(abs(s - 1.0) for s in sums) < 1e-12
    assert np.all(pi > 0)


def test_pagerank_damping_zero_is_uniform():
    g = erdos_renyi(10, 0.3, 1)
    np.testing.assert_allclose(pagerank(g, PageRankConfig(damping=0.0)), np.full(10, 0.1))


def test_pagerank_tolerance_stops_early():
    rounds = []
    pagerank(erdos_renyi(30, 0.1, 2), PageRankConfig(tolerance=1e-8), callback=lambda it, v: rounds.append(it))
    assert len(rounds) < 1000


def test_pagerank_ignores_edge_weights():
    base = erdos_renyi(15, 0.2, 4)
    weighted = Graph(15, base.edges, edge_attrs=np.linspace(0.1, 5, base.num_edges)[:, None])
    assert np.array_equal(pagerank(base), pagerank(weighted))


def test_pagerank_config_validation():
    with pytest.raises(ValueError):
        PageRankConfig(damping=1.5)
    with pytest.raises(ValueError):
        pagerank(Graph(0, []))


def test_hits_star():
    # 0 points at 1, 2, 3: hub is 0, authorities are the leaves
    s = hits(Graph(4, [(0, 1), (0, 2), (0, 3)]))
    np.testing.assert_allclose(s.hub, [1, 0, 0, 0], atol=1e-15)
    np.testing.assert_allclose(s.authority, [0] + [1 / np.sqrt(3)] * 3, atol=1e-15)
    np.testing.assert_allclose(hits_combined_score(s), s.hub + s.authority)


@pytest.mark.parametrize("seed", [3, 11])
def test_hits_matches_singular_vectors(seed):
    g = erdos_renyi(20, 0.2, seed)
    a = np.zeros((20, 20))
    a[g.edges[:, 0], g.edges[:, 1]] = 1
    u, s, vt = np.linalg.svd(a)
    assert s[0] - s[1] > 1e-3
    norms = []
    res = hits(g, callback=lambda it, x: norms.append((np.linalg.norm(x.hub), np.linalg.norm(x.authority))))
    np.testing.assert_allclose(res.hub, np.abs(u[:, 0]), atol=1e-6)
    np.testing.assert_allclose(res.authority, np.abs(vt[0]), atol=1e-6)
    assert max(abs(h - 1) + abs(a_ - 1) for h, a_ in norms) < 1e-9


def test_hits_sum_squares_normalization():
    g = erdos_renyi(12, 0.3, 2)
    a = np.zeros((12, 12))
    a[g.edges[:, 0], g.edges[:, 1]] = 1
    auth = a.T @ np.ones(12)
    hub = a @ auth
    s = hits(g, num_iterations=1, normalization="sum_squares")
    np.testing.assert_allclose(s.authority, auth / (auth @ auth), rtol=1e-14)
    np.testing.assert_allclose(s.hub, hub / (hub @ hub), rtol=1e-14)
    with pytest.raises(ValueError):
        hits(g, normalization="l1")


def test_hits_rejects_edgeless():
    with pytest.raises(ValueError):
        hits(Graph(3, []))


def test_classics_are_deterministic():
    g = erdos_renyi(50, 0.05, 8)
    assert np.array_equal(pagerank(g), pagerank(g))
    assert np.array_equal(hits(g).hub, hits(g).hub)


def test_wl_cycle_is_one_class():
    st = weisfeiler_lehman(cycle_graph(4))
    assert st.num_classes == 1 and st.round == 0


def test_wl_path_of_three():
    st = weisfeiler_lehman(path_graph(3))
    assert st.num_classes == 2
    assert st.labels[0] == st.labels[2] != st.labels[1]


def test_wl_cannot_separate_c6_from_two_triangles():
    c6 = cycle_graph(6)
    two_c3 = bidirected(6, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])
    assert sorted(weisfeiler_lehman(c6).labels) == sorted(weisfeiler_lehman(two_c3).labels)
    assert not _isomorphic(c6, two_c3)


def _isomorphic(g, h):
    eg = set(map(tuple, g.edges.tolist()))
    eh = set(map(tuple, h.edges.tolist()))
    for perm in itertools.permutations(range(g.num_vertices)):
        if {(perm[a], perm[b]) for a, b in eg} == eh:
            return True
    return False


def test_wl_respects_vertex_attributes():
    g = Graph(4, cycle_graph(4).edges, vertex_attrs=[[1.0], [0.0], [0.0], [0.0]])
    st = weisfeiler_lehman(g)
    # attributed vertex, its two neighbors, the opposite vertex
    assert st.num_classes == 3


@pytest.mark.parametrize("seed", range(4))
def test_wl_equivariant(seed):
    g = erdos_renyi(25, 0.1, seed)
    perm = np.random.default_rng(seed).permutation(25)
    a = weisfeiler_lehman(g).labels
    b = weisfeiler_lehman(permute_vertices(g, perm)).labels
    assert np.array_equal(b[perm], a)
