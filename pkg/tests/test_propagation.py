import numpy as np
import pytest

from deepgraphs.cell import CellParams
from deepgraphs.graph import Graph, erdos_renyi, permute_vertices, undirected_distances
from deepgraphs.gradcheck import central_difference, relative_error
from deepgraphs.heads import HeadParams
from deepgraphs.propagation import apply, backward, canonical_rowsum, forward, initial_features

from conftest import path_graph


def rand_cell(kind, d, p=0, seed=0, scale=1.0):
    c = CellParams(kind, d, p)
    return c.with_vector(np.random.default_rng(seed).uniform(-scale, scale, len(c)))


def test_zero_sigmoid_params_give_half_everywhere():
    g = erdos_renyi(10, 0.3, 1)
    state, _ = forward(g, CellParams("sigmoid", 4), K=3)
    assert np.all(state.final == 0.5)
    assert state.K == 3 and np.all(state.steps[0] == 0)


def test_initial_features_truncate_and_pad():
    g = Graph(2, [], vertex_attrs=[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    np.testing.assert_array_equal(initial_features(g, 2), [[1, 2], [4, 5]])
    np.testing.assert_array_equal(initial_features(g, 4), [[1, 2, 3, 0], [4, 5, 6, 0]])


def test_forward_checks():
    g = Graph(3, [(0, 1)], vertex_attrs=np.ones((3, 2)))
    with pytest.raises(ValueError):
        forward(g, CellParams("sigmoid", 2), K=1)
    with pytest.raises(ValueError):
        forward(g, CellParams("sigmoid", 2, 2), K=0)
    head = HeadParams("regression", 3)
    with pytest.raises(ValueError):
        apply(g, CellParams("sigmoid", 2, 2), head, K=1)


def test_divergence_raises():
    g = Graph(2, [(0, 1)], edge_attrs=[[np.inf]])
    c = rand_cell("sigmoid", 2, seed=0)
    c["b"][:] = 1.0
    with pytest.raises(FloatingPointError):
        forward(g, c, K=2)


@pytest.mark.parametrize("kind", ["sigmoid", "gru"])
@pytest.mark.parametrize("K", [1, 2, 3])
def test_k_hop_locality(kind, K):
    # on a path, vertex 0's features after K steps depend only on vertices within K hops
    g = path_graph(8)
    n = g.num_vertices
    c = rand_cell(kind, 2, p=1, seed=K)
    base_attr = np.random.default_rng(1).normal(size=(n, 1))
    ref = forward(Graph(n, g.edges, base_attr), c, K)[0].final[0]
    dist = undirected_distances(g, 0)
    for j in range(n):
        attr = base_attr.copy()
        attr[j] += 1.0
        out = forward(Graph(n, g.edges, attr), c, K)[0].final[0]
        if dist[j] > K:
            assert np.array_equal(out, ref)
        else:
            assert not np.array_equal(out, ref)


@pytest.mark.parametrize("kind", ["sigmoid", "gru"])
@pytest.mark.parametrize("weighted", [False, True])
def test_backward_matches_finite_differences(kind, weighted):
    g0 = erdos_renyi(12, 0.2, 3)
    ea = np.random.default_rng(2).uniform(0.5, 1.5, (g0.num_edges, 1)) if weighted else None
    g = Graph(12, g0.edges, np.random.default_rng(3).normal(size=(12, 1)), ea)
    c = rand_cell(kind, 3, p=1, seed=5)
    w = np.random.default_rng(4).normal(size=(12, 3))

    def f(v):
        return float(np.sum(w * forward(g, c.with_vector(v), K=3)[0].final))

    _, tape = forward(g, c, K=3)
    grads = backward(tape, w)
    numeric = central_difference(f, c.vector)
    assert relative_error(grads.vector, numeric).max() < 1e-6


def test_input_gradient():
    g = Graph(6, path_graph(6).edges, vertex_attrs=np.random.default_rng(0).normal(size=(6, 3)))
    c = rand_cell("sigmoid", 3, p=3, seed=1)
    w = np.random.default_rng(2).normal(size=(6, 3))
    _, tape = forward(g, c, K=2)
    _, g_in = backward(tape, w, return_input_grad=True)
    assert g_in.shape == (6, 3)
    with pytest.raises(ValueError):
        backward(tape, np.zeros((5, 3)))


def test_canonical_rowsum_matches_sparse_product():
    g = erdos_renyi(30, 0.2, 9)
    x = np.random.default_rng(0).normal(size=(30, 4))
    np.testing.assert_allclose(canonical_rowsum(g.in_csr, x), g.in_csr @ x, rtol=1e-12, atol=1e-12)
    assert np.all(canonical_rowsum(Graph(3, []).in_csr, x[:3]) == 0)


@pytest.mark.parametrize("kind", ["sigmoid", "gru"])
@pytest.mark.parametrize("seed", range(3))
def test_permutation_equivariance_is_bit_exact(kind, seed):
    rng = np.random.default_rng(seed)
    base = erdos_renyi(40, 0.08, seed)
    g = Graph(40, base.edges, rng.normal(size=(40, 2)), rng.uniform(0.5, 2, (base.num_edges, 1)))
    c = rand_cell(kind, 3, p=2, seed=seed)
    head = HeadParams("regression", 3, 2).with_vector(rng.uniform(-1, 1, len(HeadParams("regression", 3, 2))))
    perm = rng.permutation(40)
    out = apply(g, c, head, K=6, deterministic=True)
    out_perm = apply(permute_vertices(g, perm), c, head, K=6, deterministic=True)
    assert np.array_equal(out_perm[perm], out)


def test_deterministic_mode_close_to_fast_mode():
    g = erdos_renyi(30, 0.1, 2)
    c = rand_cell("gru", 4, seed=3)
    a = forward(g, c, 4)[0].final
    b = forward(g, c, 4, deterministic=True)[0].final
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)
