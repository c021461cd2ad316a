"""K-step unrolled propagation over a whole graph and its exact adjoint.

The forward pass is synchronous: step k reads only step k-1.  The backward
pass walks the unrolled computation from step K down to 1, sending each
vertex's gradient to its own previous state and, through the aggregates, to
the previous states of its neighbors.  Each step costs O(|V| + |E|) row
operations of width d.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .cell import Aggregates, CellParams, cell_backward, cell_forward
from .graph import Graph


def canonical_rowsum(m: sp.csr_matrix, x: np.ndarray) -> np.ndarray:
    """``m @ x`` with each row's terms summed in ascending value order.

    The result for a vertex depends only on the multiset of its weighted
    neighbor rows, never on vertex numbering, which makes propagation
    bit-exactly permutation equivariant.
    """
    n, d = m.shape[0], x.shape[1]
    if m.nnz == 0:
        return np.zeros((n, d))
    counts = np.diff(m.indptr)
    slot = np.arange(m.nnz) - np.repeat(m.indptr[:-1], counts)
    # NaN padding sorts last; each row is then summed left to right
    padded = np.full((n, int(counts.max()), d), np.nan)
    padded[np.repeat(np.arange(n), counts), slot] = m.data[:, None] * x[m.indices]
    padded = np.sort(padded, axis=1)
    out = np.zeros((n, d))
    for t in range(padded.shape[1]):
        col = padded[:, t]
        out += np.where(np.isnan(col), 0.0, col)
    return out


def aggregate_all(g: Graph, features: np.ndarray, deterministic: bool = False) -> Aggregates:
    if deterministic:
        return Aggregates(canonical_rowsum(g.in_csr, features), canonical_rowsum(g.out_csr, features))
    return Aggregates(g.in_csr @ features, g.out_csr @ features)


def initial_features(g: Graph, d: int) -> np.ndarray:
    """Zeros, or the vertex attributes truncated / zero-padded to width d."""
    phi0 = np.zeros((g.num_vertices, d))
    if g.vertex_attrs is not None:
        w = min(d, g.vertex_attrs.shape[1])
        phi0[:, :w] = g.vertex_attrs[:, :w]
    return phi0


@dataclass
class FeatureState:
    steps: list

    @property
    def final(self) -> np.ndarray:
        return self.steps[-1]

    @property
    def K(self) -> int:
        return len(self.steps) - 1


@dataclass
class PropagationTape:
    graph: Graph
    params: CellParams
    caches: list
    deterministic: bool = False

    @property
    def K(self) -> int:
        return len(self.caches)


def forward(g: Graph, params: CellParams, K: int, deterministic: bool = False):
    """Run K synchronous updates from the initial features.

    Returns ``(FeatureState, PropagationTape)``.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if params.p != g.num_vertex_attrs:
        raise ValueError(
            f"cell expects {params.p} vertex attributes, graph has {g.num_vertex_attrs}"
        )
    phi = initial_features(g, params.d)
    steps, caches = [phi], []
    for _ in range(K):
        agg = aggregate_all(g, phi, deterministic)
        phi, cache = cell_forward(params, phi, agg, g.vertex_attrs, exact=deterministic)
        if not np.all(np.isfinite(phi)):
            raise FloatingPointError("non-finite vertex features; parameters diverged")
        steps.append(phi)
        caches.append(cache)
    return FeatureState(steps), PropagationTape(g, params, caches, deterministic)


def backward(tape: PropagationTape, grad_final: np.ndarray, return_input_grad: bool = False):
    """Gradient of a loss on the step-K features with respect to the cell parameters.

    ``grad_final`` holds dLoss/dphi^K for every vertex (zero rows for
    vertices outside the loss).  With ``return_input_grad`` the gradient
    with respect to the initial features is returned as well.
    """
    g, params = tape.graph, tape.params
    grad = np.asarray(grad_final, dtype=np.float64)
    if grad.shape != (g.num_vertices, params.d):
        raise ValueError("grad_final shape does not match the tape")
    grads = params.zeros_like()
    for cache in reversed(tape.caches):
        g_prev, g_in, g_out, _ = cell_backward(params, cache, grad, grads)
        # phi_in = in_csr @ phi, so its adjoint is in_csr.T = out_csr; likewise for phi_out
        if tape.deterministic:
            grad = g_prev + canonical_rowsum(g.out_csr, g_in) + canonical_rowsum(g.in_csr, g_out)
        else:
            grad = g_prev + g.out_csr @ g_in + g.in_csr @ g_out
    if return_input_grad:
        return grads, grad
    return grads


def apply(g: Graph, params: CellParams, head, K: int, deterministic: bool = False) -> np.ndarray:
    """Predictions for every vertex of ``g``; works on graphs other than the training graph."""
    from .heads import head_forward

    if head.d != params.d:
        raise ValueError(f"head expects d={head.d}, cell produces d={params.d}")
    state, _ = forward(g, params, K, deterministic)
    out, _ = head_forward(head, state.final, exact=deterministic)
    return out
