"""PageRank, HITS and Weisfeiler-Lehman refinement.

These serve two roles: they generate regression targets for the learned
model, and they are the reference iterations the learned update is meant
to generalize.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
import scipy.sparse as sp

from .graph import Graph


@dataclass(frozen=True)
class PageRankConfig:
    damping: float = 0.85
    num_iterations: int = 1000
    tolerance: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.damping <= 1.0:
            raise ValueError("damping must lie in [0, 1]")
        if self.num_iterations < 0 or self.tolerance < 0:
            raise ValueError("num_iterations and tolerance must be non-negative")


def _binary_adjacency(g: Graph) -> sp.csr_matrix:
    n = g.num_vertices
    a = sp.csr_matrix(
        (np.ones(g.num_edges), (g.edges[:, 0], g.edges[:, 1])), shape=(n, n)
    )
    a.sort_indices()
    return a


def pagerank(
    g: Graph,
    cfg: PageRankConfig = PageRankConfig(),
    callback: Optional[Callable[[int, np.ndarray], None]] = None,
) -> np.ndarray:
    """Standard damped PageRank with uniform teleport and dangling redistribution.

    Each vertex j sends ``pi[j] / outdeg(j)`` along every out-edge; mass of
    vertices without out-edges is spread uniformly.  ``callback`` is called
    with ``(iteration, scores)`` after every round.
    """
    n = g.num_vertices
    if n == 0:
        raise ValueError("pagerank of an empty graph")
    lam = cfg.damping
    a = _binary_adjacency(g)
    outdeg = np.asarray(a.sum(axis=1)).ravel()
    dangling = outdeg == 0
    inv = np.zeros(n)
    inv[~dangling] = 1.0 / outdeg[~dangling]
    transition_t = (sp.diags(inv) @ a).T.tocsr()

    pi = np.full(n, 1.0 / n)
    for it in range(cfg.num_iterations):
        new = lam * (transition_t @ pi + pi[dangling].sum() / n) + (1.0 - lam) / n
        delta = np.abs(new - pi).sum()
        pi = new
        if callback is not None:
            callback(it, pi)
        if cfg.tolerance > 0 and delta < cfg.tolerance:
            break
    return pi


class HitsScores(NamedTuple):
    hub: np.ndarray
    authority: np.ndarray


def hits(
    g: Graph,
    num_iterations: int = 1000,
    normalization: str = "l2",
    callback: Optional[Callable[[int, HitsScores], None]] = None,
) -> HitsScores:
    """Hub/authority iteration starting from all-ones vectors.

    Authorities collect hub scores over in-edges, then hubs collect the
    updated authority scores over out-edges; both are renormalized each
    round.  ``normalization`` is ``"l2"`` (divide by the Euclidean norm) or
    ``"sum_squares"`` (divide by the raw sum of squares).
    """
    if g.num_vertices == 0:
        raise ValueError("hits of an empty graph")
    if g.num_edges == 0:
        raise ValueError("hits is undefined on an edgeless graph")
    if normalization not in ("l2", "sum_squares"):
        raise ValueError(f"unknown normalization {normalization!r}")
    a = _binary_adjacency(g)
    at = a.T.tocsr()
    hub = np.ones(g.num_vertices)
    auth = np.ones(g.num_vertices)
    for it in range(num_iterations):
        auth = at @ hub
        hub = a @ auth
        auth = auth / _scale(auth, normalization)
        hub = hub / _scale(hub, normalization)
        if callback is not None:
            callback(it, HitsScores(hub, auth))
    return HitsScores(hub, auth)


def _scale(v: np.ndarray, normalization: str) -> float:
    ss = float(v @ v)
    if ss == 0.0:
        raise FloatingPointError("HITS vector collapsed to zero")
    return np.sqrt(ss) if normalization == "l2" else ss


def hits_combined_score(s: HitsScores) -> np.ndarray:
    """Hub plus authority, the scalar used to rank vertices."""
    return np.asarray(s.hub) + np.asarray(s.authority)


@dataclass
class WLState:
    labels: np.ndarray
    round: int
    num_classes: int
    history: list = field(default_factory=list)


def _compress(signatures: list) -> np.ndarray:
    # sorted-signature ids make labels independent of vertex numbering
    table = {sig: k for k, sig in enumerate(sorted(set(signatures)))}
    return np.fromiter((table[s] for s in signatures), dtype=np.int64, count=len(signatures))


def weisfeiler_lehman(g: Graph, max_rounds: int = 10) -> WLState:
    """1-WL color refinement over N(i) = N_in(i) | N_out(i).

    Starts from a single color (or from the distinct vertex-attribute rows)
    and stops once the number of colors no longer grows.  ``history`` holds
    the label vector after every round, starting with the initial coloring.
    """
    n = g.num_vertices
    if g.vertex_attrs is None:
        labels = np.zeros(n, dtype=np.int64)
    else:
        labels = _compress([tuple(row) for row in g.vertex_attrs])
    sym = (g.out_csr + g.in_csr).tocsr()
    sym.sort_indices()
    nbrs = [sym.indices[sym.indptr[i]:sym.indptr[i + 1]] for i in range(n)]

    num_classes = len(np.unique(labels)) if n else 0
    history = [labels.copy()]
    rounds = 0
    for _ in range(max_rounds):
        sigs = [(int(labels[i]), tuple(sorted(labels[nbrs[i]].tolist()))) for i in range(n)]
        new = _compress(sigs)
        new_classes = len(np.unique(new)) if n else 0
        if new_classes <= num_classes:
            break
        labels, num_classes = new, new_classes
        rounds += 1
        history.append(labels.copy())
    return WLState(labels, rounds, num_classes, history)
