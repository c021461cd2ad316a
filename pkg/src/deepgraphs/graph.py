"""Directed attributed graphs: construction, text ingestion and synthetic models."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from os import PathLike
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp


class GraphFormatError(ValueError):
    """Raised when an edge-list or label file cannot be parsed."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable directed graph with optional vertex and edge attributes.

    Edges are kept in canonical (src, dst) lexicographic order so that two
    graphs with the same edge set compare equal regardless of input order.
    ``edge_attrs`` rows follow that order.
    """

    num_vertices: int
    edges: np.ndarray
    vertex_attrs: Optional[np.ndarray] = None
    edge_attrs: Optional[np.ndarray] = None
    id_map: Optional[dict] = field(default=None, repr=False)

    def __post_init__(self):
        n = int(self.num_vertices)
        if n < 0:
            raise ValueError("num_vertices must be non-negative")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise ValueError("edge endpoint outside [0, num_vertices)")
        eattr = None
        if self.edge_attrs is not None:
            eattr = np.asarray(self.edge_attrs, dtype=np.float64)
            if eattr.ndim == 1:
                eattr = eattr[:, None]
            if eattr.shape[0] != edges.shape[0]:
                raise ValueError("edge_attrs row count must equal number of edges")
            if eattr.shape[1] == 0:
                eattr = None
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        edges = edges[order]
        if eattr is not None:
            eattr = eattr[order]
        if len(edges) > 1:
            dup = np.all(edges[1:] == edges[:-1], axis=1)
            if dup.any():
                raise ValueError("duplicate directed edges")
        vattr = None
        if self.vertex_attrs is not None:
            vattr = np.asarray(self.vertex_attrs, dtype=np.float64)
            if vattr.ndim == 1:
                vattr = vattr[:, None]
            if vattr.shape[0] != n:
                raise ValueError("vertex_attrs row count must equal num_vertices")
            if vattr.shape[1] == 0:
                vattr = None
        edges.setflags(write=False)
        for arr in (vattr, eattr):
            if arr is not None:
                arr.setflags(write=False)
        object.__setattr__(self, "num_vertices", n)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "vertex_attrs", vattr)
        object.__setattr__(self, "edge_attrs", eattr)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_vertex_attrs(self) -> int:
        return 0 if self.vertex_attrs is None else self.vertex_attrs.shape[1]

    @cached_property
    def edge_weights(self) -> np.ndarray:
        """Per-edge scalar weight: the first edge attribute, or 1."""
        if self.edge_attrs is None:
            return np.ones(self.num_edges)
        return self.edge_attrs[:, 0].copy()

    @cached_property
    def out_csr(self) -> sp.csr_matrix:
        """Weighted adjacency, row i holds the out-neighbors of i."""
        n = self.num_vertices
        m = sp.csr_matrix(
            (self.edge_weights, (self.edges[:, 0], self.edges[:, 1])), shape=(n, n)
        )
        m.sort_indices()
        return m

    @cached_property
    def in_csr(self) -> sp.csr_matrix:
        """Weighted transpose adjacency, row i holds the in-neighbors of i."""
        m = self.out_csr.T.tocsr()
        m.sort_indices()
        return m

    def out_neighbors(self, i: int) -> np.ndarray:
        m = self.out_csr
        return m.indices[m.indptr[i]:m.indptr[i + 1]]

    def in_neighbors(self, i: int) -> np.ndarray:
        m = self.in_csr
        return m.indices[m.indptr[i]:m.indptr[i + 1]]

    def neighbors(self, i: int) -> np.ndarray:
        """N(i) = N_in(i) | N_out(i), sorted and deduplicated."""
        return np.union1d(self.in_neighbors(i), self.out_neighbors(i))

    def out_degree(self) -> np.ndarray:
        return np.diff(self.out_csr.indptr)

    def in_degree(self) -> np.ndarray:
        return np.diff(self.in_csr.indptr)

    def without_attributes(self) -> "Graph":
        return Graph(self.num_vertices, self.edges)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.num_vertices == other.num_vertices
            and np.array_equal(self.edges, other.edges)
            and _opt_equal(self.vertex_attrs, other.vertex_attrs)
            and _opt_equal(self.edge_attrs, other.edge_attrs)
        )

    __hash__ = None


def _opt_equal(a, b):
    if a is None or b is None:
        return a is None and b is None
    return a.shape == b.shape and np.array_equal(a, b)


@dataclass(frozen=True)
class LabeledSet:
    """Labeled vertices X with their label rows Y (M x t)."""

    vertex_ids: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.vertex_ids, dtype=np.int64).reshape(-1)
        y = np.asarray(self.labels, dtype=np.float64)
        if y.ndim == 1:
            y = y[:, None]
        if y.shape[0] != ids.shape[0]:
            raise ValueError("label rows must align with vertex ids")
        if len(np.unique(ids)) != len(ids):
            raise ValueError("duplicate vertex id in labeled set")
        if ids.size and ids.min() < 0:
            raise ValueError("negative vertex id in labeled set")
        object.__setattr__(self, "vertex_ids", ids)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return len(self.vertex_ids)

    @property
    def arity(self) -> int:
        return self.labels.shape[1]

    def subset(self, index) -> "LabeledSet":
        return LabeledSet(self.vertex_ids[index], self.labels[index])

    def check_against(self, g: Graph) -> None:
        if len(self) and self.vertex_ids.max() >= g.num_vertices:
            raise ValueError("labeled vertex id outside the graph")


def from_edges(
    num_vertices: int,
    edges,
    edge_attrs=None,
    vertex_attrs=None,
    undirected: bool = False,
) -> tuple[Graph, int]:
    """Build a graph, collapsing duplicate edges (first occurrence wins).

    Returns the graph and the number of duplicates dropped.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    attrs = None if edge_attrs is None else np.asarray(edge_attrs, dtype=np.float64)
    if attrs is not None and attrs.ndim == 1:
        attrs = attrs[:, None]
    if undirected:
        edges = np.concatenate([edges, edges[:, ::-1]])
        if attrs is not None:
            attrs = np.concatenate([attrs, attrs])
    # self-loops appear twice after mirroring; only count genuine duplicates
    _, first = np.unique(edges, axis=0, return_index=True)
    first = np.sort(first)
    dropped = len(edges) - len(first)
    if undirected:
        dropped -= int(np.sum(edges[: len(edges) // 2, 0] == edges[: len(edges) // 2, 1]))
    edges = edges[first]
    if attrs is not None:
        attrs = attrs[first]
    return Graph(num_vertices, edges, vertex_attrs, attrs), dropped


def load_edge_list(
    path: str | PathLike,
    num_vertices: Optional[int] = None,
    undirected: bool = False,
    relabel: bool = False,
) -> Graph:
    """Read a whitespace-delimited ``src dst [attr ...]`` file.

    Lines starting with ``#`` are comments.  With ``relabel`` the external
    ids are mapped to dense ids in order of first appearance and the mapping
    is kept in ``Graph.id_map``.
    """
    pairs, attrs = [], []
    arity = None
    id_map: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 2:
                raise GraphFormatError(f"line {lineno}: expected 'src dst [attr...]'")
            try:
                src, dst = int(parts[0]), int(parts[1])
                vals = [float(x) for x in parts[2:]]
            except ValueError as exc:
                raise GraphFormatError(f"line {lineno}: {exc}") from None
            if src < 0 or dst < 0:
                raise GraphFormatError(f"line {lineno}: negative vertex id")
            if arity is None:
                arity = len(vals)
            elif len(vals) != arity:
                raise GraphFormatError(
                    f"line {lineno}: edge attribute arity {len(vals)}, expected {arity}"
                )
            if relabel:
                src = id_map.setdefault(src, len(id_map))
                dst = id_map.setdefault(dst, len(id_map))
            pairs.append((src, dst))
            attrs.append(vals)

    seen = len(id_map) if relabel else (1 + max(max(p) for p in pairs) if pairs else 0)
    if num_vertices is None:
        n = seen
    else:
        if seen > num_vertices:
            raise GraphFormatError(
                f"vertex id {seen - 1} exceeds num_vertices override {num_vertices}"
            )
        n = num_vertices
    eattr = np.asarray(attrs, dtype=np.float64) if arity else None
    g, dropped = from_edges(n, np.asarray(pairs, dtype=np.int64), eattr, undirected=undirected)
    if dropped:
        warnings.warn(f"collapsed {dropped} duplicate edges", stacklevel=2)
    if relabel:
        object.__setattr__(g, "id_map", id_map)
    return g


def save_edge_list(g: Graph, path: str | PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# vertices {g.num_vertices} edges {g.num_edges}\n")
        for k, (s, t) in enumerate(g.edges):
            if g.edge_attrs is None:
                fh.write(f"{s} {t}\n")
            else:
                extra = " ".join(repr(float(v)) for v in g.edge_attrs[k])
                fh.write(f"{s} {t} {extra}\n")


def load_labels(path: str | PathLike) -> LabeledSet:
    ids, rows = [], []
    arity = None
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 2:
                raise GraphFormatError(f"line {lineno}: expected 'vertex_id value [value...]'")
            try:
                vid = int(parts[0])
                vals = [float(x) for x in parts[1:]]
            except ValueError as exc:
                raise GraphFormatError(f"line {lineno}: {exc}") from None
            if vid in seen:
                raise GraphFormatError(f"line {lineno}: duplicate vertex id {vid}")
            if arity is None:
                arity = len(vals)
            elif len(vals) != arity:
                raise GraphFormatError(f"line {lineno}: label arity {len(vals)}, expected {arity}")
            seen.add(vid)
            ids.append(vid)
            rows.append(vals)
    return LabeledSet(np.asarray(ids, dtype=np.int64), np.asarray(rows, dtype=np.float64).reshape(len(ids), arity or 1))


def save_labels(labeled: LabeledSet, path: str | PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for vid, row in zip(labeled.vertex_ids, labeled.labels):
            fh.write(f"{vid} " + " ".join(repr(float(v)) for v in row) + "\n")


# --- synthetic models -------------------------------------------------------


def erdos_renyi(n: int, p: float, seed: int) -> Graph:
    """Directed G(n, p): every ordered pair (i, j), i != j, drawn independently."""
    if n < 1 or not 0.0 <= p <= 1.0:
        raise ValueError("erdos_renyi needs n >= 1 and 0 <= p <= 1")
    rng = np.random.default_rng(seed)
    pairs = n * (n - 1)
    # edge count is Binomial(pairs, p); a uniform subset of that size is then G(n, p)
    m = int(rng.binomial(pairs, p)) if pairs else 0
    code = np.sort(rng.choice(pairs, size=m, replace=False)) if m else np.zeros(0, dtype=np.int64)
    src, rest = np.divmod(code, n - 1)
    dst = rest + (rest >= src)
    return Graph(n, np.column_stack([src, dst]))


def barabasi_albert(n: int, m: int, seed: int) -> Graph:
    """Preferential attachment; each undirected edge is emitted both ways."""
    if m < 1 or m >= n:
        raise ValueError("barabasi_albert needs 1 <= m < n")
    rng = np.random.default_rng(seed)
    # seed clique on the first m + 1 vertices
    und = [(i, j) for i in range(m + 1) for j in range(i + 1, m + 1)]
    repeated = [v for e in und for v in e]
    for v in range(m + 1, n):
        targets: set[int] = set()
        while len(targets) < m:
            targets.add(repeated[rng.integers(len(repeated))])
        for t in sorted(targets):
            und.append((t, v))
            repeated.extend((t, v))
    g, _ = from_edges(n, np.asarray(und), undirected=True)
    return g


def planted_partition(n: int, k_blocks: int, p_in: float, p_out: float, seed: int) -> Graph:
    """Stochastic block model with ``k_blocks`` near-equal contiguous blocks.

    The block of each vertex is returned as a one-column vertex attribute.
    """
    if n < 1 or not 1 <= k_blocks <= n or not (0 <= p_in <= 1 and 0 <= p_out <= 1):
        raise ValueError("invalid planted_partition parameters")
    rng = np.random.default_rng(seed)
    sizes = np.full(k_blocks, n // k_blocks)
    sizes[: n % k_blocks] += 1
    block = np.repeat(np.arange(k_blocks), sizes)
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(block[iu] == block[ju], p_in, p_out)
    keep = rng.random(len(iu)) < prob
    g, _ = from_edges(
        n,
        np.column_stack([iu[keep], ju[keep]]),
        vertex_attrs=block[:, None].astype(np.float64),
        undirected=True,
    )
    return g


def generate_synthetic(model: str, seed: int, **params) -> Graph:
    """Dispatch on ``model`` in {'erdos-renyi', 'barabasi-albert', 'planted-partition'}."""
    builders = {
        "erdos-renyi": erdos_renyi,
        "barabasi-albert": barabasi_albert,
        "planted-partition": planted_partition,
    }
    try:
        build = builders[model]
    except KeyError:
        raise ValueError(f"unknown synthetic model {model!r}") from None
    return build(seed=seed, **params)


def permute_vertices(g: Graph, perm: Sequence[int]) -> Graph:
    """Relabel vertex ``i`` as ``perm[i]``."""
    perm = np.asarray(perm, dtype=np.int64)
    n = g.num_vertices
    if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
        raise ValueError("perm must be a bijection of range(num_vertices)")
    vattr = None
    if g.vertex_attrs is not None:
        vattr = np.empty_like(g.vertex_attrs)
        vattr[perm] = g.vertex_attrs
    return Graph(n, perm[g.edges], vattr, g.edge_attrs)


def inverse_permutation(perm) -> np.ndarray:
    perm = np.asarray(perm, dtype=np.int64)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    return inv


def undirected_distances(g: Graph, source: int) -> np.ndarray:
    """Hop distance from ``source`` ignoring direction; -1 if unreachable."""
    from scipy.sparse.csgraph import breadth_first_order

    sym = (g.out_csr + g.in_csr).tocsr()
    dist = np.full(g.num_vertices, -1, dtype=np.int64)
    order, pred = breadth_first_order(sym, source, directed=True, return_predecessors=True)
    dist[source] = 0
    for v in order[1:]:
        dist[v] = dist[pred[v]] + 1
    return dist
