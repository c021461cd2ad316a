"""Finite-difference verification of the end-to-end training gradient."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .graph import Graph, erdos_renyi
from .harness import TrainObjective, TrainSpec, init_params

# central differences at h=1e-6 carry ~eps*|f|/h absolute noise (~1e-9);
# coordinates smaller than the floor are compared on an absolute scale
DENOM_FLOOR = 1e-3


def central_difference(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    grad = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        grad[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return grad


def relative_error(analytic, numeric, floor: float = DENOM_FLOOR) -> np.ndarray:
    """|a - n| / max(|a|, |n|, floor), elementwise."""
    a, n = np.asarray(analytic), np.asarray(numeric)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


@dataclass
class GradcheckRow:
    config: int
    cell: str
    task: str
    d: int
    K: int
    num_params: int
    attrs: bool
    max_rel_error: float
    max_abs_error: float
    max_unfloored_rel_error: float


def _config(i: int):
    ds, Ks = (1, 3, 5), (1, 2, 4)
    cells = ("sigmoid", "gru")
    tasks = ("pagerank", "hits", "classification")
    return ds[i % 3], Ks[(i // 3) % 3], cells[i % 2], tasks[(i // 2) % 3]


def random_case(i: int, seed: int = 0, num_vertices: int = 20, num_edges: int = 60):
    """Objective and evaluation point for gradcheck configuration ``i``.

    Every fourth configuration carries vertex attributes and every fifth
    edge weights, so those code paths are covered too.
    """
    rng = np.random.default_rng([seed, i])
    d, K, cell, task = _config(i)
    n = num_vertices
    base = erdos_renyi(n, num_edges / (n * (n - 1)), int(rng.integers(1 << 31)))
    vattr = rng.normal(size=(n, 2)) if i % 4 == 3 else None
    eattr = rng.uniform(0.5, 1.5, size=(base.num_edges, 1)) if i % 5 == 4 else None
    g = Graph(n, base.edges, vattr, eattr)
    spec = TrainSpec(task=task, cell=cell, d=d, K=K, l2_coeff=0.01 * (i % 2), seed=int(rng.integers(1 << 31)))
    c, h = init_params(spec, g.num_vertex_attrs)
    ids = np.sort(rng.choice(n, size=n // 2, replace=False))
    if spec.head_kind == "classification":
        y = (rng.random((len(ids), 1)) < 0.5).astype(float)
    else:
        y = rng.normal(size=(len(ids), spec.t_out))
    obj = TrainObjective(g, ids, y, spec, c, h)
    x = obj.pack(c, h) + rng.uniform(-0.5, 0.5, size=len(c) + len(h))
    return obj, x, spec, g


def run_gradcheck(num_configs: int = 24, seed: int = 0, h: float = 1e-6) -> list:
    rows = []
    for i in range(num_configs):
        obj, x, spec, g = random_case(i, seed)
        _, analytic = obj(x)
        numeric = central_difference(lambda v: obj(v)[0], x, h)
        err = float(relative_error(analytic, numeric).max())
        abs_err = float(np.abs(analytic - numeric).max())
        raw = float(relative_error(analytic, numeric, floor=1e-300).max())
        rows.append(GradcheckRow(i, spec.cell, spec.task, spec.d, spec.K, x.size,
                                 g.vertex_attrs is not None, err, abs_err, raw))
    return rows
