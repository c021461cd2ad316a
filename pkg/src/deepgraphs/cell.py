"""Learnable vertex update: neighborhood aggregation plus sigmoid or GRU cell.

All functions operate on row-batched arrays (one row per vertex); 1-D
inputs are treated as a single vertex.
"""

from __future__ import annotations

from typing import NamedTuple, Optional

import numpy as np
from scipy.special import expit

from .graph import Graph
from .params import ParamSet

CELL_KINDS = ("sigmoid", "gru")
GRU_GATES = ("z", "r", "h")  # update, reset, candidate


class CellParams(ParamSet):
    """Parameters of the update function.

    sigmoid: ``W``, ``W_in``, ``W_out`` (d x d), ``W_attr`` (d x p, only when
    p > 0) and ``b``.  gru: per gate g in (z, r, h) a state matrix ``U_g``
    (d x d), an input matrix ``W_g`` (d x (2d + p)) over ``[phi_in; phi_out;
    attr]`` and a bias ``b_g``.
    """

    def __init__(self, kind: str, d: int, p: int = 0, vector=None):
        if kind not in CELL_KINDS:
            raise ValueError(f"unknown cell kind {kind!r}")
        if d < 1 or p < 0:
            raise ValueError("cell needs d >= 1 and p >= 0")
        self.kind, self.d, self.p = kind, int(d), int(p)
        super().__init__(vector)

    def _layout(self):
        d, p = self.d, self.p
        if self.kind == "sigmoid":
            layout = [("W", (d, d), True), ("W_in", (d, d), True), ("W_out", (d, d), True)]
            if p:
                layout.append(("W_attr", (d, p), True))
            layout.append(("b", (d,), False))
            return layout
        layout = []
        for g in GRU_GATES:
            layout += [(f"U_{g}", (d, d), True), (f"W_{g}", (d, 2 * d + p), True), (f"b_{g}", (d,), False)]
        return layout

    def _rebuild(self, vector):
        return CellParams(self.kind, self.d, self.p, vector)

    def __repr__(self):
        return f"CellParams(kind={self.kind!r}, d={self.d}, p={self.p}, n={len(self)})"


class Aggregates(NamedTuple):
    phi_in: np.ndarray
    phi_out: np.ndarray


def aggregate(features_prev: np.ndarray, g: Graph, i: int) -> Aggregates:
    """Sum previous-step features over the in- and out-neighbors of vertex ``i``.

    Edge weights (first edge attribute, default 1) scale each term.
    """
    features_prev = np.asarray(features_prev, dtype=np.float64)
    d = features_prev.shape[1]
    out = []
    for m in (g.in_csr, g.out_csr):
        lo, hi = m.indptr[i], m.indptr[i + 1]
        if lo == hi:
            out.append(np.zeros(d))
        else:
            out.append(m.data[lo:hi] @ features_prev[m.indices[lo:hi]])
    return Aggregates(*out)


def linear(x: np.ndarray, w: np.ndarray, exact: bool = False) -> np.ndarray:
    """``x @ w.T``.

    With ``exact`` each output entry is accumulated in a fixed column order
    using elementwise operations, so a row's result never depends on where
    the row sits in the batch.
    """
    if not exact:
        return x @ w.T
    out = np.zeros((x.shape[0], w.shape[0]))
    for k in range(x.shape[1]):
        out += x[:, k:k + 1] * w[:, k]
    return out


class CellCache(NamedTuple):
    kind: str
    phi_prev: np.ndarray
    phi_in: np.ndarray
    phi_out: np.ndarray
    attr: Optional[np.ndarray]
    out: np.ndarray
    gates: Optional[tuple]  # gru: (x, z, r, candidate)


def _as_rows(a, d=None):
    a = np.asarray(a, dtype=np.float64)
    return a[None, :] if a.ndim == 1 else a


def cell_forward(
    params: CellParams,
    phi_prev,
    agg: Aggregates,
    attr=None,
    exact: bool = False,
):
    """Apply the update function; returns ``(new_features, cache)``."""
    single = np.ndim(phi_prev) == 1
    h = _as_rows(phi_prev)
    a_in, a_out = _as_rows(agg.phi_in), _as_rows(agg.phi_out)
    d = params.d
    if h.shape[1] != d or a_in.shape != h.shape or a_out.shape != h.shape:
        raise ValueError("feature/aggregate shapes inconsistent with params.d")
    if params.p:
        if attr is None:
            raise ValueError("cell expects vertex attributes")
        attr = _as_rows(attr)
        if attr.shape != (h.shape[0], params.p):
            raise ValueError("vertex attribute shape mismatch")
    elif attr is not None and np.size(attr):
        raise ValueError("cell built without attribute weights")
    else:
        attr = None

    P = params.arrays
    if params.kind == "sigmoid":
        pre = (
            linear(h, P["W"], exact)
            + linear(a_in, P["W_in"], exact)
            + linear(a_out, P["W_out"], exact)
            + P["b"]
        )
        if attr is not None:
            pre += linear(attr, P["W_attr"], exact)
        out = expit(pre)
        gates = None
    else:
        parts = [a_in, a_out] if attr is None else [a_in, a_out, attr]
        x = np.concatenate(parts, axis=1)
        z = expit(linear(x, P["W_z"], exact) + linear(h, P["U_z"], exact) + P["b_z"])
        r = expit(linear(x, P["W_r"], exact) + linear(h, P["U_r"], exact) + P["b_r"])
        cand = np.tanh(linear(x, P["W_h"], exact) + linear(r * h, P["U_h"], exact) + P["b_h"])
        out = z * h + (1.0 - z) * cand
        gates = (x, z, r, cand)
    cache = CellCache(params.kind, h, a_in, a_out, attr, out, gates)
    return (out[0] if single else out), cache


def cell_backward(
    params: CellParams,
    cache: CellCache,
    grad_output,
    grad_params: Optional[CellParams] = None,
):
    """Reverse-mode partials of ``cell_forward``.

    Returns ``(grad_phi_prev, grad_phi_in, grad_phi_out, grad_params)``;
    parameter gradients are added into ``grad_params`` when given.
    """
    if cache.kind != params.kind or cache.phi_prev.shape[1] != params.d:
        raise ValueError("cache does not match params")
    single = np.ndim(grad_output) == 1
    go = _as_rows(grad_output)
    if go.shape != cache.out.shape:
        raise ValueError("grad_output shape mismatch")
    if grad_params is None:
        grad_params = params.zeros_like()
    P, G = params.arrays, grad_params.arrays
    h, a_in, a_out, attr = cache.phi_prev, cache.phi_in, cache.phi_out, cache.attr

    if params.kind == "sigmoid":
        s = cache.out
        delta = go * s * (1.0 - s)
        G["W"] += delta.T @ h
        G["W_in"] += delta.T @ a_in
        G["W_out"] += delta.T @ a_out
        if attr is not None:
            G["W_attr"] += delta.T @ attr
        G["b"] += delta.sum(axis=0)
        g_prev = delta @ P["W"]
        g_in = delta @ P["W_in"]
        g_out = delta @ P["W_out"]
    else:
        d = params.d
        x, z, r, cand = cache.gates
        g_z = go * (h - cand) * z * (1.0 - z)
        g_c = go * (1.0 - z) * (1.0 - cand * cand)
        rh = r * h
        g_rh = g_c @ P["U_h"]
        g_r = g_rh * h * r * (1.0 - r)
        g_prev = go * z + g_rh * r + g_z @ P["U_z"] + g_r @ P["U_r"]
        g_x = g_z @ P["W_z"] + g_r @ P["W_r"] + g_c @ P["W_h"]
        G["W_z"] += g_z.T @ x
        G["U_z"] += g_z.T @ h
        G["b_z"] += g_z.sum(axis=0)
        G["W_r"] += g_r.T @ x
        G["U_r"] += g_r.T @ h
        G["b_r"] += g_r.sum(axis=0)
        G["W_h"] += g_c.T @ x
        G["U_h"] += g_c.T @ rh
        G["b_h"] += g_c.sum(axis=0)
        g_in, g_out = g_x[:, :d], g_x[:, d:2 * d]

    if single:
        return g_prev[0], g_in[0], g_out[0], grad_params
    return g_prev, g_in, g_out, grad_params
