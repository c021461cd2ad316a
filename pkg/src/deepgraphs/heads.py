"""Output heads, losses, the empirical risk and evaluation metrics."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.special import expit

from .cell import linear
from .params import ParamSet

HEAD_KINDS = ("regression", "classification")
CE_EPS = 1e-12


class HeadParams(ParamSet):
    """Output function parameters.

    regression: one sigmoid hidden layer of width 2d then a linear output
    of width ``t_out``.  classification: a single sigmoid logit.
    """

    def __init__(self, kind: str, d: int, t_out: int = 1, vector=None):
        if kind not in HEAD_KINDS:
            raise ValueError(f"unknown head kind {kind!r}")
        if kind == "classification":
            t_out = 1
        self.kind, self.d, self.t_out = kind, int(d), int(t_out)
        super().__init__(vector)

    def _layout(self):
        d, t = self.d, self.t_out
        if self.kind == "regression":
            return [
                ("W_hidden", (2 * d, d), True),
                ("b_hidden", (2 * d,), False),
                ("W_out", (t, 2 * d), True),
                ("b_out", (t,), False),
            ]
        return [("W_out", (1, d), True), ("b_out", (1,), False)]

    def _rebuild(self, vector):
        return HeadParams(self.kind, self.d, self.t_out, vector)

    def __repr__(self):
        return f"HeadParams(kind={self.kind!r}, d={self.d}, t_out={self.t_out})"


class HeadCache(NamedTuple):
    phi: np.ndarray
    hidden: Optional[np.ndarray]
    out: np.ndarray


def head_forward(head: HeadParams, phi, exact: bool = False):
    """Returns ``(output, cache)``; output rows are predictions (t_out wide)."""
    single = np.ndim(phi) == 1
    x = np.atleast_2d(np.asarray(phi, dtype=np.float64))
    if x.shape[1] != head.d:
        raise ValueError(f"head expects feature width {head.d}, got {x.shape[1]}")
    P = head.arrays
    if head.kind == "regression":
        hidden = expit(linear(x, P["W_hidden"], exact) + P["b_hidden"])
        out = linear(hidden, P["W_out"], exact) + P["b_out"]
    else:
        hidden = None
        out = expit(linear(x, P["W_out"], exact) + P["b_out"])
    cache = HeadCache(x, hidden, out)
    return (out[0] if single else out), cache


def head_backward(
    head: HeadParams,
    cache: HeadCache,
    grad_output,
    grad_params: Optional[HeadParams] = None,
    grad_is_logit: bool = False,
):
    """Returns ``(grad_phi, grad_params)``.

    For the classification head ``grad_is_logit`` means ``grad_output`` is
    already the gradient with respect to the pre-sigmoid logit.
    """
    single = np.ndim(grad_output) == 1
    go = np.atleast_2d(np.asarray(grad_output, dtype=np.float64))
    if go.shape != cache.out.shape:
        raise ValueError("grad_output shape mismatch")
    if grad_params is None:
        grad_params = head.zeros_like()
    P, G = head.arrays, grad_params.arrays
    if head.kind == "regression":
        G["W_out"] += go.T @ cache.hidden
        G["b_out"] += go.sum(axis=0)
        dh = (go @ P["W_out"]) * cache.hidden * (1.0 - cache.hidden)
        G["W_hidden"] += dh.T @ cache.phi
        G["b_hidden"] += dh.sum(axis=0)
        g_phi = dh @ P["W_hidden"]
    else:
        p = cache.out
        dlogit = go if grad_is_logit else go * p * (1.0 - p)
        G["W_out"] += dlogit.T @ cache.phi
        G["b_out"] += dlogit.sum(axis=0)
        g_phi = dlogit @ P["W_out"]
    return (g_phi[0] if single else g_phi), grad_params


# --- losses ------------------------------------------------------------------


def loss_sq(pred, target):
    """Squared L2 loss per row; returns ``(value, grad_pred)``."""
    diff = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    return np.sum(diff * diff, axis=-1), 2.0 * diff


def loss_ce(p, y, eps: float = CE_EPS):
    """Binary cross entropy on a probability; returns ``(value, grad_p)``."""
    p = np.clip(np.asarray(p, dtype=np.float64), eps, 1.0 - eps)
    y = np.asarray(y, dtype=np.float64)
    value = -y * np.log(p) - (1.0 - y) * np.log1p(-p)
    grad = -y / p + (1.0 - y) / (1.0 - p)
    return value, grad


def empirical_risk(pred, labels, loss: str, params: Sequence[ParamSet] = (), l2_coeff: float = 0.0):
    """Mean loss over the labeled rows plus ``l2_coeff`` times the squared weight norm.

    Returns ``(value, grad_pred)`` with ``grad_pred`` already divided by the
    number of rows.  For ``loss="ce"`` the gradient is taken with respect
    to the classifier logit (``(p - y) / M``), which stays finite when the
    sigmoid saturates.  The regularizer's own gradient is
    ``2 * l2_coeff * w`` on weight entries (see ``l2_gradient``).
    """
    pred = np.atleast_2d(np.asarray(pred, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.float64).reshape(pred.shape)
    m = pred.shape[0]
    if m == 0:
        raise ValueError("empirical risk over an empty labeled set")
    if loss == "sq":
        vals, grad = loss_sq(pred, labels)
    elif loss == "ce":
        vals, _ = loss_ce(pred, labels)
        vals = vals.sum(axis=-1)
        grad = pred - labels
    else:
        raise ValueError(f"unknown loss {loss!r}")
    value = float(np.sum(vals)) / m
    if l2_coeff:
        value += l2_coeff * sum(ps.weight_norm_sq() for ps in params)
    return value, grad / m


def l2_gradient(ps: ParamSet, l2_coeff: float) -> np.ndarray:
    return 2.0 * l2_coeff * np.where(ps.weight_mask, ps.vector, 0.0)


# --- metrics -----------------------------------------------------------------

DEFAULT_CUTOFFS = (10, 100, 1000, None)


@dataclass
class EvalReport:
    """Evaluation summary.

    Regression reports have one entry per cutoff in ``mae`` keyed by the
    cutoff label ("10", "100", "1000", "all"), plus the minimum true score
    inside each cutoff and the overall maximum true score.  Classification
    reports carry ``auc_pr``.
    """

    task: str
    mae: dict = field(default_factory=dict)
    min_true: dict = field(default_factory=dict)
    max_true: Optional[float] = None
    clamped: list = field(default_factory=list)
    auc_pr: Optional[float] = None
    n_eval: int = 0
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    def to_table(self) -> str:
        lines = [f"task: {self.task}   evaluated vertices: {self.n_eval}"]
        if self.mae:
            keys = list(self.mae)
            lines.append("rank  " + "".join(f"{k:>14}" for k in keys))
            lines.append("min   " + "".join(f"{self.min_true[k]:>14.6g}" for k in keys))
            lines.append(f"max   {self.max_true:>14.6g}")
            lines.append("MAE   " + "".join(f"{self.mae[k]:>14.6g}" for k in keys))
            if self.clamped:
                lines.append("clamped cutoffs: " + ", ".join(map(str, self.clamped)))
        if self.auc_pr is not None:
            lines.append(f"AUC-PR {self.auc_pr:.6f}")
        for k, v in sorted(self.metadata.items()):
            lines.append(f"{k}: {v}")
        return "\n".join(lines)


def rank_by_true(true_scalar) -> np.ndarray:
    """Indices sorted by decreasing true score, ties by ascending index."""
    true_scalar = np.asarray(true_scalar, dtype=np.float64)
    return np.lexsort((np.arange(len(true_scalar)), -true_scalar))


def mae_at_ranks(pred_scalar, true_scalar, cutoffs=DEFAULT_CUTOFFS, task: str = "regression") -> EvalReport:
    """Mean absolute error over the vertices with the highest true scores.

    A cutoff of ``None`` means all vertices; cutoffs larger than the
    evaluation set are clamped and listed in ``clamped``.
    """
    pred = np.asarray(pred_scalar, dtype=np.float64).ravel()
    true = np.asarray(true_scalar, dtype=np.float64).ravel()
    if pred.shape != true.shape or pred.size == 0:
        raise ValueError("pred and true must be equal-length non-empty vectors")
    order = rank_by_true(true)
    err = np.abs(pred - true)[order]
    rep = EvalReport(task=task, n_eval=int(pred.size), max_true=float(true[order[0]]))
    for c in cutoffs:
        key = "all" if c is None else str(c)
        n = pred.size if c is None else int(c)
        if n > pred.size:
            rep.clamped.append(key)
            n = pred.size
        if n < 1:
            raise ValueError("cutoffs must be positive")
        rep.mae[key] = float(np.mean(err[:n]))
        rep.min_true[key] = float(true[order[n - 1]])
    return rep


def auc_pr(scores, labels) -> float:
    """Average precision: sum over distinct thresholds of (delta recall) * precision.

    Tied scores form a single operating point.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    npos = int(labels.sum())
    if npos == 0 or npos == labels.size:
        raise ValueError("auc_pr needs both positive and negative labels")
    order = np.lexsort((np.arange(scores.size), -scores))
    s, y = scores[order], labels[order]
    tp = np.cumsum(y)
    # last index of each run of equal scores is an operating point
    last = np.r_[s[1:] != s[:-1], True]
    tp_at, n_at = tp[last], np.nonzero(last)[0] + 1
    precision = tp_at / n_at
    recall = tp_at / npos
    d_recall = np.diff(np.r_[0.0, recall])
    return float(np.sum(d_recall * precision))
