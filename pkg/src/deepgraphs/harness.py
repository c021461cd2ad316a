"""Training, cross-validation, target generation and evaluation."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .cell import CellParams
from .classic import PageRankConfig, hits, hits_combined_score, pagerank
from .graph import Graph, LabeledSet
from .heads import (
    EvalReport,
    HeadParams,
    auc_pr,
    empirical_risk,
    head_backward,
    head_forward,
    l2_gradient,
    mae_at_ranks,
)
from .optimizer import MinimizeResult, OptimizerConfig, minimize
from .propagation import apply, backward, forward

log = logging.getLogger(__name__)

# task -> (head kind, output width, loss)
TASKS = {
    "pagerank": ("regression", 1, "sq"),
    "hits": ("regression", 2, "sq"),
    "classification": ("classification", 1, "ce"),
}
GRID_D = (1, 5, 10)
GRID_K = (1, 2, 6, 10)
_STREAMS = {"init": 0, "folds": 1, "synth": 2, "split": 3}


def rng_for(seed: int, stream: str) -> np.random.Generator:
    """Independent named random stream derived from the top-level seed."""
    return np.random.default_rng([int(seed), _STREAMS[stream]])


@dataclass(frozen=True)
class TrainSpec:
    task: str = "pagerank"
    cell: str = "sigmoid"
    d: int = 5
    K: int = 6
    l2_coeff: float = 0.0
    optimizer: OptimizerConfig = OptimizerConfig()
    seed: int = 42
    # regression targets are z-scored for training; the affine map is folded back into the head
    standardize_targets: bool = True
    deterministic: bool = False

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.d < 1 or self.K < 1:
            raise ValueError("d and K must be >= 1")
        if self.l2_coeff < 0:
            raise ValueError("l2_coeff must be non-negative")

    def replace(self, **changes) -> "TrainSpec":
        return dataclasses.replace(self, **changes)

    @property
    def head_kind(self) -> str:
        return TASKS[self.task][0]

    @property
    def t_out(self) -> int:
        return TASKS[self.task][1]

    @property
    def loss(self) -> str:
        return TASKS[self.task][2]

    def label(self) -> str:
        return f"{self.cell}/d={self.d}/K={self.K}"

    def describe(self) -> dict:
        return {
            "task": self.task, "cell": self.cell, "d": self.d, "K": self.K,
            "l2_coeff": self.l2_coeff, "seed": self.seed,
        }


def default_grid(base: TrainSpec, ds=GRID_D, Ks=GRID_K) -> list:
    return [base.replace(d=d, K=K) for d in ds for K in Ks]


def init_params(spec: TrainSpec, p: int = 0, seed: Optional[int] = None):
    """Weights uniform in +-1/sqrt(rows) per matrix, biases zero."""
    rng = rng_for(spec.seed if seed is None else seed, "init")
    cell = CellParams(spec.cell, spec.d, p)
    head = HeadParams(spec.head_kind, spec.d, spec.t_out)
    for ps in (cell, head):
        for name, shape, is_weight in ps._layout():
            if is_weight:
                bound = 1.0 / math.sqrt(shape[0])
                ps.arrays[name][...] = rng.uniform(-bound, bound, size=shape)
    return cell, head


class TrainObjective:
    """Empirical risk over labeled vertices as a function of the flat (theta, w) vector."""

    def __init__(self, g: Graph, ids, targets, spec: TrainSpec, cell: CellParams, head: HeadParams):
        self.g, self.spec = g, spec
        self.ids = np.asarray(ids, dtype=np.int64)
        self.targets = np.asarray(targets, dtype=np.float64).reshape(len(self.ids), -1)
        self.cell_template, self.head_template = cell, head
        self.n_cell = len(cell)

    def pack(self, cell: CellParams, head: HeadParams) -> np.ndarray:
        return np.concatenate([cell.vector, head.vector])

    def unpack(self, v):
        v = np.asarray(v, dtype=np.float64)
        return (
            self.cell_template.with_vector(v[: self.n_cell].copy()),
            self.head_template.with_vector(v[self.n_cell:].copy()),
        )

    def __call__(self, v):
        spec = self.spec
        cell, head = self.unpack(v)
        state, tape = forward(self.g, cell, spec.K, spec.deterministic)
        pred, hcache = head_forward(head, state.final[self.ids])
        risk, gpred = empirical_risk(pred, self.targets, spec.loss, [cell, head], spec.l2_coeff)
        ghead = head.zeros_like()
        gphi, _ = head_backward(head, hcache, gpred, ghead, grad_is_logit=spec.loss == "ce")
        grad_final = np.zeros((self.g.num_vertices, cell.d))
        grad_final[self.ids] = gphi
        gcell = backward(tape, grad_final)
        grad = np.concatenate([
            gcell.vector + l2_gradient(cell, spec.l2_coeff),
            ghead.vector + l2_gradient(head, spec.l2_coeff),
        ])
        return risk, grad


@dataclass
class TrainResult:
    cell: CellParams
    head: HeadParams
    result: MinimizeResult
    initial_risk: float
    final_risk: float
    target_shift: Optional[np.ndarray] = None
    target_scale: Optional[np.ndarray] = None

    @property
    def trace(self):
        return self.result.trace


def _fold_standardization(head: HeadParams, shift, scale) -> HeadParams:
    out = head.copy()
    out.arrays["W_out"][...] *= scale[:, None]
    out.arrays["b_out"][...] = out.arrays["b_out"] * scale + shift
    return out


def train(g: Graph, labeled: LabeledSet, spec: TrainSpec, init=None) -> TrainResult:
    """Jointly fit the update cell and the head by BFGS on the empirical risk."""
    labeled.check_against(g)
    if len(labeled) == 0:
        raise ValueError("cannot train on an empty labeled set")
    if labeled.arity != spec.t_out:
        raise ValueError(f"task {spec.task} expects {spec.t_out} label columns, got {labeled.arity}")
    cell, head = init if init is not None else init_params(spec, g.num_vertex_attrs)
    y = labeled.labels
    shift = scale = None
    if spec.head_kind == "regression" and spec.standardize_targets:
        shift = y.mean(axis=0)
        scale = y.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        y = (y - shift) / scale
    obj = TrainObjective(g, labeled.vertex_ids, y, spec, cell, head)
    x0 = obj.pack(cell, head)
    initial_risk, _ = obj(x0)
    res = minimize(obj, x0, spec.optimizer)
    if not math.isfinite(res.f):
        raise FloatingPointError(f"training diverged: risk {res.f}")
    cell_t, head_t = obj.unpack(res.x)
    if shift is not None:
        head_t = _fold_standardization(head_t, shift, scale)
    log.info("trained %s: risk %.6g -> %.6g in %d iterations (%s)",
             spec.label(), initial_risk, res.f, res.iterations, res.reason)
    return TrainResult(cell_t, head_t, res, float(initial_risk), float(res.f), shift, scale)


def predict(g: Graph, cell: CellParams, head: HeadParams, spec: TrainSpec) -> np.ndarray:
    return apply(g, cell, head, spec.K, spec.deterministic)


def make_targets(g: Graph, task: str) -> LabeledSet:
    """PageRank (damping 0.85) or HITS scores, 1,000 iterations, for every vertex."""
    ids = np.arange(g.num_vertices)
    if task == "pagerank":
        return LabeledSet(ids, pagerank(g, PageRankConfig(0.85, 1000))[:, None])
    if task == "hits":
        s = hits(g, 1000)
        return LabeledSet(ids, np.column_stack([s.hub, s.authority]))
    raise ValueError(f"no oracle targets for task {task!r}")


def block_labels(g: Graph) -> LabeledSet:
    """Binary labels from a planted-partition graph's block attribute."""
    if g.vertex_attrs is None:
        raise ValueError("graph carries no block attribute")
    blocks = g.vertex_attrs[:, 0]
    if set(np.unique(blocks)) - {0.0, 1.0}:
        raise ValueError("block labels must be binary")
    return LabeledSet(np.arange(g.num_vertices), blocks[:, None])


def scalar_score(task: str, values: np.ndarray) -> np.ndarray:
    """Per-vertex scalar used for ranking: the value itself, or hub + authority."""
    values = np.asarray(values, dtype=np.float64).reshape(len(values), -1)
    if task == "hits":
        from .classic import HitsScores

        return hits_combined_score(HitsScores(values[:, 0], values[:, 1]))
    return values[:, 0]


def evaluate(g: Graph, labeled_eval: LabeledSet, cell: CellParams, head: HeadParams, spec: TrainSpec,
             predictions: Optional[np.ndarray] = None) -> EvalReport:
    if predictions is None:
        predictions = predict(g, cell, head, spec)
    pred = predictions[labeled_eval.vertex_ids]
    if spec.head_kind == "regression":
        rep = mae_at_ranks(scalar_score(spec.task, pred), scalar_score(spec.task, labeled_eval.labels), task=spec.task)
    else:
        rep = EvalReport(task=spec.task, n_eval=len(labeled_eval),
                         auc_pr=auc_pr(pred[:, 0], labeled_eval.labels[:, 0]))
    rep.metadata.update(spec.describe())
    return rep


def constant_baseline_report(train_set: LabeledSet, eval_set: LabeledSet, task: str) -> EvalReport:
    """MAE of predicting the training-label mean for every evaluated vertex."""
    const = np.broadcast_to(train_set.labels.mean(axis=0), eval_set.labels.shape)
    return mae_at_ranks(scalar_score(task, const), scalar_score(task, eval_set.labels), task=task)


# --- cross-validation --------------------------------------------------------


def kfold_indices(n: int, folds: int, rng: np.random.Generator) -> list:
    """Shuffle range(n) and split into ``folds`` near-equal disjoint parts."""
    if n < folds:
        raise ValueError(f"{n} labeled vertices cannot fill {folds} folds")
    return np.array_split(rng.permutation(n), folds)


def holdout_split(n: int, fraction: float, rng: np.random.Generator):
    """Returns (train_index, test_index) with round(fraction * n) test rows."""
    perm = rng.permutation(n)
    n_test = int(round(fraction * n))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def validation_metric(g, val: LabeledSet, tr: TrainResult, spec: TrainSpec) -> float:
    """Mean squared loss (regression, lower is better) or AUC-PR (classification)."""
    pred = predict(g, tr.cell, tr.head, spec)[val.vertex_ids]
    if spec.head_kind == "regression":
        return float(np.mean(np.sum((pred - val.labels) ** 2, axis=1)))
    y = val.labels[:, 0]
    if y.min() == y.max():
        return math.nan
    return auc_pr(pred[:, 0], y)


@dataclass
class CvResult:
    fold_metrics: dict
    mean: dict
    std: dict
    winner: TrainSpec
    test_metric: Optional[float]
    test_report: Optional[EvalReport]
    folds: list = field(default_factory=list)
    cv_ids: Optional[np.ndarray] = None
    test_ids: Optional[np.ndarray] = None
    test_set: Optional[LabeledSet] = None
    final: Optional[TrainResult] = None
    higher_is_better: bool = False

    def summary(self) -> dict:
        return {
            "winner": self.winner.label(),
            "mean": self.mean,
            "std": self.std,
            "test_metric": self.test_metric,
        }


def cross_validate(
    g: Graph,
    labeled: LabeledSet,
    grid: Sequence[TrainSpec],
    folds: int = 10,
    seed: int = 0,
    holdout_fraction: float = 0.1,
) -> CvResult:
    """Grid search by k-fold CV on the non-held-out labels, then refit and test.

    The winner is retrained on all cross-validation labels and scored on the
    held-out fraction (MAE over all vertices for regression, AUC-PR for
    classification).
    """
    if not grid:
        raise ValueError("empty hyperparameter grid")
    tasks = {s.task for s in grid}
    if len(tasks) != 1:
        raise ValueError("all grid points must share one task")
    cv_idx, test_idx = holdout_split(len(labeled), holdout_fraction, rng_for(seed, "split"))
    cv_set = labeled.subset(cv_idx)
    parts = kfold_indices(len(cv_set), folds, rng_for(seed, "folds"))
    higher = grid[0].head_kind == "classification"

    fold_metrics, means, stds = {}, {}, {}
    for spec in grid:
        scores = []
        for k, val_part in enumerate(parts):
            train_part = np.sort(np.concatenate([p for j, p in enumerate(parts) if j != k]))
            tr = train(g, cv_set.subset(train_part), spec)
            scores.append(validation_metric(g, cv_set.subset(val_part), tr, spec))
        key = spec.label()
        fold_metrics[key] = scores
        means[key] = float(np.nanmean(scores))
        stds[key] = float(np.nanstd(scores))
        log.info("cv %s: %.6g +- %.6g", key, means[key], stds[key])

    keys = [s.label() for s in grid]
    vals = np.array([means[k] for k in keys])
    best = int(np.nanargmax(vals) if higher else np.nanargmin(vals))
    winner = grid[best]

    final = train(g, cv_set, winner)
    test_report = test_metric = test_set = None
    if len(test_idx):
        test_set = labeled.subset(test_idx)
        test_report = evaluate(g, test_set, final.cell, final.head, winner)
        test_metric = test_report.auc_pr if higher else test_report.mae["all"]
    return CvResult(
        fold_metrics, means, stds, winner, test_metric, test_report,
        folds=[cv_set.vertex_ids[p] for p in parts],
        cv_ids=cv_set.vertex_ids,
        test_ids=labeled.vertex_ids[test_idx],
        test_set=test_set,
        final=final,
        higher_is_better=higher,
    )
