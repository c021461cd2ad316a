"""Figures written next to the CSV/JSON outputs of the CLI."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.4),
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_trace(trace, path, title=None):
    """Objective and gradient infinity norm against BFGS iteration (log scale)."""
    it = [row.iteration for row in trace]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.semilogy(it, [max(row.f, 1e-300) for row in trace], label="objective")
        ax.semilogy(it, [max(row.grad_inf_norm, 1e-300) for row in trace], label="|grad|_inf", ls="--")
        ax.set_xlabel("iteration")
        ax.legend(frameon=False)
        if title:
            ax.set_title(title)
        _save(fig, path)


def plot_predictions(true_scalar, pred_scalar, path, title=None):
    """Predicted against true score, with the identity line."""
    true_scalar = np.asarray(true_scalar, dtype=float)
    pred_scalar = np.asarray(pred_scalar, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.scatter(true_scalar, pred_scalar, s=8, alpha=0.7)
        lo = min(true_scalar.min(), pred_scalar.min())
        hi = max(true_scalar.max(), pred_scalar.max())
        ax.plot([lo, hi], [lo, hi], color="0.4", lw=0.8)
        ax.set_xlabel("true score")
        ax.set_ylabel("predicted score")
        if title:
            ax.set_title(title)
        _save(fig, path)


def plot_mae_at_ranks(report, path, baseline=None):
    """Bar chart of MAE per rank cutoff, optionally against a baseline report."""
    keys = list(report.mae)
    x = np.arange(len(keys))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        width = 0.4 if baseline is not None else 0.6
        ax.bar(x - (width / 2 if baseline is not None else 0), [report.mae[k] for k in keys], width, label="model")
        if baseline is not None:
            ax.bar(x + width / 2, [baseline.mae.get(k, np.nan) for k in keys], width, label="constant mean")
            ax.legend(frameon=False)
        ax.set_xticks(x, keys)
        ax.set_xlabel("top-ranked vertices")
        ax.set_ylabel("MAE")
        _save(fig, path)


def plot_pr_curve(scores, labels, path, title=None):
    """Precision-recall step curve at every distinct score threshold."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    thresholds = np.unique(scores)[::-1]
    prec = [labels[scores >= t].mean() for t in thresholds]
    rec = [labels[scores >= t].sum() / labels.sum() for t in thresholds]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.step([0.0] + rec, [prec[0]] + prec, where="pre")
        ax.set_xlabel("recall")
        ax.set_ylabel("precision")
        ax.set_ylim(0, 1.05)
        if title:
            ax.set_title(title)
        _save(fig, path)


def plot_timing(sizes, seconds, path, fit=None):
    """Wall time against edge count, with an optional (intercept, slope) line."""
    sizes = np.asarray(sizes, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(sizes, seconds, "o")
        if fit is not None:
            xs = np.linspace(sizes.min(), sizes.max(), 50)
            ax.plot(xs, fit[0] + fit[1] * xs, lw=0.8)
        ax.set_xlabel("|E|")
        ax.set_ylabel("forward+backward seconds")
        _save(fig, path)
