"""Command-line interface: ``deepgraphs <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import plotting
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .classic import PageRankConfig, hits, hits_combined_score, pagerank, weisfeiler_lehman
from .graph import (
    Graph,
    LabeledSet,
    generate_synthetic,
    load_edge_list,
    load_labels,
    save_edge_list,
    save_labels,
)
from .harness import (
    TASKS,
    TrainSpec,
    block_labels,
    constant_baseline_report,
    cross_validate,
    evaluate,
    holdout_split,
    make_targets,
    predict,
    rng_for,
    scalar_score,
    train,
)
from .optimizer import OptimizerConfig

log = logging.getLogger("deepgraphs")


def _parse_synth(text: str):
    """``synth:MODEL:key=value,...`` -> (model, seed, params)."""
    _, model, *rest = text.split(":", 2)
    params, seed = {}, 0
    for item in filter(None, (rest[0] if rest else "").split(",")):
        key, value = item.split("=", 1)
        key = key.strip().replace("-", "_")
        if key == "seed":
            seed = int(value)
        elif key in ("n", "m", "k_blocks"):
            params[key] = int(value)
        else:
            params[key] = float(value)
    return model, seed, params


def load_graph(args) -> Graph:
    if args.graph.startswith("synth:"):
        model, seed, params = _parse_synth(args.graph)
        return generate_synthetic(model, seed, **params)
    return load_edge_list(args.graph, num_vertices=args.num_vertices,
                          undirected=args.undirected, relabel=args.relabel)


def load_labels_for(args, g: Graph) -> LabeledSet:
    labeled = load_labels(args.labels)
    if g.id_map is not None:
        ids = np.array([g.id_map[int(v)] for v in labeled.vertex_ids])
        labeled = LabeledSet(ids, labeled.labels)
    labeled.check_against(g)
    return labeled


def _write_scores(path, ids, columns):
    lines = [f"{i} " + " ".join(repr(float(c)) for c in row) for i, row in zip(ids, columns)]
    text = "\n".join(lines) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _spec_from_args(args, **overrides) -> TrainSpec:
    opt = OptimizerConfig(max_iterations=args.max_iterations, f_tol=args.f_tol, g_tol=args.g_tol)
    fields = dict(task=args.task, cell=args.cell, d=args.d, K=args.K, l2_coeff=args.l2,
                  optimizer=opt, seed=args.seed, deterministic=args.deterministic)
    fields.update(overrides)
    return TrainSpec(**fields)


def _training_data(args):
    """Graph and labels for train/cv.

    Block labels come from the vertex attribute, so that attribute is
    always dropped from the features when it supplies the labels.
    """
    g = load_graph(args)
    if args.labels:
        labeled = load_labels_for(args, g)
    elif args.task == "classification":
        labeled = block_labels(g)
        g = g.without_attributes()
    else:
        labeled = make_targets(g, args.task)
    if args.structure_only:
        g = g.without_attributes()
    return g, labeled


def _write_report(out: Path, report, stem="report"):
    (out / f"{stem}.json").write_text(report.to_json() + "\n")
    (out / f"{stem}.txt").write_text(report.to_table() + "\n")
    print(report.to_table())


def _report_figures(out: Path, g, labeled, preds, spec, report, baseline=None):
    pred = preds[labeled.vertex_ids]
    if spec.head_kind == "regression":
        plotting.plot_predictions(scalar_score(spec.task, labeled.labels), scalar_score(spec.task, pred),
                                  out / "predictions.png", title=spec.label())
        plotting.plot_mae_at_ranks(report, out / "mae_at_ranks.png", baseline)
    else:
        plotting.plot_pr_curve(pred[:, 0], labeled.labels[:, 0], out / "pr_curve.png", title=spec.label())


# --- subcommands -------------------------------------------------------------


def cmd_pagerank(args):
    g = load_graph(args)
    scores = pagerank(g, PageRankConfig(args.damping, args.iterations, args.tolerance))
    _write_scores(args.out_file, range(g.num_vertices), scores[:, None])


def cmd_hits(args):
    g = load_graph(args)
    s = hits(g, args.iterations, args.normalization)
    cols = hits_combined_score(s)[:, None] if args.combined else np.column_stack([s.hub, s.authority])
    _write_scores(args.out_file, range(g.num_vertices), cols)


def cmd_wl(args):
    g = load_graph(args)
    state = weisfeiler_lehman(g, args.max_rounds)
    lines = [f"{i} {int(c)}" for i, c in enumerate(state.labels)]
    text = "\n".join(lines) + "\n"
    if args.out_file in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out_file).write_text(text)
    log.info("WL: %d classes after %d rounds", state.num_classes, state.round)


def cmd_synth(args):
    params = {"erdos-renyi": dict(n=args.n, p=args.p),
              "barabasi-albert": dict(n=args.n, m=args.m),
              "planted-partition": dict(n=args.n, k_blocks=args.blocks, p_in=args.p_in, p_out=args.p_out)}[args.model]
    g = generate_synthetic(args.model, args.seed, **params)
    out = _out_dir(args)
    save_edge_list(g, out / "graph.txt")
    if g.vertex_attrs is not None:
        save_labels(LabeledSet(np.arange(g.num_vertices), g.vertex_attrs), out / "blocks.txt")
    print(f"{g.num_vertices} vertices, {g.num_edges} edges -> {out / 'graph.txt'}")


def cmd_make_targets(args):
    g = load_graph(args)
    save_labels(make_targets(g, args.task), args.out_file)


def cmd_train(args):
    g, labeled = _training_data(args)
    spec = _spec_from_args(args)
    out = _out_dir(args)
    train_set, test_set = labeled, None
    if args.holdout > 0:
        tr_idx, te_idx = holdout_split(len(labeled), args.holdout, rng_for(spec.seed, "split"))
        train_set, test_set = labeled.subset(tr_idx), labeled.subset(te_idx)
    result = train(g, train_set, spec)
    save_checkpoint(out / "model.dgc", Checkpoint(result.cell, result.head, spec.K, spec.task))
    result.result.write_trace_csv(out / "trace.csv")
    plotting.plot_trace(result.trace, out / "trace.png", title=spec.label())
    print(f"risk {result.initial_risk:.6g} -> {result.final_risk:.6g} "
          f"after {result.result.iterations} iterations ({result.result.reason})")
    if test_set is not None:
        preds = predict(g, result.cell, result.head, spec)
        report = evaluate(g, test_set, result.cell, result.head, spec, predictions=preds)
        baseline = None
        if spec.head_kind == "regression":
            baseline = constant_baseline_report(train_set, test_set, spec.task)
            report.metadata["baseline_mae_all"] = baseline.mae["all"]
        _write_report(out, report)
        _report_figures(out, g, test_set, preds, spec, report, baseline)


def cmd_cv(args):
    g, labeled = _training_data(args)
    base = _spec_from_args(args, d=args.d_grid[0], K=args.K_grid[0])
    grid = [base.replace(d=d, K=K) for d in args.d_grid for K in args.K_grid]
    res = cross_validate(g, labeled, grid, folds=args.folds, seed=args.seed, holdout_fraction=args.holdout)
    out = _out_dir(args)
    summary = res.summary()
    summary["fold_metrics"] = res.fold_metrics
    (out / "cv.json").write_text(json.dumps(summary, sort_keys=True) + "\n")
    with open(out / "cv.csv", "w") as fh:
        fh.write("spec,fold,metric\n")
        for key, vals in res.fold_metrics.items():
            for k, v in enumerate(vals):
                fh.write(f"{key},{k},{v!r}\n")
    save_checkpoint(out / "model.dgc", Checkpoint(res.final.cell, res.final.head, res.winner.K, res.winner.task))
    res.final.result.write_trace_csv(out / "trace.csv")
    plotting.plot_trace(res.final.trace, out / "trace.png", title=res.winner.label())
    for key in res.mean:
        print(f"{key:>24}  {res.mean[key]:.6g} +- {res.std[key]:.3g}")
    print(f"winner: {res.winner.label()}")
    if res.test_report is not None:
        _write_report(out, res.test_report)
        preds = predict(g, res.final.cell, res.final.head, res.winner)
        _report_figures(out, g, res.test_set, preds, res.winner, res.test_report)


def cmd_apply(args):
    g = load_graph(args)
    ckpt = load_checkpoint(args.checkpoint)
    if ckpt.cell.p == 0 and g.vertex_attrs is not None:
        g = g.without_attributes()
    from .propagation import apply

    preds = apply(g, ckpt.cell, ckpt.head, ckpt.K, args.deterministic)
    _write_scores(args.out_file, range(g.num_vertices), preds)


def cmd_eval(args):
    ckpt = load_checkpoint(args.checkpoint)
    args.task = args.task or ckpt.task
    if args.task is None:
        raise ValueError("checkpoint has no task; pass --task")
    args.structure_only = ckpt.cell.p == 0
    g, labeled = _training_data(args)
    spec = TrainSpec(task=args.task, cell=ckpt.cell.kind, d=ckpt.cell.d, K=ckpt.K, deterministic=args.deterministic)
    preds = predict(g, ckpt.cell, ckpt.head, spec)
    report = evaluate(g, labeled, ckpt.cell, ckpt.head, spec, predictions=preds)
    out = _out_dir(args)
    _write_report(out, report)
    _report_figures(out, g, labeled, preds, spec, report)


def cmd_gradcheck(args):
    from .gradcheck import run_gradcheck

    rows = run_gradcheck(args.configs, args.seed, args.step)
    print("config cell     task            d K  params  max_rel_err  max_abs_err")
    for r in rows:
        print(f"{r.config:>6} {r.cell:<8} {r.task:<15} {r.d} {r.K} {r.num_params:>7}  "
              f"{r.max_rel_error:.3e}    {r.max_abs_error:.3e}")
    worst = max(r.max_rel_error for r in rows)
    print(f"max relative error {worst:.3e} (tolerance {args.tolerance:g})")
    if not worst < args.tolerance:
        raise SystemExit(1)


# --- parser ------------------------------------------------------------------


def _graph_args(p, required=True):
    p.add_argument("--graph", required=required,
                   help="edge-list path or synth:MODEL:key=value,... (e.g. synth:erdos-renyi:n=200,p=0.03,seed=1)")
    p.add_argument("--undirected", action="store_true", help="emit both directions for every edge")
    p.add_argument("--relabel", action="store_true", help="map sparse external ids to dense ids")
    p.add_argument("--num-vertices", type=int, default=None)


def _train_args(p):
    p.add_argument("--labels", default=None, help="label file; oracle targets are generated when omitted")
    p.add_argument("--task", choices=sorted(TASKS), default="pagerank")
    p.add_argument("--cell", choices=["sigmoid", "gru"], default="sigmoid")
    p.add_argument("--l2", type=float, default=0.0)
    p.add_argument("--max-iterations", type=int, default=1000)
    p.add_argument("--f-tol", type=float, default=1e-6)
    p.add_argument("--g-tol", type=float, default=1e-6)
    p.add_argument("--holdout", type=float, default=0.1, help="held-out label fraction")
    p.add_argument("--structure-only", action="store_true", help="drop vertex attributes before training")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--out", default="run")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deepgraphs", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pagerank", help="dump PageRank scores")
    _graph_args(p)
    p.add_argument("--damping", type=float, default=0.85)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--tolerance", type=float, default=0.0)
    p.add_argument("--out-file", default="-")
    p.set_defaults(func=cmd_pagerank)

    p = sub.add_parser("hits", help="dump hub and authority scores")
    _graph_args(p)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--normalization", choices=["l2", "sum_squares"], default="l2")
    p.add_argument("--combined", action="store_true", help="write hub + authority only")
    p.add_argument("--out-file", default="-")
    p.set_defaults(func=cmd_hits)

    p = sub.add_parser("wl", help="dump Weisfeiler-Lehman colors")
    _graph_args(p)
    p.add_argument("--max-rounds", type=int, default=10)
    p.add_argument("--out-file", default="-")
    p.set_defaults(func=cmd_wl)

    p = sub.add_parser("synth", help="generate a synthetic graph")
    p.add_argument("--model", choices=["erdos-renyi", "barabasi-albert", "planted-partition"], required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, default=0.05)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--blocks", type=int, default=2)
    p.add_argument("--p-in", type=float, default=0.08)
    p.add_argument("--p-out", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="synth")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("make-targets", help="write PageRank/HITS regression targets as a label file")
    _graph_args(p)
    p.add_argument("--task", choices=["pagerank", "hits"], required=True)
    p.add_argument("--out-file", required=True)
    p.set_defaults(func=cmd_make_targets)

    p = sub.add_parser("train", help="train one model")
    _graph_args(p)
    _train_args(p)
    p.add_argument("--d", type=int, default=5)
    p.add_argument("--K", type=int, default=6)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("cv", help="k-fold cross-validation over the (d, K) grid")
    _graph_args(p)
    _train_args(p)
    p.add_argument("--d-grid", type=int, nargs="+", default=[1, 5, 10])
    p.add_argument("--K-grid", type=int, nargs="+", default=[1, 2, 6, 10])
    p.add_argument("--folds", type=int, default=10)
    p.set_defaults(func=cmd_cv, d=None, K=None)

    p = sub.add_parser("apply", help="predict every vertex of a graph with a checkpoint")
    _graph_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--out-file", default="-")
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("eval", help="evaluate a checkpoint against labels")
    _graph_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--labels", default=None)
    p.add_argument("--task", choices=sorted(TASKS), default=None)
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--out", default="eval")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of the training gradient")
    p.add_argument("--configs", type=int, default=24)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", type=float, default=1e-6)
    p.add_argument("--tolerance", type=float, default=1e-5)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ValueError, OSError, FloatingPointError, KeyError) as exc:
        print(f"deepgraphs: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
