"""Learned recurrent vertex updates on directed graphs, with PageRank/HITS/WL references."""

from .cell import Aggregates, CellParams, aggregate, cell_backward, cell_forward
from .classic import (
    HitsScores,
    PageRankConfig,
    WLState,
    hits,
    hits_combined_score,
    pagerank,
    weisfeiler_lehman,
)
from .graph import (
    Graph,
    LabeledSet,
    generate_synthetic,
    load_edge_list,
    load_labels,
    permute_vertices,
)
from .heads import EvalReport, HeadParams, auc_pr, head_backward, head_forward, mae_at_ranks
from .optimizer import OptimizerConfig, line_search, minimize
from .propagation import apply, backward, forward
from .harness import TrainSpec, cross_validate, evaluate, init_params, make_targets, train

__version__ = "0.1.0"
