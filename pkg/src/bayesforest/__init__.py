"""Selective Bayesian forest classifier.

Samples class-partitioned feature forests with MCMC, averages their
predictions, and summarizes which features and feature interactions carried
the signal.
"""

__version__ = "0.1.0"

from .dataio import (
    Dataset,
    DiscretizationPlan,
    FoldPlan,
    RawTable,
    apply_cutpoints,
    discretize_binary,
    discretize_mdlp,
    drop_missing,
    fit_discretization,
    load_table,
    make_folds,
)
from .errors import (
    BayesForestError,
    ConfigurationError,
    DataError,
    EmptyDatasetError,
    GraphCycleError,
    InferenceError,
    ParseError,
)
from .graph import Graph, GraphSnapshot, ParentSet, empty_graph, random_graph
from .inference import (
    AverageGraph,
    Prediction,
    build_average_graph,
    export_dot,
    predict_bma,
    predict_one,
    rank_features,
)
from .sampler import (
    ChainState,
    SampleTrace,
    SamplerConfig,
    chain_class_distribution,
    enumerate_exact_posterior,
    gibbs_reassign,
    iter_chain,
    make_chain_state,
    reassign_subtree_move,
    run_chain,
    switch_trees_move,
    total_variation,
)
from .score import (
    CountTable,
    FamilyScoreCache,
    Hyperparams,
    class_log_marginal,
    count_family,
    delta_score_reassign,
    delta_score_switch,
    family_log_score,
    graph_log_score,
    log_prior,
)
from .traceio import read_trace, write_trace

__all__ = [name for name in dir() if not name.startswith("_")]
