"""Circular-trading detection for sales transaction networks.

Pipeline: parse GSTR-1-style invoices into a directed multigraph, project
it to an undirected weighted graph, embed dealers with biased random walks
plus skip-gram training, cluster the embeddings with cosine DBSCAN, and
flag zero-value-add transaction cycles inside each community. A synthetic
generator with planted fraud rings provides ground truth for evaluation.
"""

from .clustering import ClusterAssignment, DbscanConfig, cosine_distance, dbscan
from .detect import (
    CycleReport,
    EvalScores,
    adjusted_rand_index,
    detect_cycles,
    extract_communities,
    normalized_mutual_information,
    project_2d,
    ring_recovery,
)
from .embedding import EmbedConfig, EmbeddingMatrix, default_dimensions, train
from .graph import (
    SalesFlowGraph,
    WeightedGraph,
    build_sales_flow_graph,
    degree_stats,
    project_to_weighted,
)
from .ingest import (
    DealerRegistry,
    ParseError,
    SelfLoopError,
    Transaction,
    parse_timestamp,
    parse_transactions,
    serialize_transactions,
)
from .synth import (
    ConfigInfeasibleError,
    GroundTruth,
    ScenarioConfig,
    expected_tax_liability,
    generate_scenario,
)
from .walks import AliasTable, WalkConfig, WalkCorpus, generate_walks, transition_weights

__version__ = "0.1.0"

__all__ = [
    "AliasTable",
    "ClusterAssignment",
    "ConfigInfeasibleError",
    "CycleReport",
    "DbscanConfig",
    "DealerRegistry",
    "EmbedConfig",
    "EmbeddingMatrix",
    "EvalScores",
    "GroundTruth",
    "ParseError",
    "SalesFlowGraph",
    "ScenarioConfig",
    "SelfLoopError",
    "Transaction",
    "WalkConfig",
    "WalkCorpus",
    "WeightedGraph",
    "adjusted_rand_index",
    "build_sales_flow_graph",
    "cosine_distance",
    "dbscan",
    "default_dimensions",
    "degree_stats",
    "detect_cycles",
    "expected_tax_liability",
    "extract_communities",
    "generate_scenario",
    "generate_walks",
    "normalized_mutual_information",
    "parse_timestamp",
    "parse_transactions",
    "project_2d",
    "project_to_weighted",
    "ring_recovery",
    "serialize_transactions",
    "train",
    "transition_weights",
]
