"""Sink discovery, slice construction and consensus-cluster checking for federated Byzantine quorum systems."""

from .fbqs import (
    SliceSet,
    is_consensus_cluster,
    is_intertwined,
    is_quorum,
    maximal_consensus_clusters,
    quorums_of,
)
from .graph_core import (
    FaultAssignment,
    KnowledgeGraph,
    check_k_osr,
    generate_k_osr,
    is_byzantine_safe,
    is_f_reachable,
    node_disjoint_path_count,
    sink_components,
    strongly_connected_components,
)
from .protocols import DetectorRuntime, run_sink_detection
from .scenario import Scenario
from .simnet import SimConfig
from .slice_builder import SinkResult, local_slices, sd_slices

__version__ = "0.1.0"

__all__ = [
    "DetectorRuntime",
    "FaultAssignment",
    "KnowledgeGraph",
    "Scenario",
    "SimConfig",
    "SinkResult",
    "SliceSet",
    "check_k_osr",
    "generate_k_osr",
    "is_byzantine_safe",
    "is_consensus_cluster",
    "is_f_reachable",
    "is_intertwined",
    "is_quorum",
    "local_slices",
    "maximal_consensus_clusters",
    "node_disjoint_path_count",
    "quorums_of",
    "run_sink_detection",
    "sd_slices",
    "sink_components",
    "strongly_connected_components",
]
