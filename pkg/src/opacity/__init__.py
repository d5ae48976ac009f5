"""Simulation and measurement tools for threshold opacity in networked contagion."""

from opacity.graph import (
    Graph,
    GraphStats,
    ParameterError,
    enumerate_small_graphs,
    generate_ba,
    generate_plc,
    generate_ws,
    graph_stats,
    induced_subgraph,
)
from opacity.cascade import (
    CascadeTrace,
    Event,
    SIConfig,
    ThresholdAssignment,
    replicate,
    run_si_pull,
    run_si_push,
    run_threshold_cascade,
)
from opacity.measurement import (
    Status,
    ThresholdInterval,
    build_interval,
    build_intervals,
    classify,
    eaa,
    measurement_summary,
)

__version__ = "0.1.0"

__all__ = [
    "CascadeTrace",
    "Event",
    "Graph",
    "GraphStats",
    "ParameterError",
    "SIConfig",
    "Status",
    "ThresholdAssignment",
    "ThresholdInterval",
    "build_interval",
    "build_intervals",
    "classify",
    "eaa",
    "enumerate_small_graphs",
    "generate_ba",
    "generate_plc",
    "generate_ws",
    "graph_stats",
    "induced_subgraph",
    "measurement_summary",
    "replicate",
    "run_si_pull",
    "run_si_push",
    "run_threshold_cascade",
]
