"""Actor-behavior causal analysis of process event logs.

The package turns raw event logs into classified actor transitions, builds
aligned daily behavior and KPI series, repairs non-stationary columns,
selects influential lags with a sparse group lasso, and tests for lagged
Granger-causal influence of behavior on performance, emitting p-value tables
and a directed causal graph.
"""

__version__ = "0.1.0"

from .behavior import (
    ActorIndex,
    BehaviorType,
    Transition,
    build_actor_index,
    classify_log,
    classify_transition,
)
from .causal_graph import CausalGraph, build_graph, export_dot, top_edges
from .event_log import Event, EventLog, parse_csv, parse_xes, validate_and_sort
from .granger import GrangerResult, asymmetry_ratio, granger_test, ols, test_all_pairs
from .lag_selector import (
    DesignMatrix,
    LagSelection,
    LassoConfig,
    build_design,
    lag_frequency,
    sparse_group_lasso,
)
from .stationarity import AdfResult, adf_test, difference, ensure_stationary
from .synth import PlantedEffect, SynthLogConfig, generate_log, generate_var
from .timeseries import (
    AttributeRule,
    DailySeries,
    KeywordRule,
    LastEventRule,
    Panel,
    align,
    behavior_series,
    outcome_series,
    throughput_series,
)

__all__ = [
    "ActorIndex",
    "AdfResult",
    "AttributeRule",
    "BehaviorType",
    "CausalGraph",
    "DailySeries",
    "DesignMatrix",
    "Event",
    "EventLog",
    "GrangerResult",
    "KeywordRule",
    "LagSelection",
    "LassoConfig",
    "LastEventRule",
    "Panel",
    "PlantedEffect",
    "SynthLogConfig",
    "Transition",
    "align",
    "asymmetry_ratio",
    "behavior_series",
    "build_actor_index",
    "build_design",
    "build_graph",
    "classify_log",
    "classify_transition",
    "difference",
    "ensure_stationary",
    "export_dot",
    "generate_log",
    "generate_var",
    "granger_test",
    "lag_frequency",
    "ols",
    "outcome_series",
    "parse_csv",
    "parse_xes",
    "sparse_group_lasso",
    "test_all_pairs",
    "throughput_series",
    "top_edges",
    "adf_test",
    "validate_and_sort",
]
