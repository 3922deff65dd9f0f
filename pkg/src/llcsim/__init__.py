"""Cycle-level simulator of a multi-core system with a sliced last-level
cache, MSHR-based miss handling, pluggable request-arbitration policies, and
two-level dynamic thread throttling, together with a grouped-attention decode
workload generator and an experiment harness.
"""

from .config import ConfigError, SimConfig, load_config, parse_config
from .engine import DeadlockError, Simulator, run_simulation, slice_for
from .stats import StatsRecord, finalize, geomean, speedup_table
from .throttle import (ContentionStatus, classify_contention, select_throttled,
                       step_gear)
from .workload import (LogitLayouts, MappingError, MappingLevel, MappingSpec,
                       OperatorShape, TensorLayout, ThreadBlock,
                       TraceFormatError, build_logit_mapping, default_layouts,
                       emit_trace, footprint, generate_traces, load_mapping,
                       parse_trace, read_trace_set, save_mapping,
                       validate_mapping, write_trace_set)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "SimConfig", "load_config", "parse_config",
    "DeadlockError", "Simulator", "run_simulation", "slice_for",
    "StatsRecord", "finalize", "geomean", "speedup_table",
    "ContentionStatus", "classify_contention", "select_throttled", "step_gear",
    "LogitLayouts", "MappingError", "MappingLevel", "MappingSpec",
    "OperatorShape", "TensorLayout", "ThreadBlock", "TraceFormatError",
    "build_logit_mapping", "default_layouts", "emit_trace", "footprint",
    "generate_traces", "load_mapping", "parse_trace", "read_trace_set",
    "save_mapping", "validate_mapping", "write_trace_set",
]
