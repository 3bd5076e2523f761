"""Fixed-step co-simulation engine with run-time model and structure swapping."""

from .conditions import ConditionError, LatchedCondition, evaluate, parse_condition, pretty, update_latch
from .config import (
    ConfigError,
    MultiModelConfig,
    PortId,
    SwapEntry,
    ValidationReport,
    parse_multi_model,
    parse_port_id,
    to_json,
    validate_config,
)
from .engine import (
    Engine,
    EngineError,
    RunOptions,
    SimulationContext,
    SimulationResult,
    SwapPlan,
    apply_transfer,
    check_transfer_point,
    run_simulation,
    validate_swap_spec,
)
from .graph import DependencyGraph, LoopError, build_port_graph, initialization_order, prune_transfer_edges
from .steplog import CsvSink, StepLog
from .transfer import ScheduledTransfers, WatchFolder, scan_transfer_dir
from .units import FaultInjector, FaultRule, Registry, SharedFeed

__version__ = "0.1.0"
