from .base import (
    INITIALIZATION,
    INPUT,
    INSTANTIATED,
    OUTPUT,
    PARAMETER,
    STEPPING,
    TERMINATED,
    LifecycleError,
    ModelDescription,
    SimulationUnit,
    UnitError,
    Variable,
)
from .broker import Broker, SharedFeed
from .faults import FaultInjector, FaultRule, load_fault_rules
from .library import Controller, LeakController, LeakDetector, Passthrough, SineSource, WaterTank
from .registry import Registry, model_basename

__all__ = [
    "INITIALIZATION", "INPUT", "INSTANTIATED", "OUTPUT", "PARAMETER", "STEPPING", "TERMINATED",
    "LifecycleError", "ModelDescription", "SimulationUnit", "UnitError", "Variable",
    "Broker", "SharedFeed", "FaultInjector", "FaultRule", "load_fault_rules",
    "Controller", "LeakController", "LeakDetector", "Passthrough", "SineSource", "WaterTank",
    "Registry", "model_basename",
]
