"""Bundled scenarios: water tank (normal, fault, structure swap) and broker swaps.

Every scenario is self-contained: configs, swap specs and the broker feed
are generated here.  The broker swap conditions are reconstructions; the
original study only describes them in prose.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

from .config import parse_multi_model
from .engine import Engine, RunOptions, SimulationResult
from .steplog import CsvSink
from .transfer import ScheduledTransfers
from .units.broker import SharedFeed
from .units.faults import FaultRule
from .units.registry import Registry

DT = 0.1
END = 40.0
FAULT_TRIGGER = "(tank.time >= 12 && tank.level >= 1.6)"

WATERTANK = {
    "fmus": {
        "{x1}": "watertankcontroller-c.fmu",
        "{x2}": "singlewatertank-20sim.fmu",
    },
    "connections": {
        "{x1}.controller.valve": ["{x2}.tank.valvecontrol"],
        "{x2}.tank.level": ["{x1}.controller.level"],
    },
    "parameters": {
        "{x1}.controller.maxLevel": 2,
        "{x1}.controller.minLevel": 1,
        "{x2}.tank.l0": 2.0,
    },
}

# leak handling added at run time: a detector plus a controller that replaces the original
WATERTANK_SWAP = {
    "fmus": {
        "{x1}": "watertankcontroller-c.fmu",
        "{x2}": "singlewatertank-20sim.fmu",
        "{x3}": "leak_detector.fmu",
        "{x4}": "leak_controller.fmu",
    },
    "connections": {
        "{x1}.controller.valve": ["{x2}.tank.valvecontrol", "{x3}.leak_detector.valve"],
        "{x2}.tank.level": ["{x1}.controller.level", "{x3}.leak_detector.level"],
    },
    "parameters": {
        "{x1}.controller.maxLevel": 2,
        "{x1}.controller.minLevel": 1,
    },
    "modelSwaps": {
        "controller": {
            "swapInstance": "leak_controller",
            "stepCondition": "(true)",
            "swapCondition": "(true)",
            "swapConnections": {
                "{x4}.leak_controller.valve": ["{x2}.tank.valvecontrol", "{x3}.leak_detector.valve"],
                "{x2}.tank.level": ["{x4}.leak_controller.level"],
                "{x3}.leak_detector.leak": ["{x4}.leak_controller.leak"],
            },
        }
    },
    "modelTransfers": {"controller": "controller", "tank": "tank"},
}

LEAK_FAULT = FaultRule("tank", "valvecontrol", "input", FAULT_TRIGGER, "alternate01")

# --- broker ---------------------------------------------------------------

FEED_PERIOD = 4.0
FEED_SECONDS = 80.0
BACKLOG = 50  # 5 s of messages at 10 Hz
BROKER_SWAP_AT = 5.0
BROKER_END = 20.0

BROKER = {
    "fmus": {"{x1}": "rmqfmu.fmu", "{x2}": "passthrough.fmu"},
    "connections": {"{x1}.rmq.angle": ["{x2}.actuation.u"]},
    "parameters": {"{x1}.rmq.prefetch_count": BACKLOG},
}

BROKER_CONDITIONS = {
    # both true: the replacement takes over immediately
    "broker-instant": ("(true)", "(true)"),
    # replacement shadows from the start, takes over once both emit the same angle
    "broker-swapcond": ("(true)", "(rmq.angle == rmq2.angle)"),
    # replacement starts once the old broker has consumed past the replacement's
    # first message, and takes over at the same instant
    "broker-stepcond": ("(rmq.clock > rmq2.timestamp + 0.05)", "(rmq.clock > rmq2.timestamp + 0.05)"),
}


def broker_swap_spec(step_condition: str, swap_condition: str) -> dict:
    return {
        "fmus": {"{x1}": "rmqfmu.fmu", "{x2}": "passthrough.fmu", "{x3}": "rmqfmu.fmu"},
        "connections": {"{x1}.rmq.angle": ["{x2}.actuation.u"]},
        "parameters": {"{x3}.rmq2.prefetch_count": 0},
        "modelSwaps": {
            "rmq": {
                "swapInstance": "rmq2",
                "stepCondition": step_condition,
                "swapCondition": swap_condition,
                "swapConnections": {"{x3}.rmq2.angle": ["{x2}.actuation.u"]},
            }
        },
        "modelTransfers": {"rmq": "rmq", "actuation": "actuation"},
    }


def sine_feed(period=FEED_PERIOD, seconds=FEED_SECONDS, dt=DT) -> SharedFeed:
    n = int(round(seconds / dt))
    return SharedFeed((i * dt, math.sin(2 * math.pi * (i * dt) / period)) for i in range(n + 1))


@dataclass
class Scenario:
    name: str
    config: dict
    end: float = END
    step: float = DT
    transfer_at: Optional[float] = None
    spec: Optional[dict] = None
    fault_rules: tuple = ()
    feed: Optional[SharedFeed] = None
    notes: list = field(default_factory=list)


def get_scenario(name: str) -> Scenario:
    if name == "watertank-normal":
        return Scenario(name, WATERTANK)
    if name == "watertank-fault":
        return Scenario(name, WATERTANK, fault_rules=(LEAK_FAULT,))
    if name == "watertank-swap":
        return Scenario(name, WATERTANK, transfer_at=22.0, spec=WATERTANK_SWAP, fault_rules=(LEAK_FAULT,))
    if name in BROKER_CONDITIONS:
        step, swap = BROKER_CONDITIONS[name]
        return Scenario(
            name, BROKER, end=BROKER_END, transfer_at=BROKER_SWAP_AT,
            spec=broker_swap_spec(step, swap), feed=sine_feed(),
        )
    raise KeyError(f"unknown scenario {name!r}; known: {', '.join(SCENARIOS)}")


SCENARIOS = (
    "watertank-normal",
    "watertank-fault",
    "watertank-swap",
    "broker-instant",
    "broker-swapcond",
    "broker-stepcond",
)


def run_scenario(name: str, out=None, transfer_at: Optional[float] = None, end: Optional[float] = None,
                 registry: Optional[Registry] = None) -> SimulationResult:
    sc = get_scenario(name)
    if transfer_at is not None:
        sc.transfer_at = transfer_at
    if end is not None:
        sc.end = end
    if registry is None:
        registry = Registry(sc.feed)
    elif sc.feed is not None:
        registry.feed = sc.feed
    source = None
    if sc.spec is not None and sc.transfer_at is not None:
        iteration = int(round(sc.transfer_at / sc.step))
        source = ScheduledTransfers([(iteration, f"{name}.json", json.dumps(sc.spec))])
    options = RunOptions(0.0, sc.end, sc.step, source, fault_rules=sc.fault_rules)
    cfg = parse_multi_model(json.dumps(sc.config))
    return Engine(cfg, options, registry, CsvSink(out)).run()
