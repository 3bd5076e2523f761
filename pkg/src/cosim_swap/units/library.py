"""Builtin models used by the water-tank and broker scenarios."""

from __future__ import annotations

import math

from .base import INPUT, OUTPUT, PARAMETER, ModelDescription, SimulationUnit, UnitError, Variable

# Euler increments such as 0.01 accumulate to 1.9999999999999996 instead of
# 2.0; thresholds compare with this slack so the valve does not open a step late
THRESHOLD_TOL = 1e-9


def _hysteresis(level, valve, low, high):
    if level >= high - THRESHOLD_TOL:
        return 1.0
    if level <= low + THRESHOLD_TOL:
        return 0.0
    return valve


class WaterTank(SimulationUnit):
    description = ModelDescription(
        "singlewatertank-20sim",
        (
            Variable("valvecontrol", "real", INPUT, 0.0),
            Variable("level", "real", OUTPUT, None, direct_feedthrough=False),
            Variable("q_in", "real", PARAMETER, 0.1),
            Variable("q_out", "real", PARAMETER, 0.3),
            Variable("l0", "real", PARAMETER, 1.0),
        ),
    )

    def _check(self):
        if not (self["q_in"] > 0 and self["q_out"] > 0):
            raise UnitError(f"{self.name}: q_in and q_out must be positive")

    def _initial_outputs(self):
        # an explicitly set start level wins over l0
        if "level" not in self.explicit:
            self.values["level"] = self["l0"]

    def _step(self, dt):
        v = self["valvecontrol"]
        self.values["level"] = max(0.0, self["level"] + dt * (self["q_in"] - v * self["q_out"]))


class Controller(SimulationUnit):
    """Bang-bang controller: opens the drain at maxLevel, closes it at minLevel."""

    description = ModelDescription(
        "watertankcontroller-c",
        (
            Variable("level", "real", INPUT, 0.0),
            Variable("valve", "real", OUTPUT, 0.0),
            Variable("minLevel", "real", PARAMETER, 1.0),
            Variable("maxLevel", "real", PARAMETER, 2.0),
        ),
    )

    def _check(self):
        if not self["minLevel"] < self["maxLevel"]:
            raise UnitError(f"{self.name}: minLevel must be below maxLevel")

    def _step(self, dt):
        self.values["valve"] = _hysteresis(self["level"], self["valve"], self["minLevel"], self["maxLevel"])


class LeakDetector(SimulationUnit):
    # leak is state: it only changes when the unit steps, hence no feedthrough
    description = ModelDescription(
        "leak_detector",
        (
            Variable("valve", "real", INPUT, 0.0),
            Variable("level", "real", INPUT, 0.0),
            Variable("leak", "boolean", OUTPUT, False, direct_feedthrough=False),
            Variable("threshold", "integer", PARAMETER, 3),
        ),
    )

    def __init__(self, instance_name):
        super().__init__(instance_name)
        self.counter = 0
        self.last_level = None

    def _check(self):
        if self["threshold"] < 1:
            raise UnitError(f"{self.name}: threshold must be at least 1")

    def _step(self, dt):
        level = self["level"]
        if self.last_level is not None and self["valve"] == 0 and level < self.last_level:
            self.counter += 1
        else:
            self.counter = 0
        self.last_level = level
        if self.counter >= self["threshold"]:
            self.values["leak"] = True

    def snapshot(self):
        snap = super().snapshot()
        snap.update(counter=self.counter, last_level=self.last_level)
        return snap


class LeakController(SimulationUnit):
    description = ModelDescription(
        "leak_controller",
        (
            Variable("level", "real", INPUT, 0.0),
            Variable("leak", "boolean", INPUT, False),
            Variable("valve", "real", OUTPUT, 0.0),
            Variable("minLevel", "real", PARAMETER, 1.0),
            Variable("maxLevel", "real", PARAMETER, 2.0),
            Variable("leakDelta", "real", PARAMETER, 0.5),
        ),
    )

    def __init__(self, instance_name):
        super().__init__(instance_name)
        self.effective_max = None
        self.leak_seen = False

    def _check(self):
        if not self["leakDelta"] > 0:
            raise UnitError(f"{self.name}: leakDelta must be positive")
        if not self["minLevel"] < self["maxLevel"] - self["leakDelta"]:
            raise UnitError(f"{self.name}: minLevel must be below maxLevel - leakDelta")

    def _start(self):
        self.effective_max = self["maxLevel"]

    def _step(self, dt):
        if self["leak"] and not self.leak_seen:
            self.leak_seen = True
            self.effective_max = self["maxLevel"] - self["leakDelta"]
        self.values["valve"] = _hysteresis(self["level"], self["valve"], self["minLevel"], self.effective_max)

    def snapshot(self):
        snap = super().snapshot()
        snap.update(effective_max=self.effective_max, leak_seen=self.leak_seen)
        return snap


class SineSource(SimulationUnit):
    description = ModelDescription(
        "sine_source",
        (
            Variable("angle", "real", OUTPUT, 0.0, direct_feedthrough=False),
            Variable("amplitude", "real", PARAMETER, 1.0),
            Variable("period", "real", PARAMETER, 1.0),
            Variable("phase", "real", PARAMETER, 0.0),
        ),
    )

    def _check(self):
        if not self["period"] > 0:
            raise UnitError(f"{self.name}: period must be positive")

    def value_at(self, t):
        return self["amplitude"] * math.sin(2 * math.pi * t / self["period"] + self["phase"])

    def _initial_outputs(self):
        self.values["angle"] = self.value_at(self.time)

    def do_step(self, current_time, step_size):
        super().do_step(current_time, step_size)
        self.values["angle"] = self.value_at(self.time)

    def _step(self, dt):
        pass


class Passthrough(SimulationUnit):
    description = ModelDescription(
        "passthrough",
        (
            Variable("u", "real", INPUT, 0.0),
            Variable("y", "real", OUTPUT, 0.0),
        ),
    )

    def _initial_outputs(self):
        self.values["y"] = self["u"]

    def _step(self, dt):
        self.values["y"] = self["u"]
