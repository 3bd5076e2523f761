"""Fault injection by wrapping a unit's set_var / get_var."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from ..conditions import LatchedCondition, parse_condition, pretty
from ..valuetypes import BOOLEAN, coerce
from .base import INPUT, OUTPUT, STEPPING, UnitError

ALTERNATE01 = "alternate01"


@dataclass(frozen=True)
class FaultRule:
    instance: str
    variable: str
    direction: str  # "input" or "output"
    trigger: str
    transform: object  # "alternate01" or {"constant": value}

    @classmethod
    def from_dict(cls, d: dict) -> "FaultRule":
        missing = {"instance", "variable", "direction", "trigger", "transform"} - set(d)
        if missing:
            raise ValueError(f"fault rule missing fields: {', '.join(sorted(missing))}")
        rule = cls(d["instance"], d["variable"], d["direction"], d["trigger"], d["transform"])
        rule.validate_shape()
        return rule

    def to_dict(self):
        return {
            "instance": self.instance,
            "variable": self.variable,
            "direction": self.direction,
            "trigger": self.trigger,
            "transform": self.transform,
        }

    def validate_shape(self):
        if self.direction not in (INPUT, OUTPUT):
            raise ValueError(f"fault direction must be input or output, got {self.direction!r}")
        parse_condition(self.trigger)
        t = self.transform
        if t != ALTERNATE01 and not (isinstance(t, dict) and set(t) == {"constant"}):
            raise ValueError(f"unknown fault transform {t!r}")


def load_fault_rules(path) -> list[FaultRule]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise ValueError("fault-rule file must hold a JSON list")
    return [FaultRule.from_dict(d) for d in data]


class _ActiveRule:
    def __init__(self, rule: FaultRule, vtype: str):
        self.rule = rule
        self.vtype = vtype
        self.latch = LatchedCondition(rule.trigger)
        self.count = 0  # active steps so far
        self.latched_at = None  # target local time of the first active step

    def apply(self, value):
        t = self.rule.transform
        if t == ALTERNATE01:
            v = 1 if self.count % 2 == 1 else 0
        else:
            v = t["constant"]
        if self.vtype == BOOLEAN and not isinstance(v, bool):
            v = bool(v)
        return coerce(self.vtype, v, f"{self.rule.instance}.{self.rule.variable}")


class FaultInjector:
    """Decorates a unit; looks like a unit to the engine.

    Trigger conditions see the target's variables (as ``inst.var``) plus
    ``inst.time``, the target's local time before the step.  They are
    updated at the start of each do_step.  Once latched, the transform is
    applied on every step: input rules replace what the target receives,
    output rules replace what get_var returns.
    """

    def __init__(self, target, rules):
        self.target = target
        self.rules = []
        for rule in rules:
            v = target.description.var(rule.variable)
            if v is None:
                raise UnitError(f"fault rule: unknown variable {target.name}.{rule.variable}")
            if v.causality != rule.direction:
                raise UnitError(
                    f"fault rule: {target.name}.{rule.variable} is {v.causality}, not {rule.direction}"
                )
            self.rules.append(_ActiveRule(rule, v.vtype))
        self.commanded = {}
        self.seen = {}  # input values actually delivered to the target

    # delegate everything that is not intercepted
    def __getattr__(self, item):
        return getattr(self.target, item)

    @property
    def name(self):
        return self.target.name

    @name.setter
    def name(self, value):
        self.target.name = value

    def _input_rule(self, name) -> Optional[_ActiveRule]:
        for r in self.rules:
            if r.rule.direction == INPUT and r.rule.variable == name:
                return r
        return None

    def _output_rule(self, name) -> Optional[_ActiveRule]:
        for r in self.rules:
            if r.rule.direction == OUTPUT and r.rule.variable == name:
                return r
        return None

    def set_var(self, name, value):
        rule = self._input_rule(name)
        if rule is not None and self.target.state == STEPPING:
            # validate now, deliver at do_step
            v = self.target.description.var(name)
            self.commanded[name] = coerce(v.vtype, value, f"{self.target.name}.{name}")
            return
        self.target.set_var(name, value)

    def get_var(self, name):
        value = self.target.get_var(name)
        rule = self._output_rule(name)
        if rule is not None and rule.latch.latched:
            return rule.apply(value)
        return value

    def trigger_scope(self):
        t = self.target
        scope = {f"{t.name}.{k}": v for k, v in t.values.items()}
        for name, value in self.commanded.items():
            scope[f"{t.name}.{name}"] = value
        scope[f"{t.name}.time"] = t.time
        return scope

    def do_step(self, current_time, step_size):
        scope = self.trigger_scope()
        for r in self.rules:
            if r.latch.update(scope):
                if r.latched_at is None:
                    r.latched_at = self.target.time
                r.count += 1
        for r in self.rules:
            if r.rule.direction != INPUT:
                continue
            name = r.rule.variable
            value = self.commanded.get(name, self.target.values[name])
            if r.latch.latched:
                value = r.apply(value)
            self.target.set_var(name, value)
            self.seen[name] = value
        self.target.do_step(current_time, step_size)

    def describe(self):
        return [f"{r.rule.instance}.{r.rule.variable} {r.rule.direction} when {pretty(r.latch.expr)}" for r in self.rules]
