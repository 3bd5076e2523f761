"""FMI-like simulation unit interface and lifecycle enforcement."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from ..valuetypes import VAR_TYPES, coerce

INPUT = "input"
OUTPUT = "output"
PARAMETER = "parameter"
CAUSALITIES = (INPUT, OUTPUT, PARAMETER)

INSTANTIATED = "INSTANTIATED"
INITIALIZATION = "INITIALIZATION"
STEPPING = "STEPPING"
TERMINATED = "TERMINATED"

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class UnitError(RuntimeError):
    """Unknown variable, bad step size or a violated model precondition."""


class LifecycleError(UnitError):
    pass


@dataclass(frozen=True)
class Variable:
    name: str
    vtype: str
    causality: str
    start: object = None
    # only meaningful for outputs: does the value depend on inputs of the same instant?
    direct_feedthrough: bool = True


@dataclass(frozen=True)
class ModelDescription:
    model_name: str
    variables: tuple = field(default_factory=tuple)

    def __post_init__(self):
        seen = set()
        for v in self.variables:
            if not _IDENT.match(v.name):
                raise ValueError(f"{self.model_name}: bad variable name {v.name!r}")
            if v.name in seen:
                raise ValueError(f"{self.model_name}: duplicate variable {v.name}")
            seen.add(v.name)
            if v.vtype not in VAR_TYPES:
                raise ValueError(f"{self.model_name}.{v.name}: unknown type {v.vtype!r}")
            if v.causality not in CAUSALITIES:
                raise ValueError(f"{self.model_name}.{v.name}: unknown causality {v.causality!r}")
            if v.causality == PARAMETER and v.start is None:
                raise ValueError(f"{self.model_name}.{v.name}: parameter needs a start value")

    def var(self, name: str) -> Optional[Variable]:
        for v in self.variables:
            if v.name == name:
                return v
        return None

    def of(self, causality: str) -> list[Variable]:
        return [v for v in self.variables if v.causality == causality]

    @property
    def inputs(self):
        return self.of(INPUT)

    @property
    def outputs(self):
        return self.of(OUTPUT)

    @property
    def parameters(self):
        return self.of(PARAMETER)


def _default(vtype):
    return {"real": 0.0, "integer": 0, "boolean": False, "string": ""}[vtype]


class SimulationUnit:
    """Base class for builtin units.

    Subclasses set ``description`` and override the hooks ``_initial_outputs``
    (recompute outputs while in initialization mode), ``_check`` (parameter
    preconditions, run at exit_initialization), ``_start`` and ``_step``.
    """

    description: ModelDescription = ModelDescription("abstract")

    def __init__(self, instance_name: str):
        self.name = instance_name
        self.state = INSTANTIATED
        self.time = 0.0
        self.values = {}
        self.explicit = set()  # variables set by the master before initialization ended
        for v in self.description.variables:
            self.values[v.name] = v.start if v.start is not None else _default(v.vtype)

    # --- helpers ---------------------------------------------------------
    def _var(self, name) -> Variable:
        v = self.description.var(name)
        if v is None:
            raise UnitError(f"unknown variable {self.name}.{name}")
        return v

    def _require(self, op, *states):
        if self.state not in states:
            raise LifecycleError(f"lifecycle violation: {op} not allowed in state {self.state} ({self.name})")

    def __getitem__(self, name):
        return self.values[name]

    # --- lifecycle -------------------------------------------------------
    def set_var(self, name: str, value) -> None:
        v = self._var(name)
        if self.state == TERMINATED:
            self._require("set_var", INSTANTIATED)
        if v.causality == PARAMETER:
            self._require(f"set_var({name})", INSTANTIATED)
        elif v.causality == OUTPUT:
            self._require(f"set_var({name})", INSTANTIATED, INITIALIZATION)
        self.values[name] = coerce(v.vtype, value, f"{self.name}.{name}")
        if self.state != STEPPING:
            self.explicit.add(name)

    def get_var(self, name: str):
        v = self._var(name)
        self._require(f"get_var({name})", INITIALIZATION, STEPPING)
        if self.state == INITIALIZATION and v.causality == OUTPUT:
            self._initial_outputs()
        return self.values[name]

    def enter_initialization(self, start_time: float = 0.0) -> None:
        self._require("enter_initialization", INSTANTIATED)
        self.state = INITIALIZATION
        self.time = float(start_time)

    def exit_initialization(self) -> None:
        self._require("exit_initialization", INITIALIZATION)
        self._check()
        self._initial_outputs()
        self._start()
        self.state = STEPPING

    def do_step(self, current_time: float, step_size: float) -> None:
        self._require("do_step", STEPPING)
        if not step_size > 0:
            raise UnitError(f"nonpositive step {step_size!r} for {self.name}")
        self._step(step_size)
        self.time = current_time + step_size

    def terminate(self) -> None:
        self._require("terminate", INSTANTIATED, INITIALIZATION, STEPPING)
        self._stop()
        self.state = TERMINATED

    # --- hooks -----------------------------------------------------------
    def _initial_outputs(self):
        pass

    def _check(self):
        pass

    def _start(self):
        pass

    def _step(self, dt):
        raise NotImplementedError

    def _stop(self):
        pass

    def snapshot(self) -> dict:
        return dict(self.values)

    def __repr__(self):
        return f"<{type(self).__name__} {self.name} {self.state} t={self.time}>"
