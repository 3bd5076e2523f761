"""Multi-model configuration: parsing, serialisation and static validation.

The JSON layout::

    {
      "fmus":        {"{x1}": "watertankcontroller-c.fmu", ...},
      "connections": {"{x1}.controller.valve": ["{x2}.tank.valvecontrol"]},
      "parameters":  {"{x1}.controller.maxLevel": 2},
      "modelSwaps":  {"controller": {"swapInstance": ..., "stepCondition": ...,
                                     "swapCondition": ..., "swapConnections": {...}}},
      "modelTransfers": {"controller": "controller"}
    }

A port is written ``{key}.instance.variable``.  The key picks the model,
the instance name identifies the running unit.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .conditions import ConditionError, parse_condition, typecheck, variables
from .units.base import INPUT, OUTPUT
from .units.registry import model_basename
from .valuetypes import ValueTypeError, coerce, condition_kind

TOP_LEVEL_KEYS = ("fmus", "connections", "parameters", "modelSwaps", "modelTransfers")
SWAP_KEYS = ("swapInstance", "stepCondition", "swapCondition", "swapConnections")
TRUE_CONDITION = "(true)"

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_KEY = re.compile(r"[A-Za-z0-9_]+\Z")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class PortId:
    instance_key: str
    instance_name: str
    variable: str

    def __str__(self):
        return f"{{{self.instance_key}}}.{self.instance_name}.{self.variable}"

    @property
    def port(self) -> str:
        """``instance.variable``, the form used inside conditions and scopes."""
        return f"{self.instance_name}.{self.variable}"


def parse_port_id(s: str) -> PortId:
    if not isinstance(s, str):
        raise ConfigError(f"port id must be a string, got {s!r}")
    if not s.startswith("{") or "}" not in s:
        raise ConfigError(f"missing instance key braces in {s!r}")
    close = s.index("}")
    key, rest = s[1:close], s[close + 1:]
    if not key:
        raise ConfigError(f"empty component in {s!r}")
    if not _KEY.match(key):
        raise ConfigError(f"invalid instance key {{{key}}} in {s!r}")
    if not rest.startswith("."):
        raise ConfigError(f"wrong component count in {s!r}")
    parts = rest[1:].split(".")
    if len(parts) != 2:
        raise ConfigError(f"wrong component count in {s!r}")
    if not all(parts):
        raise ConfigError(f"empty component in {s!r}")
    for p in parts:
        if not _IDENT.match(p):
            raise ConfigError(f"invalid identifier {p!r} in {s!r}")
    return PortId(key, parts[0], parts[1])


@dataclass
class SwapEntry:
    swap_instance: str
    step_condition: str = TRUE_CONDITION
    swap_condition: str = TRUE_CONDITION
    swap_connections: dict = field(default_factory=dict)  # PortId -> [PortId]


@dataclass
class MultiModelConfig:
    units: dict = field(default_factory=dict)  # key -> model name
    connections: dict = field(default_factory=dict)  # PortId -> [PortId]
    parameters: dict = field(default_factory=dict)  # PortId -> value
    model_swaps: dict = field(default_factory=dict)  # target name -> SwapEntry
    model_transfers: dict = field(default_factory=dict)  # old name -> new name
    warnings: list = field(default_factory=list, compare=False)

    def ports(self):
        """Every PortId mentioned anywhere, in document order."""
        for src, sinks in self.connections.items():
            yield src
            yield from sinks
        yield from self.parameters
        for entry in self.model_swaps.values():
            for src, sinks in entry.swap_connections.items():
                yield src
                yield from sinks

    def instances(self) -> dict:
        """instance name -> key.

        A key that no port mentions still declares one instance, named
        after the key itself (so ``{"fmus": {"{sine}": "sine_source"}}``
        runs a unit called ``sine``).
        """
        found = {}
        for p in self.ports():
            found.setdefault(p.instance_name, p.instance_key)
        used = set(found.values())
        for key in self.units:
            if key not in used:
                found.setdefault(key, key)
        return dict(sorted(found.items()))

    def model_of(self, instance: str) -> Optional[str]:
        key = self.instances().get(instance)
        return self.units.get(key) if key is not None else None

    def swap_instances(self) -> dict:
        """swap instance name -> target it replaces."""
        return {e.swap_instance: t for t, e in self.model_swaps.items()}

    def all_routes(self):
        """(source, sink, swap target or None) for every configured wire."""
        for src, sinks in self.connections.items():
            for sink in sinks:
                yield src, sink, None
        for target, entry in self.model_swaps.items():
            for src, sinks in entry.swap_connections.items():
                for sink in sinks:
                    yield src, sink, target


# --- parsing ---------------------------------------------------------------

def _port_map(obj, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object")
    out = {}
    claimed = {}
    for src_text, sinks in obj.items():
        src = parse_port_id(src_text)
        if not isinstance(sinks, list):
            raise ConfigError(f"{where}[{src_text}] must be a list of port ids")
        parsed = []
        for s in sinks:
            sink = parse_port_id(s)
            if sink in claimed or sink in parsed:
                raise ConfigError(f"duplicate sink {sink} in {where}")
            claimed[sink] = src
            parsed.append(sink)
        out[src] = parsed
    return out


def parse_multi_model(text: str) -> MultiModelConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"JSON syntax error at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return config_from_dict(doc)


def config_from_dict(doc) -> MultiModelConfig:
    if not isinstance(doc, dict):
        raise ConfigError("multi-model must be a JSON object")
    cfg = MultiModelConfig()
    for key in doc:
        if key not in TOP_LEVEL_KEYS:
            cfg.warnings.append(f"unknown top-level key {key!r} ignored")

    fmus = doc.get("fmus", {})
    if not isinstance(fmus, dict):
        raise ConfigError("fmus must be an object")
    for key, model in fmus.items():
        if not (key.startswith("{") and key.endswith("}")):
            raise ConfigError(f"missing instance key braces in fmus key {key!r}")
        inner = key[1:-1]
        if not _KEY.match(inner):
            raise ConfigError(f"invalid instance key {key!r}")
        if not isinstance(model, str) or not model:
            raise ConfigError(f"model name for {key} must be a non-empty string")
        cfg.units[inner] = model

    cfg.connections = _port_map(doc.get("connections", {}), "connections")

    params = doc.get("parameters", {})
    if not isinstance(params, dict):
        raise ConfigError("parameters must be an object")
    for port_text, value in params.items():
        if not isinstance(value, (bool, int, float, str)):
            raise ConfigError(f"parameter {port_text} must be a scalar")
        cfg.parameters[parse_port_id(port_text)] = value

    swaps = doc.get("modelSwaps", {})
    if not isinstance(swaps, dict):
        raise ConfigError("modelSwaps must be an object")
    for target, body in swaps.items():
        if not _IDENT.match(target):
            raise ConfigError(f"invalid swap target name {target!r}")
        if not isinstance(body, dict):
            raise ConfigError(f"modelSwaps[{target}] must be an object")
        for k in body:
            if k not in SWAP_KEYS:
                cfg.warnings.append(f"unknown key {k!r} in modelSwaps[{target}] ignored")
        inst = body.get("swapInstance")
        if not isinstance(inst, str) or not _IDENT.match(inst):
            raise ConfigError(f"modelSwaps[{target}] needs a swapInstance name")
        entry = SwapEntry(inst)
        for attr, k in (("step_condition", "stepCondition"), ("swap_condition", "swapCondition")):
            text = body.get(k, TRUE_CONDITION)
            if not isinstance(text, str):
                raise ConfigError(f"{k} of {target} must be a string")
            try:
                parse_condition(text)
            except ConditionError as exc:
                raise ConfigError(f"invalid {k} of {target}: {exc}") from None
            setattr(entry, attr, text)
        entry.swap_connections = _port_map(body.get("swapConnections", {}), f"swapConnections of {target}")
        cfg.model_swaps[target] = entry

    transfers = doc.get("modelTransfers", {})
    if not isinstance(transfers, dict):
        raise ConfigError("modelTransfers must be an object")
    for old, new in transfers.items():
        if not (_IDENT.match(old) and isinstance(new, str) and _IDENT.match(new)):
            raise ConfigError(f"invalid model transfer {old!r} -> {new!r}")
        cfg.model_transfers[old] = new

    _check_structure(cfg)
    return cfg


def _check_structure(cfg: MultiModelConfig) -> None:
    owner = {}
    for p in cfg.ports():
        if p.instance_key not in cfg.units:
            raise ConfigError(f"unknown instance key {{{p.instance_key}}} in {p}")
        prev = owner.setdefault(p.instance_name, p.instance_key)
        if prev != p.instance_key:
            raise ConfigError(
                f"instance {p.instance_name} declared under keys {{{prev}}} and {{{p.instance_key}}}"
            )
    declared = cfg.instances()
    new_names = list(cfg.model_transfers.values())
    if len(set(new_names)) != len(new_names):
        raise ConfigError("two instances transferred to the same name")
    for target, entry in cfg.model_swaps.items():
        if entry.swap_instance not in declared:
            raise ConfigError(f"swap instance {entry.swap_instance} is not declared in any port")
        if entry.swap_instance == target:
            raise ConfigError(f"instance {target} cannot replace itself")
        if entry.swap_instance in cfg.model_transfers or entry.swap_instance in new_names:
            raise ConfigError(f"swap instance {entry.swap_instance} is also a transferred instance")
    targets = [e.swap_instance for e in cfg.model_swaps.values()]
    if len(set(targets)) != len(targets):
        raise ConfigError("one swap instance replaces two targets")


# --- serialisation ---------------------------------------------------------

def _ports_out(m: dict) -> dict:
    return {str(src): [str(s) for s in sinks] for src, sinks in m.items()}


def to_dict(cfg: MultiModelConfig) -> dict:
    return {
        "fmus": {f"{{{k}}}": v for k, v in cfg.units.items()},
        "connections": _ports_out(cfg.connections),
        "parameters": {str(p): v for p, v in cfg.parameters.items()},
        "modelSwaps": {
            t: {
                "swapInstance": e.swap_instance,
                "stepCondition": e.step_condition,
                "swapCondition": e.swap_condition,
                "swapConnections": _ports_out(e.swap_connections),
            }
            for t, e in cfg.model_swaps.items()
        },
        "modelTransfers": dict(cfg.model_transfers),
    }


def to_json(cfg: MultiModelConfig, indent=2) -> str:
    return json.dumps(to_dict(cfg), indent=indent)


def load_config(path) -> MultiModelConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_multi_model(fh.read())


# --- static validation -----------------------------------------------------

ERROR = "error"
WARNING = "warning"
NOTE = "note"


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    message: str

    def __str__(self):
        return f"{self.severity}: {self.message}"


@dataclass
class ValidationReport:
    diagnostics: list = field(default_factory=list)

    @property
    def errors(self):
        return [d for d in self.diagnostics if d.severity == ERROR]

    @property
    def ok(self) -> bool:
        return not self.errors

    def add(self, severity, message):
        self.diagnostics.append(Diagnostic(severity, message))

    def __str__(self):
        return "\n".join(str(d) for d in self.diagnostics)


def _lookup(registry):
    if isinstance(registry, Mapping):
        return lambda name: registry.get(model_basename(name))
    return registry.description


def instance_descriptions(cfg: MultiModelConfig, registry) -> dict:
    """instance name -> ModelDescription (None for unknown models)."""
    look = _lookup(registry)
    return {name: look(cfg.units[key]) for name, key in cfg.instances().items()}


def condition_kinds(cfg: MultiModelConfig, registry) -> dict:
    kinds = {}
    for name, desc in instance_descriptions(cfg, registry).items():
        if desc is None:
            continue
        for v in desc.variables:
            kinds[f"{name}.{v.name}"] = condition_kind(v.vtype)
    return kinds


def validate_config(cfg: MultiModelConfig, registry, extra_kinds: Optional[Mapping[str, str]] = None) -> ValidationReport:
    """Static checks; the config is runnable iff the report has no errors.

    ``extra_kinds`` adds variables (``inst.var`` -> 'num'/'bool') that
    conditions may reference besides the config's own instances, e.g. the
    last-known values of a running simulation.
    """
    report = ValidationReport()
    for w in cfg.warnings:
        report.add(WARNING, w)

    look = _lookup(registry)
    for key, model in sorted(cfg.units.items()):
        if look(model) is None:
            report.add(ERROR, f"unknown model {model_basename(model)} (key {{{key}}})")
    descs = instance_descriptions(cfg, registry)

    def var_of(port: PortId):
        desc = descs.get(port.instance_name)
        if desc is None:
            return None  # unknown model already reported
        v = desc.var(port.variable)
        if v is None:
            report.add(ERROR, f"unknown variable {port.port}")
        return v

    for src, sink, target in cfg.all_routes():
        where = "connection" if target is None else f"swap connection of {target}"
        sv, dv = var_of(src), var_of(sink)
        if sv is not None and sv.causality != OUTPUT:
            report.add(ERROR, f"{where} source {src.port} is not an output")
        if dv is not None and dv.causality != INPUT:
            report.add(ERROR, f"{where} sink {sink.port} is not an input")
        if sv is not None and dv is not None and sv.vtype != dv.vtype:
            if not (sv.vtype == "integer" and dv.vtype == "real"):
                report.add(ERROR, f"type mismatch on {where} {src.port} ({sv.vtype}) -> {sink.port} ({dv.vtype})")

    transferred = set(cfg.model_transfers.values())
    for port, value in cfg.parameters.items():
        v = var_of(port)
        if v is None:
            continue
        if port.instance_name in transferred:
            report.add(NOTE, f"parameter {port.port} ignored: {port.instance_name} is transferred with its state")
        try:
            coerce(v.vtype, value, port.port)
        except ValueTypeError as exc:
            report.add(ERROR, str(exc))

    kinds = condition_kinds(cfg, registry)
    if extra_kinds:
        kinds = {**extra_kinds, **kinds}
    for target, entry in cfg.model_swaps.items():
        if target not in descs:
            report.add(ERROR, f"swap target {target} is not an instance of this configuration")
        for label, text in (("stepCondition", entry.step_condition), ("swapCondition", entry.swap_condition)):
            expr = parse_condition(text)
            unbound = [v.name for v in variables(expr) if v.name not in kinds]
            for name in dict.fromkeys(unbound):
                report.add(ERROR, f"unbound variable {name} in {label} of {target}")
            if unbound:
                continue
            try:
                if typecheck(expr, kinds) != "bool":
                    report.add(ERROR, f"{label} of {target} is not a boolean expression")
            except ConditionError as exc:
                report.add(ERROR, f"{label} of {target}: {exc}")
        a, b = entry.step_condition.strip(), entry.swap_condition.strip()
        if a != b and TRUE_CONDITION not in (a, b):
            report.add(NOTE, f"swapCondition of {target} is assumed to imply its stepCondition (checked at run time)")
    return report
