"""Fixed-step Jacobi master with run-time model swapping.

One iteration (``Engine.execute_step``):

1. transfer point: maybe pick up, validate and install a new configuration;
2. update every swap target's latches, swap latch first, then step latch;
3. guarded set: each connected input gets exactly one value, taken from
   the swap connection once the relevant latch is set, otherwise from
   the original connection;
4. guarded step: a replaced instance stops stepping once its swap latch
   is set, a swap instance only steps once its step latch is set;
   everybody else always steps over the same interval;
5. read outputs of every unit that stepped into the scope;
6. retire replaced instances, advance time and swap-instance offsets, log.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

from .conditions import ConditionError, LatchedCondition
from .config import (
    ERROR,
    ConfigError,
    Diagnostic,
    MultiModelConfig,
    PortId,
    instance_descriptions,
    parse_multi_model,
    validate_config,
)
from .graph import LoopError, build_port_graph, initialization_order, prune_transfer_edges
from .steplog import CsvSink, StepLog
from .units.base import INPUT, OUTPUT, UnitError
from .units.faults import FaultInjector
from .units.registry import Registry
from .valuetypes import ValueTypeError

log = logging.getLogger(__name__)


class EngineError(RuntimeError):
    pass


class UnitFailure(EngineError):
    def __init__(self, instance, time, exc):
        self.instance = instance
        self.time = time
        super().__init__(f"unit {instance} failed at t={time:.9g}: {exc}")


@dataclass
class RunOptions:
    start: float = 0.0
    end: float = 10.0
    step_size: float = 0.1
    transfer_source: object = None
    min_steps_before_transfer: int = 1
    check_every_n_steps: int = 1
    fault_rules: tuple = ()

    def validate(self):
        if not self.step_size > 0:
            raise ValueError("step size must be positive")
        if self.end < self.start:
            raise ValueError("end time before start time")
        if self.check_every_n_steps < 1:
            raise ValueError("check_every_n_steps must be >= 1")
        if self.min_steps_before_transfer < 0:
            raise ValueError("min_steps_before_transfer must be >= 0")

    @property
    def n_steps(self) -> int:
        # loop while t + dt <= end; the epsilon absorbs 40/0.1 = 399.99999...
        return int(math.floor((self.end - self.start) / self.step_size + 1e-9))


@dataclass
class SwapState:
    target: str
    swap_instance: str
    step: LatchedCondition
    swap: LatchedCondition


@dataclass
class SwapPlan:
    new_config: MultiModelConfig
    transfers: dict = field(default_factory=dict)
    fresh: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    name: str = ""

    @property
    def ok(self):
        return not any(d.severity == ERROR for d in self.diagnostics)


@dataclass
class SimulationContext:
    config: MultiModelConfig
    registry: Registry
    options: RunOptions
    instances: dict = field(default_factory=dict)  # name -> unit
    keys: dict = field(default_factory=dict)  # name -> {key}
    iteration: int = 0
    swaps: dict = field(default_factory=dict)  # target -> SwapState
    steps_taken: dict = field(default_factory=dict)  # swap instance -> count
    scope: dict = field(default_factory=dict)  # "inst.var" -> last known value
    swapped_out: set = field(default_factory=set)
    events: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    @property
    def step_size(self):
        return self.options.step_size

    @property
    def global_time(self) -> float:
        return self.options.start + self.iteration * self.options.step_size

    @property
    def end_time(self):
        return self.options.end

    @property
    def offsets(self) -> dict:
        return {s: n * self.step_size for s, n in self.steps_taken.items()}

    def live(self):
        return [n for n in sorted(self.instances) if n not in self.swapped_out]

    def swap_instance_targets(self) -> dict:
        return {st.swap_instance: t for t, st in self.swaps.items()}

    def event(self, kind, detail):
        self.events.append((self.iteration, self.global_time, kind, detail))


@dataclass
class SimulationResult:
    logs: list
    columns: list
    events: list
    diagnostics: list
    context: SimulationContext
    sink: Optional[CsvSink] = None

    def csv(self) -> str:
        return self.sink.text() if self.sink else ""

    def column(self, name):
        return [lg.values.get(name) for lg in self.logs]

    @property
    def times(self):
        return [lg.time for lg in self.logs]


# --- helpers ---------------------------------------------------------------

def _call(unit, time, fn, *args):
    try:
        return fn(*args)
    except (UnitError, ValueTypeError, ConditionError) as exc:
        raise UnitFailure(unit.name, time, exc) from exc


def _create(registry, cfg, name, rules):
    unit = registry.create(cfg.model_of(name), name)
    mine = [r for r in rules if r.instance == name]
    return FaultInjector(unit, mine) if mine else unit


def _value_kind(v):
    if isinstance(v, bool):
        return "bool"
    if isinstance(v, (int, float)):
        return "num"
    return "str"


def config_columns(cfg: MultiModelConfig, registry, fault_rules=()) -> tuple[list, list]:
    """(port columns, latch columns) a config produces in the step log."""
    ports = set()
    instances = cfg.instances()
    for name, desc in instance_descriptions(cfg, registry).items():
        if desc is None:
            continue
        for v in desc.outputs:
            ports.add(str(PortId(instances[name], name, v.name)))
    for r in fault_rules:
        if r.direction == INPUT and r.instance in instances:
            ports.add(str(PortId(instances[r.instance], r.instance, r.variable)))
    latches = set()
    for t in cfg.model_swaps:
        latches.update((f"stepCondition[{t}]", f"swapCondition[{t}]"))
    return sorted(ports), sorted(latches)


def _initial_source(cfg, sink):
    base = swap = None
    for src, s, target in cfg.all_routes():
        if s == sink:
            if target is None:
                base = src
            else:
                swap = src
    return base if base is not None else swap


def _init_units(ctx: SimulationContext, cfg, fresh, graph_transfers=()):
    """Initialise ``fresh`` units in dependency order, reading upstream values from scope."""
    graph = prune_transfer_edges(build_port_graph(cfg, ctx.registry), graph_transfers)
    order = initialization_order(graph)
    t = ctx.global_time
    for port in order:
        name = port.instance_name
        if name not in fresh:
            continue
        unit = ctx.instances[name]
        if graph.nodes[port] == OUTPUT:
            ctx.scope[port.port] = _call(unit, t, unit.get_var, port.variable)
        else:
            src = _initial_source(cfg, port)
            if src is not None and src.port in ctx.scope:
                _call(unit, t, unit.set_var, port.variable, ctx.scope[src.port])
    for name in sorted(fresh):
        unit = ctx.instances[name]
        _call(unit, t, unit.exit_initialization)
    for name in sorted(fresh):
        unit = ctx.instances[name]
        for v in unit.description.variables:
            ctx.scope[f"{name}.{v.name}"] = _call(unit, t, unit.get_var, v.name)


def _make_swaps(cfg):
    return {
        t: SwapState(t, e.swap_instance, LatchedCondition(e.step_condition), LatchedCondition(e.swap_condition))
        for t, e in sorted(cfg.model_swaps.items())
    }


def _set_parameters(ctx, cfg, names):
    t = ctx.global_time
    for port, value in sorted(cfg.parameters.items(), key=lambda kv: str(kv[0])):
        if port.instance_name in names:
            unit = ctx.instances[port.instance_name]
            _call(unit, t, unit.set_var, port.variable, value)


def initialize(cfg: MultiModelConfig, options: RunOptions, registry: Registry) -> SimulationContext:
    options.validate()
    report = validate_config(cfg, registry)
    if not report.ok:
        raise ConfigError("invalid configuration:\n" + "\n".join(str(d) for d in report.errors))
    ctx = SimulationContext(cfg, registry, options)
    ctx.keys = cfg.instances()
    ctx.swaps = _make_swaps(cfg)
    swap_instances = ctx.swap_instance_targets()
    # fail on loops before touching any unit
    initialization_order(build_port_graph(cfg, registry))
    for name in ctx.keys:
        ctx.instances[name] = _create(registry, cfg, name, options.fault_rules)
    _set_parameters(ctx, cfg, set(ctx.keys))
    for name, unit in ctx.instances.items():
        start = 0.0 if name in swap_instances else options.start
        _call(unit, options.start, unit.enter_initialization, start)
    ctx.steps_taken = {s: 0 for s in swap_instances}
    _init_units(ctx, cfg, set(ctx.keys))
    return ctx


# --- transfer points -------------------------------------------------------

def validate_swap_spec(ctx: SimulationContext, new_cfg: MultiModelConfig) -> SwapPlan:
    """Check a new configuration against the running context without touching it."""
    kinds = {k: _value_kind(v) for k, v in ctx.scope.items()}
    report = validate_config(new_cfg, ctx.registry, extra_kinds=kinds)
    plan = SwapPlan(new_cfg, dict(new_cfg.model_transfers), diagnostics=list(report.diagnostics))

    def err(msg):
        plan.diagnostics.append(Diagnostic(ERROR, msg))

    declared = new_cfg.instances()
    for old, new in plan.transfers.items():
        if old not in ctx.instances:
            err(f"unknown transfer instance {old}")
        elif old in ctx.swapped_out:
            err(f"transfer instance {old} has been swapped out")
        elif new not in declared:
            err(f"transferred instance {new} is not declared in the new configuration")
        else:
            was = ctx.registry.resolve(ctx.config.model_of(old))
            now = ctx.registry.resolve(new_cfg.model_of(new))
            if was != now:
                err(f"transfer {old} -> {new} changes model from {was} to {now}")
    plan.fresh = [n for n in declared if n not in plan.transfers.values()]
    if not plan.ok:
        return plan

    try:
        initialization_order(prune_transfer_edges(build_port_graph(new_cfg, ctx.registry), plan.transfers.values()))
    except LoopError as exc:
        err(str(exc))
        return plan

    # dry run in a sandbox: same models, private copy of any shared state
    sandbox = ctx.registry.sandbox()
    for name in plan.fresh:
        try:
            unit = sandbox.create(new_cfg.model_of(name), name)
            for port, value in new_cfg.parameters.items():
                if port.instance_name == name:
                    unit.set_var(port.variable, value)
            unit.enter_initialization(0.0)
            unit.exit_initialization()
            unit.terminate()
        except (UnitError, ValueTypeError) as exc:
            err(f"dry-run of {name} failed: {exc}")
    return plan


def check_transfer_point(ctx: SimulationContext, source) -> Optional[SwapPlan]:
    opts = ctx.options
    k = ctx.iteration
    if source is None or k < opts.min_steps_before_transfer or k % opts.check_every_n_steps:
        return None
    got = source.poll(k)
    if got is None:
        return None
    name, text = got
    try:
        plan = validate_swap_spec(ctx, parse_multi_model(text))
    except ConfigError as exc:
        plan = SwapPlan(MultiModelConfig(), diagnostics=[Diagnostic(ERROR, str(exc))])
    plan.name = name
    if not plan.ok:
        source.rejected(name, k, plan.diagnostics)
        ctx.diagnostics.extend(plan.diagnostics)
        ctx.event("rejected", name)
        for d in plan.diagnostics:
            if d.severity == ERROR:
                log.warning("swap spec %s rejected at t=%.9g: %s", name, ctx.global_time, d.message)
        return None
    source.consumed(name, k)
    return plan


def apply_transfer(ctx: SimulationContext, plan: SwapPlan) -> SimulationContext:
    """Build the context for ``plan.new_config``; transferred units move in untouched."""
    cfg = plan.new_config
    new = SimulationContext(cfg, ctx.registry, ctx.options, iteration=ctx.iteration)
    new.scope = dict(ctx.scope)
    new.events = ctx.events
    new.diagnostics = ctx.diagnostics + [d for d in plan.diagnostics if d.severity != ERROR]
    new.keys = cfg.instances()
    new.swaps = _make_swaps(cfg)
    swap_instances = new.swap_instance_targets()
    t = ctx.global_time

    for old, name in plan.transfers.items():
        unit = ctx.instances[old]
        if old != name:
            unit.name = name
            for v in unit.description.variables:
                new.scope[f"{name}.{v.name}"] = new.scope.pop(f"{old}.{v.name}")
        new.instances[name] = unit
    for old in ctx.live():
        if old not in plan.transfers:
            ctx.instances[old].terminate()
            new.event("discarded", old)

    fresh = set(plan.fresh)
    for name in sorted(fresh):
        new.instances[name] = _create(ctx.registry, cfg, name, ctx.options.fault_rules)
    _set_parameters(new, cfg, fresh)
    for name in sorted(fresh):
        unit = new.instances[name]
        _call(unit, t, unit.enter_initialization, 0.0 if name in swap_instances else t)
    new.steps_taken = {s: 0 for s in swap_instances}
    _init_units(new, cfg, fresh, graph_transfers=plan.transfers.values())
    new.event("transfer", plan.name)
    log.info("applied swap spec %s at t=%.9g", plan.name, t)
    return new


# --- the loop ----------------------------------------------------------------

class Engine:
    def __init__(self, cfg: MultiModelConfig, options: RunOptions, registry: Optional[Registry] = None,
                 sink: Optional[CsvSink] = None):
        self.registry = registry if registry is not None else Registry()
        self.options = options
        self.ctx = initialize(cfg, options, self.registry)
        self.sink = sink
        self.logs = []
        source = options.transfer_source
        ports, latches = config_columns(cfg, self.registry, options.fault_rules)
        if source is not None and getattr(source, "scheduled", False):
            # every column that any scheduled spec could add exists from the start
            ports, latches = set(ports), set(latches)
            for text in source.specs():
                try:
                    p, l = config_columns(parse_multi_model(text), self.registry, options.fault_rules)
                except ConfigError:
                    continue
                ports.update(p)
                latches.update(l)
            ports, latches = sorted(ports), sorted(latches)
        self.columns = list(ports) + list(latches)
        if self.sink is not None:
            self.sink.begin(self.columns)

    def _routes(self):
        """sink PortId -> source PortId for this iteration (latches already updated)."""
        ctx = self.ctx
        base, override = {}, {}
        for src, sink, target in ctx.config.all_routes():
            if target is None:
                base[sink] = src
                continue
            st = ctx.swaps[target]
            if src.instance_name == st.swap_instance:
                active = st.swap.latched
            elif sink.instance_name == st.swap_instance:
                active = st.step.latched
            else:
                active = st.swap.latched
            if active:
                if sink in override:
                    raise EngineError(f"two active swap connections write {sink}")
                override[sink] = src
        base.update(override)
        return base

    def _may_step(self, name) -> bool:
        ctx = self.ctx
        if name in ctx.swapped_out:
            return False
        st = ctx.swaps.get(name)
        if st is not None and st.swap.latched:
            return False
        target = ctx.swap_instance_targets().get(name)
        if target is not None:
            return ctx.swaps[target].step.latched
        return True

    def _update_latches(self):
        ctx = self.ctx
        for target, st in ctx.swaps.items():
            was = (st.swap.latched, st.step.latched)
            try:
                st.swap.update(ctx.scope)
                st.step.update(ctx.scope)
            except ConditionError as exc:
                raise EngineError(f"condition of {target} failed at t={ctx.global_time:.9g}: {exc}") from exc
            if st.swap.latched and not st.step.latched:
                raise EngineError(
                    f"swapCondition of {target} holds before its stepCondition at t={ctx.global_time:.9g}"
                )
            if st.step.latched and not was[1]:
                ctx.event("step-latch", target)
            if st.swap.latched and not was[0]:
                ctx.event("swap-latch", target)

    def execute_step(self) -> StepLog:
        plan = check_transfer_point(self.ctx, self.options.transfer_source)
        if plan is not None:
            self.ctx = apply_transfer(self.ctx, plan)
            if self.sink is not None and not getattr(self.options.transfer_source, "scheduled", False):
                ports, latches = config_columns(plan.new_config, self.registry, self.options.fault_rules)
                self.columns = ports + latches
                self.sink.segment(self.columns)
        ctx = self.ctx
        t = ctx.global_time
        dt = ctx.step_size
        self._update_latches()

        stepping = [n for n in ctx.live() if self._may_step(n)]
        eligible = set(stepping)
        for sink, src in sorted(self._routes().items(), key=lambda kv: str(kv[0])):
            name = sink.instance_name
            if name not in eligible:
                continue
            value = ctx.scope[src.port]
            unit = ctx.instances[name]
            _call(unit, t, unit.set_var, sink.variable, value)
            ctx.scope[sink.port] = value

        swap_instances = ctx.swap_instance_targets()
        for name in stepping:
            unit = ctx.instances[name]
            local = ctx.steps_taken[name] * dt if name in swap_instances else t
            _call(unit, t, unit.do_step, local, dt)
        for name in stepping:
            unit = ctx.instances[name]
            for v in unit.description.outputs:
                ctx.scope[f"{name}.{v.name}"] = _call(unit, t, unit.get_var, v.name)

        for target, st in ctx.swaps.items():
            if st.swap.latched and target not in ctx.swapped_out and target in ctx.instances:
                ctx.instances[target].terminate()
                ctx.swapped_out.add(target)
                ctx.event("terminated", target)

        ctx.iteration += 1
        for name in stepping:
            if name in swap_instances:
                ctx.steps_taken[name] += 1
        entry = StepLog(ctx.global_time, self._row(), ctx.iteration, ctx.offsets)
        self.logs.append(entry)
        if self.sink is not None:
            self.sink.write(entry)
        return entry

    def _row(self) -> dict:
        ctx = self.ctx
        row = {}
        for name in ctx.live():
            key = ctx.keys[name]
            unit = ctx.instances[name]
            for v in unit.description.outputs:
                row[str(PortId(key, name, v.name))] = ctx.scope[f"{name}.{v.name}"]
            if isinstance(unit, FaultInjector):
                for var, value in unit.seen.items():
                    row[str(PortId(key, name, var))] = value
        for target, st in ctx.swaps.items():
            row[f"stepCondition[{target}]"] = st.step.latched
            row[f"swapCondition[{target}]"] = st.swap.latched
        return row

    def run(self) -> SimulationResult:
        try:
            while self.ctx.iteration < self.options.n_steps:
                self.execute_step()
        finally:
            if self.sink is not None:
                self.sink.close()
        return SimulationResult(self.logs, self.columns, self.ctx.events, self.ctx.diagnostics, self.ctx, self.sink)


def run_simulation(cfg: MultiModelConfig, options: RunOptions, sink: Optional[CsvSink] = None,
                   registry: Optional[Registry] = None) -> SimulationResult:
    return Engine(cfg, options, registry, sink).run()
