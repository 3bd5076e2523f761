import itertools
import math

import pytest

from cosim_swap.units import (
    Broker,
    Controller,
    FaultInjector,
    FaultRule,
    LeakController,
    LeakDetector,
    LifecycleError,
    Passthrough,
    Registry,
    SharedFeed,
    SineSource,
    UnitError,
    WaterTank,
    model_basename,
)
from cosim_swap.valuetypes import ValueTypeError


def ready(unit, **values):
    for k, v in values.items():
        unit.set_var(k, v)
    unit.enter_initialization()
    unit.exit_initialization()
    return unit


# --- lifecycle ---------------------------------------------------------------

# expected legality, written out independently of the implementation
LEGAL = {
    "set_param": {"I"},
    "set_input": {"I", "N", "S"},
    "set_output": {"I", "N"},
    "get": {"N", "S"},
    "enter": {"I"},
    "exit": {"N"},
    "step": {"S"},
    "terminate": {"I", "N", "S"},
}
NEXT = {"enter": "N", "exit": "S", "terminate": "T"}

OPS = {
    "set_param": lambda u: u.set_var("q_in", 0.2),
    "set_input": lambda u: u.set_var("valvecontrol", 1.0),
    "set_output": lambda u: u.set_var("level", 1.5),
    "get": lambda u: u.get_var("level"),
    "enter": lambda u: u.enter_initialization(),
    "exit": lambda u: u.exit_initialization(),
    "step": lambda u: u.do_step(u.time, 0.1),
    "terminate": lambda u: u.terminate(),
}

STATE_NAMES = {"I": "INSTANTIATED", "N": "INITIALIZATION", "S": "STEPPING", "T": "TERMINATED"}


def test_lifecycle_exhaustive():
    checked = 0
    for length in range(1, 5):
        for seq in itertools.product(OPS, repeat=length):
            unit = WaterTank("tank")
            state = "I"
            for op in seq:
                if state in LEGAL[op]:
                    OPS[op](unit)
                    state = NEXT.get(op, state)
                else:
                    with pytest.raises(LifecycleError):
                        OPS[op](unit)
                assert unit.state == STATE_NAMES[state], seq
                checked += 1
    assert checked > 4000


def test_start_value_readback():
    tank = WaterTank("tank")
    tank.set_var("level", 1.0)
    tank.enter_initialization()
    assert tank.get_var("level") == 1.0


def test_explicit_start_level_overrides_l0():
    tank = WaterTank("tank")
    tank.set_var("l0", 0.5)
    tank.set_var("level", 1.25)
    tank.enter_initialization()
    tank.exit_initialization()
    assert tank.get_var("level") == 1.25
    assert ready(WaterTank("t2"), l0=0.5).get_var("level") == 0.5


def test_nonpositive_step():
    tank = ready(WaterTank("tank"))
    with pytest.raises(UnitError, match="nonpositive step"):
        tank.do_step(0.0, 0.0)
    with pytest.raises(UnitError, match="nonpositive step"):
        tank.do_step(0.0, -0.1)


def test_unknown_variable():
    tank = ready(WaterTank("tank"))
    with pytest.raises(UnitError, match="unknown variable"):
        tank.get_var("nosuch")
    with pytest.raises(UnitError, match="unknown variable"):
        tank.set_var("nosuch", 1.0)


def test_type_mismatch():
    tank = WaterTank("tank")
    with pytest.raises(ValueTypeError, match="type mismatch"):
        tank.set_var("valvecontrol", True)
    det = LeakDetector("d")
    with pytest.raises(ValueTypeError):
        det.set_var("threshold", 2.0)
    tank.set_var("valvecontrol", 1)  # integer literal into a real is fine
    assert isinstance(tank["valvecontrol"], float)


def test_do_step_advances_time_exactly():
    tank = ready(WaterTank("tank"))
    tank.do_step(0.0, 0.25)
    assert tank.time == 0.25


# --- tank ----------------------------------------------------------------------

@pytest.mark.parametrize(
    "level, valve, want",
    [(1.0, 0.0, 1.0 + 0.1 * 0.1), (1.0, 1.0, 1.0 + 0.1 * (0.1 - 0.3)), (0.0, 1.0, 0.0)],
)
def test_tank_euler(level, valve, want):
    tank = ready(WaterTank("tank"), l0=level)
    tank.set_var("valvecontrol", valve)
    tank.do_step(0.0, 0.1)
    assert tank.get_var("level") == pytest.approx(want, abs=1e-15)


@pytest.mark.parametrize("valve", [0.0, 1.0])
def test_tank_mass_balance(valve):
    l0, dt, n = 1.3, 0.1, 37
    tank = ready(WaterTank("tank"), l0=l0, valvecontrol=valve)
    for k in range(n):
        tank.do_step(k * dt, dt)
    want = max(0.0, l0 + n * dt * (0.1 - valve * 0.3))
    assert abs(tank.get_var("level") - want) < 1e-12


def test_tank_rejects_nonpositive_rates():
    tank = WaterTank("tank")
    tank.set_var("q_out", 0.0)
    tank.enter_initialization()
    with pytest.raises(UnitError):
        tank.exit_initialization()


# --- controllers -----------------------------------------------------------

def controller_trace(unit, levels):
    out = []
    for k, lv in enumerate(levels):
        unit.set_var("level", lv)
        unit.do_step(k * 0.1, 0.1)
        out.append(unit.get_var("valve"))
    return out


def test_controller_examples():
    c = ready(Controller("c"), minLevel=1, maxLevel=2)
    assert controller_trace(c, [2.0]) == [1.0]
    assert controller_trace(c, [1.5]) == [1.0]  # hold
    assert controller_trace(c, [1.0]) == [0.0]
    assert controller_trace(c, [1.5]) == [0.0]


def test_controller_initial_valve_closed():
    assert ready(Controller("c")).get_var("valve") == 0.0


def test_controller_threshold_tolerance():
    # Euler accumulation can land a hair below the threshold
    level = 0.7 + 0.6 + 0.7
    assert level < 2.0
    assert 2.0 - level < 1e-9
    assert controller_trace(ready(Controller("c")), [level]) == [1.0]


def test_controller_rejects_inverted_band():
    c = Controller("c")
    c.set_var("minLevel", 2.0)
    c.set_var("maxLevel", 2.0)
    c.enter_initialization()
    with pytest.raises(UnitError, match="minLevel"):
        c.exit_initialization()


def test_leak_controller_without_leak_matches_controller():
    levels = [1.0, 1.4, 1.9, 2.0, 2.05, 1.7, 1.2, 1.0, 0.9, 1.3, 2.1, 1.6]
    a = controller_trace(ready(Controller("c")), levels)
    b = controller_trace(ready(LeakController("l")), levels)
    assert a == b


def test_leak_controller_lowers_max_once():
    lc = ready(LeakController("l"), maxLevel=2.0, leakDelta=0.5)
    lc.set_var("leak", True)
    assert controller_trace(lc, [1.5]) == [1.0]
    assert lc.effective_max == 1.5
    lc.set_var("leak", False)
    assert controller_trace(lc, [1.0, 1.49, 1.5]) == [0.0, 0.0, 1.0]
    lc.set_var("leak", True)
    controller_trace(lc, [1.2])
    assert lc.effective_max == 1.5  # one-shot


def test_leak_controller_preconditions():
    lc = LeakController("l")
    lc.set_var("minLevel", 1.6)
    lc.enter_initialization()
    with pytest.raises(UnitError):
        lc.exit_initialization()


# --- leak detector -----------------------------------------------------------

def detector_trace(levels, valves):
    d = ready(LeakDetector("d"))
    out = []
    for k, (lv, v) in enumerate(zip(levels, valves)):
        d.set_var("level", lv)
        d.set_var("valve", v)
        d.do_step(k * 0.1, 0.1)
        out.append(d.get_var("leak"))
    return out


def test_detector_three_decreases():
    assert detector_trace([1.6, 1.58, 1.56, 1.54], [0.0] * 4) == [False, False, False, True]


def test_detector_open_valve_excluded():
    assert not any(detector_trace([1.6, 1.58, 1.56, 1.54, 1.52], [1.0] * 5))


def test_detector_flat_step_resets():
    assert detector_trace([1.6, 1.58, 1.58, 1.56], [0.0] * 4) == [False] * 4


def test_detector_latches():
    out = detector_trace([1.6, 1.58, 1.56, 1.54, 1.6, 1.7], [0.0] * 4 + [1.0] * 2)
    assert out[3:] == [True, True, True]


# --- sine ------------------------------------------------------------------------

@pytest.mark.parametrize(
    "t, amplitude, period, want",
    [(0.0, 1.0, 1.0, 0.0), (0.25, 1.0, 1.0, 1.0), (0.3, 1.0, 2.0, 0.809017)],
)
def test_sine(t, amplitude, period, want):
    s = SineSource("s")
    s.set_var("amplitude", amplitude)
    s.set_var("period", period)
    s.enter_initialization(t)
    assert s.get_var("angle") == pytest.approx(want, abs=1e-6)


def test_sine_after_step_uses_new_time():
    s = ready(SineSource("s"), period=2.0)
    s.do_step(0.0, 0.3)
    assert s.get_var("angle") == pytest.approx(math.sin(0.3 * math.pi), abs=1e-15)


def test_passthrough():
    p = ready(Passthrough("p"), u=0.7)
    assert p.get_var("y") == 0.7
    p.set_var("u", 1.5)
    p.do_step(0.0, 0.1)
    assert p.get_var("y") == 1.5


# --- broker ------------------------------------------------------------------

def broker(feed, name="rmq", **params):
    return ready(Broker(name, feed), **params)


def test_broker_pass_through():
    b = broker(SharedFeed([(0.0, 0.0), (0.1, 0.05)]))
    out = []
    for k in range(2):
        b.do_step(k * 0.1, 0.1)
        out.append(b.get_var("angle"))
    assert out == [0.0, 0.05]


def test_broker_backlog_offset():
    feed = SharedFeed((i / 10, float(i)) for i in range(200))
    old = broker(feed, "rmq", prefetch_count=50)
    for k in range(50):
        old.do_step(k * 0.1, 0.1)
    new = broker(feed, "rmq2")
    new.do_step(0.0, 0.1)
    old.do_step(5.0, 0.1)
    # old broker is still working through its queue; new one starts at the cursor
    assert new.get_var("timestamp") - old.get_var("timestamp") == pytest.approx(5.0, abs=1e-9)
    assert old.snapshot()["queue"][0][0] == pytest.approx(5.1)


def test_broker_maxage():
    b = broker(SharedFeed([(0.0, 1.0), (5.0, 2.0)]), maxage=0.2)
    valid = []
    for k in range(4):
        b.do_step(k * 0.1, 0.1)
        valid.append(b.get_var("valid"))
    # ages 0.0, 0.1, 0.2, 0.3
    assert valid == [True, True, True, False]


def test_brokers_never_share_a_message():
    feed = SharedFeed((i / 10, float(i)) for i in range(120))
    a = broker(feed, "a", prefetch_count=7)
    b = broker(feed, "b", prefetch_count=3)
    for k in range(60):
        a.do_step(k * 0.1, 0.1)
        b.do_step(k * 0.1, 0.1)
    idx = [i for _, i in feed.delivered]
    assert len(idx) == len(set(idx))
    for unit in (a, b):
        ts = [t for t, _ in unit.snapshot()["emitted"]]
        assert ts == sorted(ts)


def test_broker_requeues_on_terminate():
    feed = SharedFeed((i / 10, float(i)) for i in range(20))
    a = broker(feed, "a", prefetch_count=5)
    a.do_step(0.0, 0.1)
    a.terminate()
    assert feed.cursor == 1


def test_feed_must_increase():
    with pytest.raises(ValueError):
        SharedFeed([(0.0, 1.0), (0.0, 2.0)])


# --- fault injection ---------------------------------------------------------

def tank_with_fault(transform="alternate01", trigger="(tank.level >= 1.6)", l0=1.55):
    rule = FaultRule("tank", "valvecontrol", "input", trigger, transform)
    unit = FaultInjector(WaterTank("tank"), [rule])
    unit.set_var("l0", l0)
    unit.enter_initialization()
    unit.exit_initialization()
    return unit


def test_fault_inactive_is_identity():
    unit = tank_with_fault()
    unit.set_var("valvecontrol", 1.0)
    unit.do_step(0.0, 0.1)
    assert unit.seen["valvecontrol"] == 1.0
    assert unit.get_var("level") == pytest.approx(1.53)


def test_fault_alternates_after_trigger():
    unit = tank_with_fault(l0=1.6)
    delivered = []
    for k in range(5):
        unit.set_var("valvecontrol", 0.0)
        unit.do_step(k * 0.1, 0.1)
        delivered.append(unit.seen["valvecontrol"])
    assert delivered == [1.0, 0.0, 1.0, 0.0, 1.0]


def test_fault_constant_on_boolean_output():
    rule = FaultRule("d", "leak", "output", "(true)", {"constant": 0})
    d = FaultInjector(LeakDetector("d"), [rule])
    ready(d)
    for k, lv in enumerate([1.6, 1.58, 1.56, 1.54, 1.52]):
        d.set_var("level", lv)
        d.do_step(k * 0.1, 0.1)
        assert d.get_var("leak") is False
    assert d.target.get_var("leak") is True  # the wrapped unit did detect


def test_fault_rule_errors():
    with pytest.raises(UnitError, match="unknown variable"):
        FaultInjector(WaterTank("tank"), [FaultRule("tank", "nosuch", "input", "(true)", "alternate01")])
    with pytest.raises(UnitError, match="not output"):
        FaultInjector(WaterTank("tank"), [FaultRule("tank", "valvecontrol", "output", "(true)", "alternate01")])
    with pytest.raises(ValueError):
        FaultRule.from_dict({"instance": "t", "variable": "v", "direction": "sideways", "trigger": "(true)",
                             "transform": "alternate01"})


def test_fault_trigger_sees_time():
    unit = tank_with_fault(trigger="(tank.time >= 0.3)", l0=1.0)
    seen = []
    for k in range(5):
        unit.set_var("valvecontrol", 0.0)
        unit.do_step(k * 0.1, 0.1)
        seen.append(unit.seen["valvecontrol"])
    # unit time before the step: 0.0, 0.1, 0.2, 0.30000000000000004, 0.4
    assert seen == [0.0, 0.0, 0.0, 1.0, 0.0]


# --- registry ------------------------------------------------------------------

def test_registry_names_and_aliases():
    reg = Registry()
    assert model_basename("models/singlewatertank-20sim.fmu") == "singlewatertank-20sim"
    assert isinstance(reg.create("singlewatertank-20sim.fmu", "t"), WaterTank)
    assert isinstance(reg.create("tank", "t"), WaterTank)
    assert reg.description("watertankcontroller-c.fmu").model_name == "watertankcontroller-c"
    assert "nosuch" not in reg
    with pytest.raises(UnitError, match="unknown model nosuch"):
        reg.create("nosuch.fmu", "x")


def test_sandbox_leaves_feed_alone():
    reg = Registry(SharedFeed((i / 10, 0.0) for i in range(10)))
    b = reg.sandbox().create("rmqfmu", "rmq")
    ready(b, prefetch_count=4)
    assert reg.feed.cursor == 0
