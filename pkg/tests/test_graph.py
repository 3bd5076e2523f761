import json

import pytest

from cosim_swap.config import PortId, config_from_dict, parse_multi_model
from cosim_swap.graph import (
    DependencyGraph,
    LoopError,
    build_port_graph,
    initialization_order,
    prune_transfer_edges,
)
from cosim_swap.scenarios import WATERTANK_SWAP
from cosim_swap.units import Registry


def ports(seq):
    return [p.port for p in seq]


def edge_names(g):
    return {(u.port, v.port) for u, v in g.edges}


def leak_swap_graph():
    cfg = config_from_dict(WATERTANK_SWAP)
    return cfg, build_port_graph(cfg, Registry())


def test_leak_swap_edges():
    _, g = leak_swap_graph()
    assert edge_names(g) == {
        ("controller.level", "controller.valve"),
        ("controller.valve", "tank.valvecontrol"),
        ("controller.valve", "leak_detector.valve"),
        ("tank.level", "controller.level"),
        ("tank.level", "leak_detector.level"),
        ("tank.level", "leak_controller.level"),
        ("leak_detector.leak", "leak_controller.leak"),
        ("leak_controller.leak", "leak_controller.valve"),
        ("leak_controller.level", "leak_controller.valve"),
        ("leak_controller.valve", "tank.valvecontrol"),
        ("leak_controller.valve", "leak_detector.valve"),
    }
    # the tank level is a state, so valvecontrol does not feed it directly
    assert ("tank.valvecontrol", "tank.level") not in edge_names(g)


def test_leak_swap_pruned_graph_only_reaches_fresh_instances():
    cfg, g = leak_swap_graph()
    pruned = prune_transfer_edges(g, cfg.model_transfers)
    assert {v.instance_name for _, v in pruned.edges} == {"leak_detector", "leak_controller"}
    order = ports(initialization_order(pruned))
    assert order.index("tank.level") < order.index("leak_controller.level")
    assert order.index("leak_controller.valve") < order.index("leak_detector.valve")
    assert order.index("leak_detector.leak") < order.index("leak_controller.leak")


def test_empty_graph():
    assert initialization_order(DependencyGraph()) == []
    cfg = parse_multi_model('{"fmus":{},"connections":{}}')
    assert initialization_order(build_port_graph(cfg, Registry())) == []


def two_passthrough_loop():
    return {
        "fmus": {"{a}": "passthrough", "{b}": "passthrough"},
        "connections": {"{a}.a.y": ["{b}.b.u"], "{b}.b.y": ["{a}.a.u"]},
    }


def test_two_unit_cycle_witness():
    g = build_port_graph(config_from_dict(two_passthrough_loop()), Registry())
    with pytest.raises(LoopError) as err:
        initialization_order(g)
    assert ports(err.value.cycle) == ["a.y", "b.u", "b.y", "a.u"]
    assert str(err.value) == "algebraic loop: a.y -> b.u -> b.y -> a.u"


def test_loop_through_stateful_unit_is_fine():
    doc = {
        "fmus": {"{t}": "tank", "{c}": "watertankcontroller-c"},
        "connections": {"{t}.t.level": ["{c}.c.level"], "{c}.c.valve": ["{t}.t.valvecontrol"]},
    }
    order = ports(initialization_order(build_port_graph(config_from_dict(doc), Registry())))
    assert order == ["t.level", "c.level", "c.valve", "t.valvecontrol"]


def test_chain_order():
    doc = {
        "fmus": {"{a}": "passthrough", "{b}": "passthrough", "{c}": "passthrough"},
        "connections": {"{b}.b.y": ["{c}.c.u"], "{a}.a.y": ["{b}.b.u"]},
    }
    order = ports(initialization_order(build_port_graph(config_from_dict(doc), Registry())))
    assert order == ["a.u", "a.y", "b.u", "b.y", "c.u", "c.y"]


def test_edgeless_order_is_lexicographic():
    nodes = {PortId(k, k, v): "output" for k in "cab" for v in ("z", "m")}
    order = initialization_order(DependencyGraph(nodes, set()))
    assert [str(p) for p in order] == sorted(str(p) for p in nodes)


def test_serialised_graph_is_stable():
    a = json.dumps(sorted(edge_names(leak_swap_graph()[1])))
    b = json.dumps(sorted(edge_names(leak_swap_graph()[1])))
    assert a == b
