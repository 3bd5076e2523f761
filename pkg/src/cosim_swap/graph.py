"""Port dependency graph: initialization order and algebraic-loop detection."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .config import MultiModelConfig, PortId, instance_descriptions
from .units.base import INPUT, OUTPUT


class LoopError(RuntimeError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("algebraic loop: " + " -> ".join(p.port for p in self.cycle))


@dataclass
class DependencyGraph:
    nodes: dict = field(default_factory=dict)  # PortId -> "input" | "output"
    edges: set = field(default_factory=set)  # (PortId, PortId)

    def successors(self, node):
        return sorted(v for u, v in self.edges if u == node)

    def predecessors(self, node):
        return sorted(u for u, v in self.edges if v == node)

    def sorted_edges(self):
        return sorted(self.edges, key=lambda e: (str(e[0]), str(e[1])))


def build_port_graph(cfg: MultiModelConfig, registry) -> DependencyGraph:
    """Nodes are the input and output ports of every instance.

    Edges: every connection and swap connection, plus input -> output
    inside an instance for each output flagged ``direct_feedthrough``.
    """
    g = DependencyGraph()
    instances = cfg.instances()
    descs = instance_descriptions(cfg, registry)
    for name, key in instances.items():
        desc = descs[name]
        if desc is None:
            continue
        ins = [PortId(key, name, v.name) for v in desc.inputs]
        outs = [v for v in desc.outputs]
        for p in ins:
            g.nodes[p] = INPUT
        for v in outs:
            p = PortId(key, name, v.name)
            g.nodes[p] = OUTPUT
            if v.direct_feedthrough:
                for i in ins:
                    g.edges.add((i, p))
    for src, sink, _ in cfg.all_routes():
        g.nodes.setdefault(src, OUTPUT)
        g.nodes.setdefault(sink, INPUT)
        g.edges.add((src, sink))
    return g


def prune_transfer_edges(g: DependencyGraph, transfers) -> DependencyGraph:
    """Drop every edge that ends in a transferred instance (its inputs are already live)."""
    transfers = set(transfers)
    kept = {(u, v) for u, v in g.edges if v.instance_name not in transfers}
    return DependencyGraph(dict(g.nodes), kept)


def initialization_order(g: DependencyGraph) -> list[PortId]:
    """Kahn's algorithm; ties broken by the serialised port id."""
    indeg = {n: 0 for n in g.nodes}
    succ = {n: [] for n in g.nodes}
    for u, v in g.edges:
        indeg[v] += 1
        succ[u].append(v)
    heap = [(str(n), n) for n, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        _, n = heapq.heappop(heap)
        order.append(n)
        for m in succ[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                heapq.heappush(heap, (str(m), m))
    if len(order) < len(g.nodes):
        left = {n for n, d in indeg.items() if d > 0}
        raise LoopError(_witness(g, left))
    return order


def _witness(g: DependencyGraph, left: set) -> list[PortId]:
    # every leftover node has a leftover predecessor, so walking backwards
    # must revisit a node; the revisited stretch is a cycle
    preds = {n: [] for n in left}
    for u, v in g.edges:
        if u in left and v in left:
            preds[v].append(u)
    node = min(left, key=str)
    path, seen = [], {}
    while node not in seen:
        seen[node] = len(path)
        path.append(node)
        node = min(preds[node], key=str)
    cycle = path[seen[node]:]
    cycle.reverse()  # forward edge direction
    outputs = [p for p in cycle if g.nodes.get(p) == OUTPUT] or cycle
    start = cycle.index(min(outputs, key=str))
    return cycle[start:] + cycle[:start]
