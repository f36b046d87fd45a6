"""Small feed-forward networks and their compilation to verification queries.

Variable layout of a compiled query (fixed, part of the query file contract):

    inputs | z-vars | f-vars | aux-vars | outputs

where z/f/aux blocks list ReLU nodes in declaration order.  Rows are the
weighted-sum rows of the ReLU nodes, then one row per output, then the
``f - z - aux = 0`` rows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from graphlib import CycleError, TopologicalSorter
from typing import Sequence

from .arith import DimensionError, ParseError, format_rational, to_rational
from .query import ReluConstraint, VerificationQuery

RELU = "relu"
IDENTITY = "id"
ACTIVATIONS = (RELU, IDENTITY)


class NetworkError(ValueError):
    """Structurally invalid network or property."""


class UnsupportedActivation(NetworkError):
    pass


Interval = tuple[Fraction, Fraction]


@dataclass(frozen=True)
class Edge:
    source: str
    weight: Fraction


@dataclass(frozen=True)
class Node:
    id: str
    activation: str
    incoming: tuple[Edge, ...]


@dataclass(frozen=True)
class NetworkGraph:
    inputs: tuple[str, ...]
    nodes: tuple[Node, ...]
    outputs: tuple[str, ...]

    def node(self, name: str) -> Node:
        for nd in self.nodes:
            if nd.id == name:
                return nd
        raise NetworkError(f"unknown node {name!r}")

    def hidden(self) -> list[Node]:
        return [nd for nd in self.nodes if nd.id not in self.outputs]


@dataclass(frozen=True)
class BoundProperty:
    input_bounds: tuple[Interval, ...]
    output_bounds: tuple[Interval, ...]


@dataclass(frozen=True)
class NodeBounds:
    z: Interval
    f: Interval
    aux: Interval | None


def validate_network(net: NetworkGraph) -> list[str]:
    """Return the node ids in a topological order, raising on any defect."""
    if not net.inputs:
        raise NetworkError("network has no inputs")
    if not net.outputs:
        raise NetworkError("network has no outputs")
    names = set(net.inputs)
    if len(names) != len(net.inputs):
        raise NetworkError("duplicate input names")
    for nd in net.nodes:
        if nd.id in names:
            raise NetworkError(f"duplicate node id {nd.id!r}")
        if nd.activation not in ACTIVATIONS:
            raise UnsupportedActivation(f"node {nd.id!r}: unsupported activation {nd.activation!r}")
        names.add(nd.id)
    for out in net.outputs:
        if out in net.inputs or out not in names:
            raise NetworkError(f"output {out!r} is not a declared non-input node")
    sorter = TopologicalSorter()
    for i in net.inputs:
        sorter.add(i)
    for nd in net.nodes:
        if not nd.incoming:
            raise NetworkError(f"node {nd.id!r} has no incoming edges")
        for e in nd.incoming:
            if e.source not in names:
                raise NetworkError(f"node {nd.id!r}: edge from unknown node {e.source!r}")
            if e.source in net.outputs:
                raise NetworkError(f"output {e.source!r} has an outgoing edge to {nd.id!r}")
        sorter.add(nd.id, *(e.source for e in nd.incoming))
    try:
        order = list(sorter.static_order())
    except CycleError as exc:
        raise NetworkError(f"network has a cycle through {exc.args[1]}") from None
    # weak connectivity
    adj: dict[str, set[str]] = {v: set() for v in names}
    for nd in net.nodes:
        for e in nd.incoming:
            adj[nd.id].add(e.source)
            adj[e.source].add(nd.id)
    seen = {net.inputs[0]}
    stack = [net.inputs[0]]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    if seen != names:
        raise NetworkError(f"network is not connected: {sorted(names - seen)} unreachable")
    return [v for v in order if v not in net.inputs]


def _check_property(net: NetworkGraph, prop: BoundProperty) -> None:
    if len(prop.input_bounds) != len(net.inputs):
        raise NetworkError(f"{len(prop.input_bounds)} input bounds for {len(net.inputs)} inputs")
    if len(prop.output_bounds) != len(net.outputs):
        raise NetworkError(f"{len(prop.output_bounds)} output bounds for {len(net.outputs)} outputs")
    for kind, pairs in (("input", prop.input_bounds), ("output", prop.output_bounds)):
        for k, (lo, hi) in enumerate(pairs):
            if lo > hi:
                raise NetworkError(f"{kind} bound {k}: lower {lo} exceeds upper {hi}")


def _relu(x: Fraction) -> Fraction:
    return x if x > 0 else Fraction(0)


def _activate(nd: Node, z):
    return _relu(z) if nd.activation == RELU else z


def eval_trace(net: NetworkGraph, inputs: Sequence) -> dict[str, tuple[Fraction, Fraction]]:
    """Map every node id to its ``(z, f)`` pair; inputs map to ``(x, x)``."""
    if len(inputs) != len(net.inputs):
        raise DimensionError(f"network has {len(net.inputs)} inputs, got {len(inputs)} values")
    order = validate_network(net)
    vals = {name: (Fraction(v), Fraction(v)) for name, v in zip(net.inputs, inputs)}
    by_id = {nd.id: nd for nd in net.nodes}
    for name in order:
        nd = by_id[name]
        z = sum((e.weight * vals[e.source][1] for e in nd.incoming), Fraction(0))
        vals[name] = (z, _activate(nd, z))
    return vals


def eval_network(net: NetworkGraph, inputs: Sequence) -> list[Fraction]:
    trace = eval_trace(net, inputs)
    return [trace[o][1] for o in net.outputs]


def _scale(w: Fraction, iv: Interval) -> Interval:
    lo, hi = w * iv[0], w * iv[1]
    return (lo, hi) if w >= 0 else (hi, lo)


def propagate_bounds(net: NetworkGraph, input_bounds: Sequence[Interval]) -> dict[str, NodeBounds]:
    """Forward interval propagation for every non-input node.

    The aux interval is the clamped naive difference
    ``[max(0, lo_f - hi_z), hi_f - lo_z]``, looser than necessary but what the
    compiled bounds are defined by.  Identity nodes carry their raw z interval
    as f and have no aux.
    """
    if len(input_bounds) != len(net.inputs):
        raise DimensionError(f"network has {len(net.inputs)} inputs, got {len(input_bounds)} bounds")
    order = validate_network(net)
    by_id = {nd.id: nd for nd in net.nodes}
    f_iv: dict[str, Interval] = {}
    for name, (lo, hi) in zip(net.inputs, input_bounds):
        lo, hi = Fraction(lo), Fraction(hi)
        if lo > hi:
            raise NetworkError(f"input {name!r}: lower {lo} exceeds upper {hi}")
        f_iv[name] = (lo, hi)
    out: dict[str, NodeBounds] = {}
    for name in order:
        nd = by_id[name]
        zlo = zhi = Fraction(0)
        for e in nd.incoming:
            lo, hi = _scale(e.weight, f_iv[e.source])
            zlo += lo
            zhi += hi
        if nd.activation == RELU:
            f = (_relu(zlo), _relu(zhi))
            aux = (_relu(f[0] - zhi), f[1] - zlo)
        else:
            f = (zlo, zhi)
            aux = None
        f_iv[name] = f
        out[name] = NodeBounds((zlo, zhi), f, aux)
    return out


@dataclass(frozen=True)
class Layout:
    """Variable indices of a compiled network."""

    inputs: dict[str, int]
    z: dict[str, int]
    f: dict[str, int]
    aux: dict[str, int]
    outputs: dict[str, int]
    names: tuple[str, ...]

    @property
    def n(self) -> int:
        return len(self.names)

    def value_var(self, name: str) -> int:
        """Variable holding the value that ``name`` feeds to its successors."""
        if name in self.inputs:
            return self.inputs[name]
        if name in self.f:
            return self.f[name]
        return self.z[name]


def layout(net: NetworkGraph) -> Layout:
    validate_network(net)
    # hidden identity nodes get a z variable only; their value is x_z
    zs = [nd.id for nd in net.nodes if nd.activation == RELU or nd.id not in net.outputs]
    relus = [nd.id for nd in net.nodes if nd.activation == RELU]
    names: list[str] = list(net.inputs)
    inputs = {v: i for i, v in enumerate(net.inputs)}
    z = {}
    for v in zs:
        z[v] = len(names)
        names.append(f"z({v})")
    f = {}
    for v in relus:
        f[v] = len(names)
        names.append(f"f({v})")
    aux = {}
    for v in relus:
        aux[v] = len(names)
        names.append(f"aux({v})")
    outputs = {}
    for v in net.outputs:
        outputs[v] = len(names)
        names.append(v)
    return Layout(inputs, z, f, aux, outputs, tuple(names))


def compile_query(net: NetworkGraph, prop: BoundProperty) -> VerificationQuery:
    lay = layout(net)
    _check_property(net, prop)
    n = lay.n
    prop_bounds = propagate_bounds(net, prop.input_bounds)
    by_id = {nd.id: nd for nd in net.nodes}

    def weighted_row(nd: Node, target: int) -> list[Fraction]:
        row = [Fraction(0)] * n
        for e in nd.incoming:
            row[lay.value_var(e.source)] += e.weight
        row[target] -= 1
        return row

    rows = []
    for v in lay.z:
        rows.append(weighted_row(by_id[v], lay.z[v]))
    for v in net.outputs:
        nd = by_id[v]
        if nd.activation == RELU:
            row = [Fraction(0)] * n
            row[lay.f[v]] = Fraction(1)
            row[lay.outputs[v]] = Fraction(-1)
            rows.append(row)
        else:
            rows.append(weighted_row(nd, lay.outputs[v]))
    for v in lay.aux:
        row = [Fraction(0)] * n
        row[lay.f[v]] += 1
        row[lay.z[v]] -= 1
        row[lay.aux[v]] -= 1
        rows.append(row)

    lower = [Fraction(0)] * n
    upper = [Fraction(0)] * n
    for k, v in enumerate(net.inputs):
        lower[lay.inputs[v]], upper[lay.inputs[v]] = prop.input_bounds[k]
    for v, i in lay.z.items():
        lower[i], upper[i] = prop_bounds[v].z
    for v, i in lay.f.items():
        lower[i], upper[i] = prop_bounds[v].f
    for v, i in lay.aux.items():
        lower[i], upper[i] = prop_bounds[v].aux
    for k, v in enumerate(net.outputs):
        lower[lay.outputs[v]], upper[lay.outputs[v]] = prop.output_bounds[k]
    constraints = [ReluConstraint(lay.z[v], lay.f[v], lay.aux[v]) for v in lay.aux]
    return VerificationQuery(rows, lower, upper, constraints, lay.names)


def full_assignment(net: NetworkGraph, inputs: Sequence) -> list[Fraction]:
    """The compiled-query assignment induced by running the network on ``inputs``."""
    lay = layout(net)
    trace = eval_trace(net, inputs)
    s = [Fraction(0)] * lay.n
    for v, i in lay.inputs.items():
        s[i] = trace[v][0]
    for v, i in lay.z.items():
        s[i] = trace[v][0]
    for v, i in lay.f.items():
        s[i] = trace[v][1]
    for v, i in lay.aux.items():
        s[i] = trace[v][1] - trace[v][0]
    for v, i in lay.outputs.items():
        s[i] = trace[v][1]
    return s


def check_counterexample(net: NetworkGraph, prop: BoundProperty, inputs: Sequence) -> bool:
    if len(inputs) != len(net.inputs):
        raise DimensionError(f"network has {len(net.inputs)} inputs, got {len(inputs)} values")
    inputs = [Fraction(v) for v in inputs]
    if not all(lo <= x <= hi for x, (lo, hi) in zip(inputs, prop.input_bounds)):
        return False
    ys = eval_network(net, inputs)
    return all(lo <= y <= hi for y, (lo, hi) in zip(ys, prop.output_bounds))


# -- JSON -------------------------------------------------------------------


def network_from_dict(doc: dict) -> NetworkGraph:
    if not isinstance(doc, dict):
        raise ParseError("network document must be a JSON object")
    try:
        nodes = []
        for k, nd in enumerate(doc["nodes"]):
            act = nd.get("activation", IDENTITY)
            if act not in ACTIVATIONS:
                raise UnsupportedActivation(f"nodes[{k}] ({nd.get('id')!r}): unsupported activation {act!r}")
            edges = []
            for j, e in enumerate(nd.get("incoming", [])):
                try:
                    edges.append(Edge(str(e["from"]), to_rational(e["weight"])))
                except ParseError as exc:
                    raise ParseError(f"nodes[{k}].incoming[{j}].weight: {exc}") from None
            nodes.append(Node(str(nd["id"]), act, tuple(edges)))
        return NetworkGraph(tuple(map(str, doc["inputs"])), tuple(nodes), tuple(map(str, doc["outputs"])))
    except (KeyError, TypeError) as exc:
        raise ParseError(f"network document: missing or malformed field {exc}") from None


def network_to_dict(net: NetworkGraph) -> dict:
    return {
        "inputs": list(net.inputs),
        "nodes": [
            {
                "id": nd.id,
                "activation": nd.activation,
                "incoming": [{"from": e.source, "weight": format_rational(e.weight)} for e in nd.incoming],
            }
            for nd in net.nodes
        ],
        "outputs": list(net.outputs),
    }


def _pairs(raw, what: str) -> tuple[Interval, ...]:
    out = []
    for k, pair in enumerate(raw):
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise ParseError(f"{what}[{k}]: expected a [lower, upper] pair")
        try:
            out.append((to_rational(pair[0]), to_rational(pair[1])))
        except ParseError as exc:
            raise ParseError(f"{what}[{k}]: {exc}") from None
    return tuple(out)


def property_from_dict(doc: dict) -> BoundProperty:
    if not isinstance(doc, dict) or "input_bounds" not in doc or "output_bounds" not in doc:
        raise ParseError("property document needs 'input_bounds' and 'output_bounds'")
    return BoundProperty(_pairs(doc["input_bounds"], "input_bounds"), _pairs(doc["output_bounds"], "output_bounds"))


def property_to_dict(prop: BoundProperty) -> dict:
    return {
        "input_bounds": [[format_rational(a), format_rational(b)] for a, b in prop.input_bounds],
        "output_bounds": [[format_rational(a), format_rational(b)] for a, b in prop.output_bounds],
    }


def _loads(text, what):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{what}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def load_network(text: str | bytes) -> NetworkGraph:
    return network_from_dict(_loads(text, "network"))


def load_property(text: str | bytes) -> BoundProperty:
    return property_from_dict(_loads(text, "property"))
