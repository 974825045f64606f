"""In-memory labeled property graph and conjunctive pattern matching.

``build_graph`` materializes a validated scenario as a graph: declarations
become nodes, and every stated fact is reified as a property node — facts
between two named things get an incoming SOURCE edge from their subject and
an outgoing TARGET edge to their object; facts with a literal value hang off
their subject with a SOURCE edge and keep the value as a node attribute.

``match_pattern`` evaluates conjunctive patterns (node label + attribute
equality constraints plus edge constraints) under homomorphism semantics:
two pattern variables may bind the same node.  Results come back in a
deterministic order so downstream emission is byte-stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .scenario import ScenarioDocument

OFFERS = "OFFERS"
TRIGGERS = "TRIGGERS"
NEXT = "NEXT"
HAS_STEP = "HAS_STEP"
SOURCE = "SOURCE"
TARGET = "TARGET"
HOLDS_AT = "HOLDS_AT"


@dataclass
class GraphNode:
    id: int
    label: str
    attrs: dict[str, str]


@dataclass(frozen=True)
class GraphEdge:
    src: int
    label: str
    dst: int


class PropertyGraph:
    """Nodes, edges and the indexes the matcher needs.

    Treat instances as immutable once construction finishes; derivation
    stages that need to extend a graph work on a copy.
    """

    def __init__(self) -> None:
        self.nodes: dict[int, GraphNode] = {}
        self.edges: list[GraphEdge] = []
        self._by_label: dict[str, list[int]] = {}
        self._by_name: dict[tuple[str, str], int] = {}
        self._edge_set: set[tuple[int, str, int]] = set()
        self._out: dict[tuple[int, str], list[int]] = {}
        self._in: dict[tuple[int, str], list[int]] = {}

    def add_node(self, node_label: str, **attrs: str) -> int:
        node_id = len(self.nodes)
        self.nodes[node_id] = GraphNode(node_id, node_label, dict(attrs))
        self._by_label.setdefault(node_label, []).append(node_id)
        name = attrs.get("name")
        if name is not None:
            self._by_name[(node_label, name)] = node_id
        return node_id

    def add_edge(self, src: int, label: str, dst: int) -> None:
        if src not in self.nodes or dst not in self.nodes:
            raise KeyError(f"edge endpoint missing: {src}-[{label}]->{dst}")
        key = (src, label, dst)
        if key in self._edge_set:
            return
        self._edge_set.add(key)
        self.edges.append(GraphEdge(src, label, dst))
        self._out.setdefault((src, label), []).append(dst)
        self._in.setdefault((dst, label), []).append(src)

    def has_edge(self, src: int, label: str, dst: int) -> bool:
        return (src, label, dst) in self._edge_set

    def nodes_with_label(self, label: str) -> list[int]:
        return list(self._by_label.get(label, []))

    def find(self, label: str, name: str) -> int | None:
        return self._by_name.get((label, name))

    def out(self, src: int, label: str) -> list[int]:
        return list(self._out.get((src, label), []))

    def into(self, dst: int, label: str) -> list[int]:
        return list(self._in.get((dst, label), []))

    def display(self, node_id: int) -> str:
        """Short human-readable handle for a node (used in traces and dot)."""
        node = self.nodes[node_id]
        for key in ("name", "label"):
            if key in node.attrs:
                return node.attrs[key]
        if "position" in node.attrs:
            return f"state{node.attrs['position']}"
        return str(node_id)

    def copy(self) -> "PropertyGraph":
        dup = PropertyGraph()
        for node in self.nodes.values():
            dup.nodes[node.id] = GraphNode(node.id, node.label, dict(node.attrs))
            dup._by_label.setdefault(node.label, []).append(node.id)
            name = node.attrs.get("name")
            if name is not None:
                dup._by_name[(node.label, name)] = node.id
        for edge in self.edges:
            dup.add_edge(edge.src, edge.label, edge.dst)
        return dup


# ---------------------------------------------------------------------------
# construction


def build_graph(doc: ScenarioDocument) -> PropertyGraph:
    """Materialize a validated document as a property graph.

    Node ids are dense integers handed out in declaration order (agents,
    resources, functionalities, transitions, the attack path, then one
    property node per distinct top-level fact), so identical documents
    always produce identical graphs.
    """
    g = PropertyGraph()
    for a in doc.agents:
        g.add_node("agent", name=a.name)
    for r in doc.resources:
        g.add_node("resource", name=r.name, resource_type=r.kind)
    for f in doc.functionalities:
        g.add_node("functionality", name=f.name)
    for t in doc.transitions:
        g.add_node("transition", name=t.name, trigger=t.trigger, description=t.description)
    path_id = g.add_node("attack_path", name=doc.name, goal=doc.goal)

    for f in doc.functionalities:
        offerer = _named(g, f.offered_by)
        g.add_edge(offerer, OFFERS, g.find("functionality", f.name))  # type: ignore[arg-type]
    for t in doc.transitions:
        tr_id = g.find("transition", t.name)
        g.add_edge(_named(g, t.agent), TRIGGERS, tr_id)  # type: ignore[arg-type]
        g.add_edge(path_id, HAS_STEP, tr_id)  # type: ignore[arg-type]
    ordered = [g.find("transition", n) for n in doc.path_order]
    for prev, nxt in zip(ordered, ordered[1:]):
        g.add_edge(prev, NEXT, nxt)  # type: ignore[arg-type]

    seen: set[tuple[str, str, str, bool]] = set()
    for fact in doc.facts:
        if fact.key() in seen:
            continue
        seen.add(fact.key())
        add_fact_node(g, fact.subject, fact.label, fact.object, fact.is_literal)
    return g


def _named(g: PropertyGraph, name: str) -> int:
    for label in ("agent", "resource", "functionality", "transition"):
        node_id = g.find(label, name)
        if node_id is not None:
            return node_id
    raise KeyError(f"no node named {name!r}")


def named_node(g: PropertyGraph, name: str) -> int:
    """Resolve a declared name to its node id (agents, resources, ...)."""
    return _named(g, name)


def add_fact_node(
    g: PropertyGraph, subject: str, label: str, obj: str, is_literal: bool
) -> int:
    """Reify one fact; returns the property node id."""
    subject_id = _named(g, subject)
    if is_literal:
        prop = g.add_node("property_resource", label=label, value=obj)
        g.add_edge(subject_id, SOURCE, prop)
    else:
        prop = g.add_node("property_betweenresources", label=label)
        g.add_edge(subject_id, SOURCE, prop)
        g.add_edge(prop, TARGET, _named(g, obj))
    return prop


# ---------------------------------------------------------------------------
# pattern matching


@dataclass(frozen=True)
class PatternNode:
    var: str
    label: str | None = None
    attrs: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class PatternEdge:
    src: str
    label: str
    dst: str


@dataclass(frozen=True)
class Pattern:
    nodes: tuple[PatternNode, ...]
    edges: tuple[PatternEdge, ...] = ()

    def __post_init__(self) -> None:
        declared = [n.var for n in self.nodes]
        if len(set(declared)) != len(declared):
            raise ValueError("pattern variables must be unique")
        for e in self.edges:
            if e.src not in declared or e.dst not in declared:
                raise ValueError(f"pattern edge references undeclared variable {e.src}->{e.dst}")


def node_constraint(var: str, node_label: str | None = None, **attrs: str) -> PatternNode:
    return PatternNode(var, node_label, tuple(sorted(attrs.items())))


def _satisfies(g: PropertyGraph, node_id: int, constraint: PatternNode) -> bool:
    node = g.nodes[node_id]
    if constraint.label is not None and node.label != constraint.label:
        return False
    for key, value in constraint.attrs:
        if node.attrs.get(key) != value:
            return False
    return True


def match_pattern(g: PropertyGraph, pattern: Pattern) -> list[dict[str, int]]:
    """All total assignments satisfying the pattern, lexicographically ordered
    by bound node ids in variable declaration order.  Homomorphism semantics:
    distinct variables may bind the same node.
    """
    variables = [n.var for n in pattern.nodes]
    constraints = {n.var: n for n in pattern.nodes}

    # candidates per variable, ascending ids for deterministic output order
    candidates: dict[str, list[int]] = {}
    for var in variables:
        c = constraints[var]
        pool = g.nodes_with_label(c.label) if c.label is not None else list(g.nodes)
        candidates[var] = sorted(n for n in pool if _satisfies(g, n, c))

    # edges become checkable once both endpoints are bound
    check_after: dict[str, list[PatternEdge]] = {v: [] for v in variables}
    position = {v: i for i, v in enumerate(variables)}
    for e in pattern.edges:
        later = e.src if position[e.src] >= position[e.dst] else e.dst
        check_after[later].append(e)

    results: list[dict[str, int]] = []
    binding: dict[str, int] = {}

    def extend(index: int) -> None:
        if index == len(variables):
            results.append(dict(binding))
            return
        var = variables[index]
        for node_id in candidates[var]:
            binding[var] = node_id
            if all(
                g.has_edge(binding[e.src], e.label, binding[e.dst])
                for e in check_after[var]
            ):
                extend(index + 1)
            del binding[var]

    extend(0)
    return results


# ---------------------------------------------------------------------------
# export


def export_graph(g: PropertyGraph, format: str) -> str:
    if format == "json":
        payload = {
            "nodes": [
                {"id": n.id, "label": n.label, "attrs": dict(sorted(n.attrs.items()))}
                for n in sorted(g.nodes.values(), key=lambda n: n.id)
            ],
            "edges": [
                {"src": e.src, "label": e.label, "dst": e.dst}
                for e in sorted(g.edges, key=lambda e: (e.src, e.label, e.dst))
            ],
        }
        return json.dumps(payload, indent=2) + "\n"
    if format == "dot":
        lines = ["digraph attackforge {"]
        for n in sorted(g.nodes.values(), key=lambda n: n.id):
            text = f"{g.display(n.id)}:{n.label}".replace("\\", "\\\\").replace('"', '\\"')
            lines.append(f'  n{n.id} [label="{text}"];')
        for e in sorted(g.edges, key=lambda e: (e.src, e.label, e.dst)):
            lines.append(f'  n{e.src} -> n{e.dst} [label="{e.label}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown export format {format!r}")


def graph_from_json(text: str) -> PropertyGraph:
    """Read a graph back from its json export (ids are preserved)."""
    payload = json.loads(text)
    g = PropertyGraph()
    for entry in sorted(payload["nodes"], key=lambda n: n["id"]):
        node_id = g.add_node(entry["label"], **entry["attrs"])
        if node_id != entry["id"]:
            raise ValueError("graph json must use dense ids in order")
    for entry in payload["edges"]:
        g.add_edge(entry["src"], entry["label"], entry["dst"])
    return g
