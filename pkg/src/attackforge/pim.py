"""Service-template generation: the platform-independent model.

The generator applies a fixed catalog of twelve transformation rules to the
annotated knowledge graph.  Topology rules read the initial state (rules
R1-R3 and R11-R12 anchor on position 0); workflow rules R4-R7 project the
transition chain; target rules R8-R10 evaluate three inference hypotheses
per step, in fixed precedence, against the state preceding the step:

  iao           the trigger functionality is offered by software installed
                on a host the agent is perceived as administrator of;
  extended iao  the software sits on a remote host the agent controls, and
                the operation is launched from the agent's home host;
  ig            the functionality is granted to the agent through an
                interface accessible from a host the agent administers.

Every rule application can be recorded in a trace for audit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .context import StateChain
from .diagnostics import Diagnostic, PipelineError, error, warning
from .graph import (
    HOLDS_AT,
    NEXT,
    OFFERS,
    SOURCE,
    TARGET,
    Pattern,
    PatternEdge,
    PropertyGraph,
    match_pattern,
    node_constraint,
)
from .yamlwriter import FlowList, YMap, YSeq, render_document

DEFINITIONS_VERSION = "tosca_simple_yaml_1_3"
INTERFACE_TYPE = "AttackTransitions"
INTERFACE_ROOT = "tosca.interfaces.Root"
HOST_TYPE = "HostSystem"
COMPUTE_BASE = "Compute"
ACTION_SLOT = "action"
WORKFLOW_NAME = "AbstractScript"


# ---------------------------------------------------------------------------
# template model


@dataclass
class InterfaceType:
    name: str
    derived_from: str
    operations: dict[str, str] = field(default_factory=dict)  # name -> description


@dataclass
class NodeType:
    name: str
    derived_from: str
    interfaces: dict[str, str] = field(default_factory=dict)  # slot -> interface type


@dataclass
class Requirement:
    kind: str  # link | binding | host
    target: str


@dataclass
class NodeTemplate:
    name: str
    type: str
    properties: dict[str, str] = field(default_factory=dict)
    requirements: list[Requirement] = field(default_factory=list)


@dataclass
class WorkflowStep:
    name: str
    activities: list[str] = field(default_factory=list)  # operation refs like action.scans
    on_success: list[str] = field(default_factory=list)
    target: str | None = None


@dataclass
class Workflow:
    name: str
    description: str
    steps: dict[str, WorkflowStep] = field(default_factory=dict)


@dataclass
class ServiceTemplate:
    definitions_version: str
    interface_types: dict[str, InterfaceType] = field(default_factory=dict)
    node_types: dict[str, NodeType] = field(default_factory=dict)
    node_templates: dict[str, NodeTemplate] = field(default_factory=dict)
    workflows: dict[str, Workflow] = field(default_factory=dict)


@dataclass
class RuleApplication:
    rule: str
    binding: dict[str, str]
    element: str
    hypothesis: str | None = None


def init_template() -> ServiceTemplate:
    """The invariant preamble every generated template starts from."""
    tpl = ServiceTemplate(definitions_version=DEFINITIONS_VERSION)
    tpl.interface_types[INTERFACE_TYPE] = InterfaceType(INTERFACE_TYPE, INTERFACE_ROOT)
    tpl.node_types[HOST_TYPE] = NodeType(
        HOST_TYPE, COMPUTE_BASE, interfaces={ACTION_SLOT: INTERFACE_TYPE}
    )
    return tpl


# ---------------------------------------------------------------------------
# rule patterns


def _typed_resources_pattern(resource_type: str) -> Pattern:
    return Pattern(
        nodes=(node_constraint("n", "resource", context="true", resource_type=resource_type),)
    )


def _connection_pattern(typed: bool) -> Pattern:
    if typed:
        n1 = node_constraint("n1", "resource", resource_type="RuntimeHost")
        n2 = node_constraint("n2", "resource", resource_type="Network")
    else:
        n1 = node_constraint("n1", "resource")
        n2 = node_constraint("n2", "resource")
    return Pattern(
        nodes=(
            node_constraint("p", "property_betweenresources", label="connectedToNetwork"),
            n1,
            n2,
            node_constraint("s", "state", position="0"),
        ),
        edges=(
            PatternEdge("n1", SOURCE, "p"),
            PatternEdge("p", TARGET, "n2"),
            PatternEdge("p", HOLDS_AT, "s"),
        ),
    )


def _placement_pattern(label: str) -> Pattern:
    return Pattern(
        nodes=(
            node_constraint("p", "property_betweenresources", label=label),
            node_constraint("sw", "resource"),
            node_constraint("h", "resource", resource_type="RuntimeHost"),
            node_constraint("s", "state", position="0"),
        ),
        edges=(
            PatternEdge("sw", SOURCE, "p"),
            PatternEdge("p", TARGET, "h"),
            PatternEdge("p", HOLDS_AT, "s"),
        ),
    )


_CHARACTERIZING_PATTERN = Pattern(
    nodes=(
        node_constraint("p", "property_resource"),
        node_constraint("r", "resource"),
        node_constraint("s", "state", position="0"),
    ),
    edges=(
        PatternEdge("r", SOURCE, "p"),
        PatternEdge("p", HOLDS_AT, "s"),
    ),
)


def _iao_pattern(agent: str, func: str, position: int) -> Pattern:
    return Pattern(
        nodes=(
            node_constraint("f", "functionality", name=func),
            node_constraint("sw", "resource"),
            node_constraint("pi", "property_betweenresources", label="installedOn"),
            node_constraint("h", "resource", resource_type="RuntimeHost"),
            node_constraint("pa", "property_betweenresources", label="perceivedAsAdministrator"),
            node_constraint("a", "agent", name=agent),
            node_constraint("s", "state", position=str(position)),
        ),
        edges=(
            PatternEdge("sw", OFFERS, "f"),
            PatternEdge("sw", SOURCE, "pi"),
            PatternEdge("pi", TARGET, "h"),
            PatternEdge("a", SOURCE, "pa"),
            PatternEdge("pa", TARGET, "h"),
            PatternEdge("pi", HOLDS_AT, "s"),
            PatternEdge("pa", HOLDS_AT, "s"),
        ),
    )


def _extended_iao_pattern(agent: str, func: str, position: int) -> Pattern:
    return Pattern(
        nodes=(
            node_constraint("f", "functionality", name=func),
            node_constraint("sw", "resource"),
            node_constraint("pi", "property_betweenresources", label="installedOn"),
            node_constraint("r", "resource", resource_type="RuntimeHost"),
            node_constraint("pc", "property_betweenresources", label="controls"),
            node_constraint("a", "agent", name=agent),
            node_constraint("s", "state", position=str(position)),
        ),
        edges=(
            PatternEdge("sw", OFFERS, "f"),
            PatternEdge("sw", SOURCE, "pi"),
            PatternEdge("pi", TARGET, "r"),
            PatternEdge("a", SOURCE, "pc"),
            PatternEdge("pc", TARGET, "r"),
            PatternEdge("pi", HOLDS_AT, "s"),
            PatternEdge("pc", HOLDS_AT, "s"),
        ),
    )


def _home_pattern(agent: str) -> Pattern:
    return Pattern(
        nodes=(
            node_constraint("a", "agent", name=agent),
            node_constraint("pa", "property_betweenresources", label="perceivedAsAdministrator"),
            node_constraint("h", "resource", resource_type="RuntimeHost"),
            node_constraint("s", "state", position="0"),
        ),
        edges=(
            PatternEdge("a", SOURCE, "pa"),
            PatternEdge("pa", TARGET, "h"),
            PatternEdge("pa", HOLDS_AT, "s"),
        ),
    )


def _ig_pattern(agent: str, func: str, position: int) -> Pattern:
    return Pattern(
        nodes=(
            node_constraint("f", "functionality", name=func),
            node_constraint("i", "resource"),
            node_constraint("pg", "property_betweenresources", label="grantsTo"),
            node_constraint("pf", "property_betweenresources", label="grantsFunc"),
            node_constraint("pacc", "property_betweenresources", label="accessibleFrom"),
            node_constraint("h", "resource", resource_type="RuntimeHost"),
            node_constraint("pa", "property_betweenresources", label="perceivedAsAdministrator"),
            node_constraint("a", "agent", name=agent),
            node_constraint("s", "state", position=str(position)),
        ),
        edges=(
            PatternEdge("i", SOURCE, "pg"),
            PatternEdge("pg", TARGET, "a"),
            PatternEdge("i", SOURCE, "pf"),
            PatternEdge("pf", TARGET, "f"),
            PatternEdge("i", SOURCE, "pacc"),
            PatternEdge("pacc", TARGET, "h"),
            PatternEdge("a", SOURCE, "pa"),
            PatternEdge("pa", TARGET, "h"),
            PatternEdge("pg", HOLDS_AT, "s"),
            PatternEdge("pf", HOLDS_AT, "s"),
            PatternEdge("pacc", HOLDS_AT, "s"),
            PatternEdge("pa", HOLDS_AT, "s"),
        ),
    )


def _display_binding(g: PropertyGraph, binding: dict[str, int]) -> dict[str, str]:
    return {var: g.display(node_id) for var, node_id in binding.items()}


def _record(
    trace: list[RuleApplication] | None,
    rule: str,
    g: PropertyGraph,
    binding: dict[str, int],
    element: str,
    hypothesis: str | None = None,
) -> None:
    if trace is not None:
        trace.append(RuleApplication(rule, _display_binding(g, binding), element, hypothesis))


# ---------------------------------------------------------------------------
# topology rules


def generate_topology(
    g: PropertyGraph, tpl: ServiceTemplate, trace: list[RuleApplication] | None = None
) -> ServiceTemplate:
    """Apply R1-R3 and R11-R12 to fill the topology from the initial state."""
    for binding in match_pattern(g, _typed_resources_pattern("RuntimeHost")):
        name = g.display(binding["n"])
        tpl.node_templates[name] = NodeTemplate(name, HOST_TYPE)
        _record(trace, "R1", g, binding, f"node_template:{name}")
    for binding in match_pattern(g, _typed_resources_pattern("Network")):
        name = g.display(binding["n"])
        tpl.node_templates[name] = NodeTemplate(name, "Network")
        _record(trace, "R2", g, binding, f"node_template:{name}")

    for binding in match_pattern(g, _connection_pattern(typed=False)):
        n1 = g.display(binding["n1"])
        n2 = g.display(binding["n2"])
        host = tpl.node_templates.get(n1)
        net = tpl.node_templates.get(n2)
        if host is None or net is None or host.type != HOST_TYPE or net.type != "Network":
            raise PipelineError(
                error(
                    "E-DANGLING-CONNECTION",
                    f"connection {n1} connectedToNetwork {n2} references a resource "
                    "outside the context",
                )
            )
        name = f"{n1}_connectedToNetwork_{n2}"
        tpl.node_templates[name] = NodeTemplate(
            name, "Port", requirements=[Requirement("link", n2), Requirement("binding", n1)]
        )
        _record(trace, "R3", g, binding, f"node_template:{name}")

    for rule_label in ("installedOn", "providedBy"):
        for binding in match_pattern(g, _placement_pattern(rule_label)):
            sw = g.display(binding["sw"])
            host = g.display(binding["h"])
            if sw in tpl.node_templates or host not in tpl.node_templates:
                continue
            tpl.node_templates[sw] = NodeTemplate(
                sw, "SoftwareComponent", requirements=[Requirement("host", host)]
            )
            _record(trace, "R11", g, binding, f"node_template:{sw}")

    for binding in match_pattern(g, _CHARACTERIZING_PATTERN):
        owner = g.display(binding["r"])
        template = tpl.node_templates.get(owner)
        if template is None:
            continue
        prop = g.nodes[binding["p"]]
        template.properties[prop.attrs["label"]] = prop.attrs.get("value", "")
        _record(trace, "R12", g, binding, f"property:{owner}.{prop.attrs['label']}")
    return tpl


# ---------------------------------------------------------------------------
# workflow rules


def _ordered_transition_ids(g: PropertyGraph) -> list[int]:
    ids = g.nodes_with_label("transition")
    if not ids:
        return []
    has_incoming = {t for t in ids if g.into(t, NEXT)}
    starts = sorted(t for t in ids if t not in has_incoming)
    order = [starts[0]] if starts else [min(ids)]
    while True:
        successors = g.out(order[-1], NEXT)
        if not successors:
            break
        order.append(successors[0])
    return order


def generate_workflow(
    g: PropertyGraph,
    tpl: ServiceTemplate,
    trace: list[RuleApplication] | None = None,
    lenient: bool = False,
) -> ServiceTemplate:
    """Apply R4-R7: operations, the workflow, its steps and their chaining."""
    interface = tpl.interface_types[INTERFACE_TYPE]
    ordered = _ordered_transition_ids(g)

    for tr in ordered:
        node = g.nodes[tr]
        op = node.attrs["trigger"]
        description = node.attrs["description"]
        existing = interface.operations.get(op)
        if existing is not None and existing != description:
            if not lenient:
                raise PipelineError(
                    error(
                        "E-DUP-TRIGGER-DESC",
                        f"operation {op!r} is declared twice with conflicting descriptions",
                    )
                )
            continue  # first description wins
        if existing is None:
            interface.operations[op] = description
            _record(trace, "R4", g, {"tr": tr}, f"operation:{op}")

    path_nodes = g.nodes_with_label("attack_path")
    goal = g.nodes[path_nodes[0]].attrs.get("goal", "") if path_nodes else ""
    workflow = Workflow(WORKFLOW_NAME, goal)
    tpl.workflows[WORKFLOW_NAME] = workflow
    _record(
        trace,
        "R5",
        g,
        {"ap": path_nodes[0]} if path_nodes else {},
        f"workflow:{WORKFLOW_NAME}",
    )

    for tr in ordered:
        node = g.nodes[tr]
        step = WorkflowStep(
            node.attrs["name"], activities=[f"{ACTION_SLOT}.{node.attrs['trigger']}"]
        )
        workflow.steps[step.name] = step
        _record(trace, "R6", g, {"tr": tr}, f"step:{step.name}")
    for prior, ensuing in zip(ordered, ordered[1:]):
        prior_name = g.nodes[prior].attrs["name"]
        ensuing_name = g.nodes[ensuing].attrs["name"]
        workflow.steps[prior_name].on_success = [ensuing_name]
        _record(
            trace,
            "R7",
            g,
            {"prior": prior, "ensuing": ensuing},
            f"on_success:{prior_name}->{ensuing_name}",
        )
    return tpl


# ---------------------------------------------------------------------------
# target inference


HYPOTHESES = ("iao", "extended-iao", "ig")


def _candidates_for(
    g: PropertyGraph, hypothesis: str, agent: str, func: str, position: int
) -> list[tuple[str, dict[str, int]]]:
    if hypothesis == "iao":
        found = match_pattern(g, _iao_pattern(agent, func, position))
        return [(g.display(b["h"]), b) for b in found]
    if hypothesis == "extended-iao":
        extended = match_pattern(g, _extended_iao_pattern(agent, func, position))
        if not extended:
            return []
        # target is the agent's home host; the remote binding is the witness
        homes = match_pattern(g, _home_pattern(agent))
        return [(g.display(h["h"]), extended[0]) for h in homes]
    found = match_pattern(g, _ig_pattern(agent, func, position))
    return [(g.display(b["h"]), b) for b in found]


def resolve_target(
    g: PropertyGraph, agent: str, func: str, position: int, *, tie_break: str = "error"
) -> tuple[str, str, dict[str, int], Diagnostic | None]:
    """Evaluate the three hypotheses in precedence order for one step.

    Returns (hypothesis, host, first binding, optional tie-break warning).
    The first hypothesis with a non-empty candidate set decides; more than
    one candidate host is an error unless ``tie_break='first'`` picks the
    alphabetically smallest.
    """
    candidates: list[tuple[str, dict[str, int]]] = []
    hypothesis = None
    for name in HYPOTHESES:
        candidates = _candidates_for(g, name, agent, func, position)
        if candidates:
            hypothesis = name
            break
    if hypothesis is None:
        raise PipelineError(
            error(
                "E-NO-TARGET",
                f"no hypothesis yields a target for agent {agent!r} triggering "
                f"{func!r} at state position {position}",
            )
        )
    hosts = sorted({host for host, _ in candidates})
    if len(hosts) > 1:
        if tie_break != "first":
            raise PipelineError(
                error(
                    "E-AMBIGUOUS-TARGET",
                    f"hypothesis {hypothesis} yields {len(hosts)} hosts "
                    f"({', '.join(hosts)}) for {func!r} at position {position}",
                )
            )
        chosen = hosts[0]
        note = warning(
            "W-AMBIGUOUS-TARGET",
            f"hypothesis {hypothesis} yielded {', '.join(hosts)}; picked {chosen}",
        )
    else:
        chosen = hosts[0]
        note = None
    binding = next(b for host, b in candidates if host == chosen)
    return hypothesis, chosen, binding, note


_TARGET_RULE = {"iao": "R8", "extended-iao": "R9", "ig": "R10"}


def infer_targets(
    g: PropertyGraph,
    chain: StateChain,
    tpl: ServiceTemplate,
    *,
    tie_break: str = "error",
    trace: list[RuleApplication] | None = None,
    notes: list[Diagnostic] | None = None,
) -> ServiceTemplate:
    """Apply R8-R10: assign every workflow step its target host."""
    workflow = tpl.workflows[WORKFLOW_NAME]
    for index, step in enumerate(workflow.steps.values()):
        transition = chain.transitions[index]
        if transition.name != step.name:
            raise PipelineError(
                error(
                    "E-NO-TARGET",
                    f"workflow step {step.name!r} does not line up with chain "
                    f"transition {transition.name!r}",
                )
            )
        try:
            hypothesis, host, binding, note = resolve_target(
                g, transition.agent, transition.trigger, index, tie_break=tie_break
            )
        except PipelineError as exc:
            raise PipelineError(
                error(
                    exc.diagnostic.code,
                    f"step {step.name!r}: {exc.diagnostic.message}",
                    exc.diagnostic.span,
                )
            ) from exc
        step.target = host
        if note is not None and notes is not None:
            notes.append(note)
        _record(
            trace,
            _TARGET_RULE[hypothesis],
            g,
            binding,
            f"target:{step.name}={host}",
            hypothesis,
        )
    return tpl


def render_rules_trace(trace: list[RuleApplication]) -> str:
    """Serialize rule applications as JSON for audit and tests."""
    payload = {
        "rules": [
            {
                "rule": app.rule,
                "hypothesis": app.hypothesis,
                "binding": app.binding,
                "element": app.element,
            }
            for app in trace
        ]
    }
    return json.dumps(payload, indent=2) + "\n"


# ---------------------------------------------------------------------------
# emission


def emit_service_template(tpl: ServiceTemplate) -> str:
    root = YMap()
    root.add("tosca_definitions_version", tpl.definitions_version)

    interfaces = YMap()
    for it in tpl.interface_types.values():
        body = YMap().add("derived_from", it.derived_from)
        for op, description in it.operations.items():
            body.add(op, YMap().add("description", description))
        interfaces.add(it.name, body)
    root.add("interface_types", interfaces)

    node_types = YMap()
    for nt in tpl.node_types.values():
        body = YMap().add("derived_from", nt.derived_from)
        if nt.interfaces:
            slots = YMap()
            for slot, itype in nt.interfaces.items():
                slots.add(slot, YMap().add("type", itype))
            body.add("interfaces", slots)
        node_types.add(nt.name, body)
    root.add("node_types", node_types)

    if tpl.node_templates or tpl.workflows:
        topology = YMap()
        if tpl.node_templates:
            templates = YMap()
            for template in tpl.node_templates.values():
                body = YMap().add("type", template.type)
                if template.properties:
                    props = YMap()
                    for key, value in template.properties.items():
                        props.add(key, value)
                    body.add("properties", props)
                if template.requirements:
                    reqs = YSeq()
                    for req in template.requirements:
                        reqs.add(YMap().add(req.kind, req.target))
                    body.add("requirements", reqs)
                templates.add(template.name, body)
            topology.add("node_templates", templates)
        if tpl.workflows:
            workflows = YMap()
            for wf in tpl.workflows.values():
                body = YMap().add("description", wf.description)
                if wf.steps:
                    steps = YMap()
                    for step in wf.steps.values():
                        entry = YMap()
                        activities = YSeq()
                        for op in step.activities:
                            activities.add(YMap().add("call_operation", op))
                        entry.add("activities", activities)
                        if step.on_success:
                            entry.add("on_success", FlowList(list(step.on_success)))
                        if step.target is not None:
                            entry.add("target", step.target)
                        steps.add(step.name, entry)
                    body.add("steps", steps)
                workflows.add(wf.name, body)
            topology.add("workflows", workflows)
        root.add("topology_template", topology)
    return render_document(root)
