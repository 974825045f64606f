"""Service-template validation and the strict text reader.

``validate_template`` checks an in-memory template against the structural
contract every generated template satisfies: the fixed preamble, resolvable
requirements, well-shaped ports, declared operations, and a linear acyclic
workflow with exactly one entry step.

``parse_service_template`` reads the exact textual subset the emitter
produces (two-space indents, single-quoted scalars, flow sequences only for
``on_success``) back into a ``ServiceTemplate``.  Anything outside that
subset is rejected rather than guessed at.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .diagnostics import Diagnostic, PipelineError, Span, error
from .pim import (
    ACTION_SLOT,
    COMPUTE_BASE,
    DEFINITIONS_VERSION,
    HOST_TYPE,
    INTERFACE_ROOT,
    INTERFACE_TYPE,
    InterfaceType,
    NodeTemplate,
    NodeType,
    Requirement,
    ServiceTemplate,
    Workflow,
    WorkflowStep,
)

# ---------------------------------------------------------------------------
# validation


def validate_template(tpl: ServiceTemplate) -> list[Diagnostic]:
    """Structural checks over an in-memory template.  Returns diagnostics."""
    diags: list[Diagnostic] = []

    if tpl.definitions_version != DEFINITIONS_VERSION:
        diags.append(
            error(
                "E-MISSING-PREAMBLE",
                f"definitions version must be {DEFINITIONS_VERSION!r}, "
                f"got {tpl.definitions_version!r}",
            )
        )
    iface = tpl.interface_types.get(INTERFACE_TYPE)
    if iface is None or iface.derived_from != INTERFACE_ROOT:
        diags.append(
            error(
                "E-MISSING-PREAMBLE",
                f"interface type {INTERFACE_TYPE!r} derived from "
                f"{INTERFACE_ROOT!r} is required",
            )
        )
    host_type = tpl.node_types.get(HOST_TYPE)
    if (
        host_type is None
        or host_type.derived_from != COMPUTE_BASE
        or host_type.interfaces.get(ACTION_SLOT) != INTERFACE_TYPE
    ):
        diags.append(
            error(
                "E-MISSING-PREAMBLE",
                f"node type {HOST_TYPE!r} derived from {COMPUTE_BASE!r} with an "
                f"{ACTION_SLOT!r} interface of type {INTERFACE_TYPE!r} is required",
            )
        )

    for template in tpl.node_templates.values():
        for req in template.requirements:
            if req.target not in tpl.node_templates:
                diags.append(
                    error(
                        "E-DANGLING-REQUIREMENT",
                        f"template {template.name!r} requirement "
                        f"{req.kind} -> {req.target!r} names no template",
                    )
                )
        if template.type == "Port":
            links = [r for r in template.requirements if r.kind == "link"]
            bindings = [r for r in template.requirements if r.kind == "binding"]
            shape_ok = (
                len(links) == 1
                and len(bindings) == 1
                and len(template.requirements) == 2
                and _template_type(tpl, links[0].target) == "Network"
                and _template_type(tpl, bindings[0].target) == HOST_TYPE
            )
            if not shape_ok:
                diags.append(
                    error(
                        "E-PORT-SHAPE",
                        f"port {template.name!r} must have exactly one link to a "
                        f"Network and one binding to a {HOST_TYPE}",
                    )
                )

    operations = iface.operations if iface is not None else None
    for wf in tpl.workflows.values():
        diags.extend(_check_workflow(tpl, wf, operations))
    return diags


def _template_type(tpl: ServiceTemplate, name: str) -> str | None:
    template = tpl.node_templates.get(name)
    return template.type if template is not None else None


def _check_workflow(
    tpl: ServiceTemplate, wf: Workflow, operations: dict[str, str] | None
) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    prefix = ACTION_SLOT + "."
    for step in wf.steps.values():
        if not step.activities:
            diags.append(
                error("E-WORKFLOW-SHAPE", f"step {step.name!r} has no activities")
            )
        for activity in step.activities:
            op = activity[len(prefix):] if activity.startswith(prefix) else None
            if op is None or (operations is not None and op not in operations):
                diags.append(
                    error(
                        "E-UNDECLARED-OPERATION",
                        f"step {step.name!r} calls {activity!r} which is not a "
                        f"declared {INTERFACE_TYPE} operation",
                    )
                )
        for successor in step.on_success:
            if successor not in wf.steps:
                diags.append(
                    error(
                        "E-DANGLING-SUCCESSOR",
                        f"step {step.name!r} chains to unknown step {successor!r}",
                    )
                )
        if step.target is None:
            diags.append(
                error("E-MISSING-TARGET", f"step {step.name!r} has no target")
            )
        elif _template_type(tpl, step.target) != HOST_TYPE:
            diags.append(
                error(
                    "E-TARGET-KIND",
                    f"step {step.name!r} target {step.target!r} is not a "
                    f"{HOST_TYPE} template",
                )
            )

    if not wf.steps:
        return diags  # an empty workflow is vacuously well shaped
    predecessors = {name: 0 for name in wf.steps}
    for step in wf.steps.values():
        if len(step.on_success) > 1:
            diags.append(
                error(
                    "E-WORKFLOW-SHAPE",
                    f"step {step.name!r} has {len(step.on_success)} successors; "
                    "the chain must be linear",
                )
            )
        for successor in step.on_success:
            if successor in predecessors:
                predecessors[successor] += 1
    entries = [name for name, count in predecessors.items() if count == 0]
    joined = [name for name, count in predecessors.items() if count > 1]
    for name in joined:
        diags.append(
            error(
                "E-WORKFLOW-SHAPE",
                f"step {name!r} has {predecessors[name]} predecessors; "
                "the chain must be linear",
            )
        )
    if len(entries) != 1:
        diags.append(
            error(
                "E-WORKFLOW-SHAPE",
                f"workflow {wf.name!r} has {len(entries)} entry steps, expected 1",
            )
        )
        return diags
    visited = set()
    cursor: str | None = entries[0]
    while cursor is not None and cursor in wf.steps and cursor not in visited:
        visited.add(cursor)
        nxt = wf.steps[cursor].on_success
        cursor = nxt[0] if nxt else None
    if cursor is not None and cursor in visited:
        diags.append(
            error(
                "E-WORKFLOW-SHAPE",
                f"workflow {wf.name!r} revisits step {cursor!r}; "
                "the chain must be acyclic",
            )
        )
    elif len(visited) != len(wf.steps):
        missing = sorted(set(wf.steps) - visited)
        diags.append(
            error(
                "E-WORKFLOW-SHAPE",
                f"workflow {wf.name!r} does not reach steps: {', '.join(missing)}",
            )
        )
    return diags


# ---------------------------------------------------------------------------
# strict subset reader


@dataclass
class _Scalar:
    value: str | None
    line: int
    col: int


@dataclass
class _Seq:
    items: list
    line: int
    col: int


@dataclass
class _Map:
    entries: list[tuple[str, object]] = field(default_factory=list)
    line: int = 1
    col: int = 1
    key_spans: dict[str, Span] = field(default_factory=dict)

    def get(self, key: str):
        for name, node in self.entries:
            if name == key:
                return node
        return None


_KEY_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_.\-]*):(.*)$")
_UNSUPPORTED_LEAD = set("&*!|>\"%@`{}[]?")


def _syntax(message: str, line: int, col: int) -> PipelineError:
    return PipelineError(error("E-TEMPLATE-SYNTAX", message, Span(line, col)))


def _unsupported(message: str, line: int, col: int) -> PipelineError:
    return PipelineError(error("E-UNSUPPORTED-CONSTRUCT", message, Span(line, col)))


class _Reader:
    def __init__(self, text: str):
        self.lines: list[list] = []  # [line_no, indent, content]
        for number, raw in enumerate(text.splitlines(), start=1):
            if raw.strip() == "":
                continue
            if "\t" in raw:
                raise _unsupported("tab characters are not supported", number, raw.index("\t") + 1)
            indent = len(raw) - len(raw.lstrip(" "))
            content = raw[indent:].rstrip()
            if content.startswith("#"):
                continue
            if content == "---":
                if self.lines:
                    raise _unsupported("multiple documents are not supported", number, 1)
                continue
            self.lines.append([number, indent, content])
        self.i = 0

    def peek(self):
        return self.lines[self.i] if self.i < len(self.lines) else None

    def parse_document(self):
        first = self.peek()
        if first is None:
            raise _syntax("document is empty", 1, 1)
        if first[1] != 0:
            raise _syntax("top-level content must not be indented", first[0], first[1] + 1)
        return self.parse_node(0)

    def parse_node(self, indent: int):
        line = self.peek()
        if line[2] == "-" or line[2].startswith("- "):
            return self.parse_seq(indent)
        return self.parse_map(indent)

    def parse_map(self, indent: int) -> _Map:
        first = self.peek()
        result = _Map(line=first[0], col=indent + 1)
        seen: set[str] = set()
        while True:
            line = self.peek()
            if line is None or line[1] < indent:
                return result
            number, line_indent, content = line
            if line_indent > indent:
                raise _syntax("unexpected indentation", number, line_indent + 1)
            if content == "-" or content.startswith("- "):
                raise _syntax(
                    "sequence item where a mapping entry was expected", number, indent + 1
                )
            matched = _KEY_RE.match(content)
            if matched is None:
                if content.startswith("'") or content.startswith('"'):
                    raise _unsupported("quoted keys are not supported", number, indent + 1)
                raise _syntax("expected 'key: value' or 'key:'", number, indent + 1)
            key, rest = matched.group(1), matched.group(2)
            if key in seen:
                raise _syntax(f"duplicate key {key!r}", number, indent + 1)
            seen.add(key)
            value_col = indent + len(key) + 3
            if rest == "":
                self.i += 1
                nxt = self.peek()
                if nxt is None or nxt[1] <= indent:
                    value = _Scalar(None, number, value_col)
                else:
                    if nxt[1] != indent + 2:
                        raise _syntax(
                            "nested content must be indented by two spaces",
                            nxt[0],
                            nxt[1] + 1,
                        )
                    value = self.parse_node(indent + 2)
            elif rest.startswith(" "):
                text = rest[1:]
                if text == "":
                    value = _Scalar(None, number, value_col)
                elif text.startswith("["):
                    if key != "on_success":
                        raise _unsupported(
                            "flow sequences are only supported for on_success",
                            number,
                            value_col,
                        )
                    value = self._parse_flow(text, number, value_col)
                else:
                    value = _Scalar(self._parse_scalar(text, number, value_col), number, value_col)
                self.i += 1
            else:
                raise _syntax("expected a space after ':'", number, value_col - 1)
            result.entries.append((key, value))
            result.key_spans[key] = Span(number, indent + 1)
        return result

    def parse_seq(self, indent: int) -> _Seq:
        first = self.peek()
        result = _Seq([], first[0], indent + 1)
        while True:
            line = self.peek()
            if line is None or line[1] != indent or not (
                line[2] == "-" or line[2].startswith("- ")
            ):
                if line is not None and line[1] > indent:
                    raise _syntax("unexpected indentation", line[0], line[1] + 1)
                return result
            number, _, content = line
            if content == "-":
                raise _syntax("empty sequence items are not supported", number, indent + 1)
            inner = content[2:]
            if _KEY_RE.match(inner):
                # rewrite the dash line as its first mapping entry
                self.lines[self.i] = [number, indent + 2, inner]
                result.items.append(self.parse_map(indent + 2))
            else:
                result.items.append(
                    _Scalar(self._parse_scalar(inner, number, indent + 3), number, indent + 3)
                )
                self.i += 1
        return result

    def _parse_scalar(self, text: str, number: int, col: int) -> str:
        if text.startswith("'"):
            out = []
            i = 1
            while i < len(text):
                ch = text[i]
                if ch == "'":
                    if i + 1 < len(text) and text[i + 1] == "'":
                        out.append("'")
                        i += 2
                        continue
                    if i != len(text) - 1:
                        raise _syntax(
                            "trailing characters after quoted scalar", number, col + i + 1
                        )
                    return "".join(out)
                out.append(ch)
                i += 1
            raise _syntax("unterminated quoted scalar", number, col)
        if text[0] in _UNSUPPORTED_LEAD:
            raise _unsupported(
                f"scalar starting with {text[0]!r} is not supported", number, col
            )
        if ": " in text or text.endswith(":"):
            raise _syntax("unquoted scalar must not contain ': '", number, col)
        if " #" in text:
            raise _unsupported("inline comments are not supported", number, col)
        return text

    def _parse_flow(self, text: str, number: int, col: int) -> _Seq:
        if not text.endswith("]"):
            raise _syntax("unterminated flow sequence", number, col)
        inner = text[1:-1].strip()
        seq = _Seq([], number, col)
        if inner == "":
            return seq
        for piece in inner.split(","):
            item = piece.strip()
            if item == "":
                raise _syntax("empty flow sequence item", number, col)
            seq.items.append(_Scalar(self._parse_scalar(item, number, col), number, col))
        return seq


def _plain(node):
    if isinstance(node, _Scalar):
        return node.value
    if isinstance(node, _Seq):
        return [_plain(item) for item in node.items]
    entries = {}
    for key, value in node.entries:
        entries[key] = _plain(value)
    return entries


def load_fragment(text: str):
    """Parse the supported textual subset into plain dicts, lists and strings."""
    return _plain(_Reader(text).parse_document())


# ---------------------------------------------------------------------------
# interpretation into a ServiceTemplate


def _node_span(node) -> Span:
    return Span(node.line, node.col)


def _expect_map(node, what: str) -> _Map:
    if not isinstance(node, _Map):
        raise _syntax(f"{what} must be a mapping", node.line, node.col)
    return node


def _expect_seq(node, what: str) -> _Seq:
    if not isinstance(node, _Seq):
        raise _syntax(f"{what} must be a sequence", node.line, node.col)
    return node


def _expect_scalar(node, what: str) -> str:
    if not isinstance(node, _Scalar) or node.value is None:
        raise _syntax(f"{what} must be a scalar value", node.line, node.col)
    return node.value


def _require(mapping: _Map, key: str, what: str):
    node = mapping.get(key)
    if node is None:
        raise _syntax(f"missing key {key!r} in {what}", mapping.line, mapping.col)
    return node


def _reject_unknown(mapping: _Map, allowed: set[str], what: str) -> None:
    for key, _ in mapping.entries:
        if key not in allowed:
            span = mapping.key_spans[key]
            raise _syntax(f"unknown key {key!r} in {what}", span.line, span.col)


def parse_service_template(text: str) -> ServiceTemplate:
    """Read emitted service-template text back into the template model."""
    root = _expect_map(_Reader(text).parse_document(), "service template")
    _reject_unknown(
        root,
        {"tosca_definitions_version", "interface_types", "node_types", "topology_template"},
        "service template",
    )
    version = _expect_scalar(
        _require(root, "tosca_definitions_version", "service template"),
        "tosca_definitions_version",
    )
    tpl = ServiceTemplate(definitions_version=version)

    itypes = _expect_map(_require(root, "interface_types", "service template"), "interface_types")
    for name, node in itypes.entries:
        body = _expect_map(node, f"interface type {name!r}")
        derived = _expect_scalar(_require(body, "derived_from", f"interface type {name!r}"), "derived_from")
        itype = InterfaceType(name, derived)
        for key, value in body.entries:
            if key == "derived_from":
                continue
            op_body = _expect_map(value, f"operation {key!r}")
            _reject_unknown(op_body, {"description"}, f"operation {key!r}")
            itype.operations[key] = _expect_scalar(
                _require(op_body, "description", f"operation {key!r}"), "description"
            )
        tpl.interface_types[name] = itype

    ntypes = _expect_map(_require(root, "node_types", "service template"), "node_types")
    for name, node in ntypes.entries:
        body = _expect_map(node, f"node type {name!r}")
        _reject_unknown(body, {"derived_from", "interfaces"}, f"node type {name!r}")
        derived = _expect_scalar(
            _require(body, "derived_from", f"node type {name!r}"), "derived_from"
        )
        ntype = NodeType(name, derived)
        slots = body.get("interfaces")
        if slots is not None:
            for slot, slot_node in _expect_map(slots, "interfaces").entries:
                slot_body = _expect_map(slot_node, f"interface slot {slot!r}")
                _reject_unknown(slot_body, {"type"}, f"interface slot {slot!r}")
                ntype.interfaces[slot] = _expect_scalar(
                    _require(slot_body, "type", f"interface slot {slot!r}"), "type"
                )
        tpl.node_types[name] = ntype

    topology = root.get("topology_template")
    if topology is not None:
        topo = _expect_map(topology, "topology_template")
        _reject_unknown(topo, {"node_templates", "workflows"}, "topology_template")
        templates = topo.get("node_templates")
        if templates is not None:
            for name, node in _expect_map(templates, "node_templates").entries:
                tpl.node_templates[name] = _parse_node_template(name, node)
        workflows = topo.get("workflows")
        if workflows is not None:
            for name, node in _expect_map(workflows, "workflows").entries:
                tpl.workflows[name] = _parse_workflow(name, node)
    return tpl


def _parse_node_template(name: str, node) -> NodeTemplate:
    what = f"node template {name!r}"
    body = _expect_map(node, what)
    _reject_unknown(body, {"type", "properties", "requirements"}, what)
    template = NodeTemplate(name, _expect_scalar(_require(body, "type", what), "type"))
    props = body.get("properties")
    if props is not None:
        for key, value in _expect_map(props, "properties").entries:
            template.properties[key] = _expect_scalar(value, f"property {key!r}")
    reqs = body.get("requirements")
    if reqs is not None:
        for item in _expect_seq(reqs, "requirements").items:
            entry = _expect_map(item, "requirement")
            if len(entry.entries) != 1:
                raise _syntax(
                    "each requirement must be a single 'kind: target' pair",
                    entry.line,
                    entry.col,
                )
            kind, target = entry.entries[0]
            template.requirements.append(
                Requirement(kind, _expect_scalar(target, f"requirement {kind!r}"))
            )
    return template


def _parse_workflow(name: str, node) -> Workflow:
    what = f"workflow {name!r}"
    body = _expect_map(node, what)
    _reject_unknown(body, {"description", "steps"}, what)
    description_node = _require(body, "description", what)
    if isinstance(description_node, _Scalar) and description_node.value is None:
        description = ""
    else:
        description = _expect_scalar(description_node, "description")
    wf = Workflow(name, description)
    steps = body.get("steps")
    if steps is not None:
        for step_name, step_node in _expect_map(steps, "steps").entries:
            wf.steps[step_name] = _parse_step(step_name, step_node)
    return wf


def _parse_step(name: str, node) -> WorkflowStep:
    what = f"step {name!r}"
    body = _expect_map(node, what)
    _reject_unknown(body, {"activities", "on_success", "target"}, what)
    step = WorkflowStep(name)
    for item in _expect_seq(_require(body, "activities", what), "activities").items:
        entry = _expect_map(item, "activity")
        _reject_unknown(entry, {"call_operation"}, "activity")
        step.activities.append(
            _expect_scalar(_require(entry, "call_operation", "activity"), "call_operation")
        )
    successors = body.get("on_success")
    if successors is not None:
        for item in _expect_seq(successors, "on_success").items:
            step.on_success.append(_expect_scalar(item, "on_success entry"))
    target = body.get("target")
    if target is not None:
        step.target = _expect_scalar(target, "target")
    return step
