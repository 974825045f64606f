"""Platform-specific artifacts: inventory, playbooks, role skeletons, CSAR.

The PSM projection turns the service template plus the scenario into the
files an orchestrator consumes: a group inventory tree, an attack playbook
with one play per workflow step, a role skeleton per play (internal tasks
first, then the trigger task), an enrichment playbook that attaches every
host to its networks, and a CSAR archive wrapping the service template.

All emission goes through the deterministic YAML writer, so two runs over
the same scenario produce byte-identical trees.
"""

from __future__ import annotations

import io
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

from .diagnostics import PipelineError, error
from .pim import HOST_TYPE, WORKFLOW_NAME, ServiceTemplate
from .scenario import ScenarioDocument
from .yamlwriter import YMap, YSeq, render_document

ROLE_PREFIX = "AttackTransition_"
INVENTORY_FILE = "00_inventory.yaml"
ATTACK_PLAYBOOK_FILE = "AttackScript.yaml"
ENRICHMENT_PLAYBOOK_FILE = "EnrichNetworking.yaml"


@dataclass
class Task:
    name: str
    comment: str | None = None
    vars: dict[str, str] = field(default_factory=dict)


@dataclass
class Play:
    name: str
    hosts: str
    roles: list[str] = field(default_factory=list)
    tasks: list[Task] = field(default_factory=list)
    step: str | None = None


@dataclass
class Playbook:
    plays: list[Play] = field(default_factory=list)


@dataclass
class RoleSkeleton:
    name: str
    tasks: list[Task] = field(default_factory=list)


@dataclass
class InventoryTree:
    agent_groups: list[tuple[str, list[str]]] = field(default_factory=list)
    unassigned: list[str] = field(default_factory=list)


@dataclass
class PsmBundle:
    scenario: str
    inventory: InventoryTree
    attack_playbook: Playbook
    enrichment_playbook: Playbook
    roles: list[RoleSkeleton]
    service_template_text: str
    rules_trace_text: str


# ---------------------------------------------------------------------------
# inventory


def generate_inventory(tpl: ServiceTemplate, doc: ScenarioDocument) -> InventoryTree:
    """Group every agent with its home host and the hosts its steps target."""
    assigned: dict[str, set[str]] = {agent.name: set() for agent in doc.agents}
    for fact in doc.facts:
        if (
            fact.label == "perceivedAsAdministrator"
            and fact.holds_initially
            and not fact.is_literal
            and fact.subject in assigned
        ):
            assigned[fact.subject].add(fact.object)
    workflow = tpl.workflows.get(WORKFLOW_NAME)
    if workflow is not None:
        for step in workflow.steps.values():
            transition = doc.transition(step.name)
            if step.target is not None:
                assigned[transition.agent].add(step.target)

    owner: dict[str, str] = {}
    for agent in doc.agents:
        for host in assigned[agent.name]:
            if host in owner:
                raise PipelineError(
                    error(
                        "E-HOST-TWO-AGENTS",
                        f"host {host!r} belongs to both agent group "
                        f"{owner[host]!r} and {agent.name!r}",
                    )
                )
            owner[host] = agent.name

    resource_order = [r.name for r in doc.resources]
    tree = InventoryTree()
    for agent in doc.agents:
        hosts = [name for name in resource_order if name in assigned[agent.name]]
        tree.agent_groups.append((agent.name, hosts))
    tree.unassigned = [
        name
        for name, template in tpl.node_templates.items()
        if template.type == HOST_TYPE and name not in owner
    ]
    return tree


def render_inventory(tree: InventoryTree) -> str:
    agent_children = YMap()
    for name, _ in tree.agent_groups:
        agent_children.add(name, None)
    children = YMap()
    children.add("Agent", YMap().add("children", agent_children))
    for name, hosts in tree.agent_groups:
        if not hosts:
            continue
        host_map = YMap()
        for host in hosts:
            host_map.add(host, None)
        children.add(name, YMap().add("hosts", host_map))
    if tree.unassigned:
        host_map = YMap()
        for host in tree.unassigned:
            host_map.add(host, None)
        children.add("Unassigned", YMap().add("hosts", host_map))
    root = YMap()
    root.add("all", YMap().add("children", children))
    return render_document(root)


# ---------------------------------------------------------------------------
# playbooks and roles


def generate_attack_playbook(tpl: ServiceTemplate, doc: ScenarioDocument) -> Playbook:
    """One play per workflow step, executed through its role skeleton."""
    playbook = Playbook()
    workflow = tpl.workflows.get(WORKFLOW_NAME)
    if workflow is None:
        return playbook
    for step in workflow.steps.values():
        transition = doc.transition(step.name)
        playbook.plays.append(
            Play(
                name=(
                    f"{step.name} ({transition.agent} {transition.trigger}) - "
                    f"{transition.description}"
                ),
                hosts=transition.agent,
                roles=[f"{ROLE_PREFIX}{step.name}"],
                step=step.name,
            )
        )
    return playbook


def generate_roles(playbook: Playbook, doc: ScenarioDocument) -> list[RoleSkeleton]:
    """A skeleton per play: internal tasks first, then the trigger task."""
    roles = []
    for play in playbook.plays:
        if play.step is None or not play.roles:
            continue
        transition = doc.transition(play.step)
        tasks = [
            Task(f"--- internal: {text} ---") for text in transition.internal_tasks
        ]
        tasks.append(Task(transition.trigger, comment=transition.description))
        roles.append(RoleSkeleton(play.roles[0], tasks))
    return roles


def generate_enrichment_playbook(tpl: ServiceTemplate) -> Playbook:
    """Attach every templated host to its networks via the port templates."""
    playbook = Playbook()
    for host_name, host in tpl.node_templates.items():
        if host.type != HOST_TYPE:
            continue
        tasks = []
        for port_name, port in tpl.node_templates.items():
            if port.type != "Port":
                continue
            link = next((r.target for r in port.requirements if r.kind == "link"), None)
            bound = next((r.target for r in port.requirements if r.kind == "binding"), None)
            if bound == host_name and link is not None:
                tasks.append(Task(f"attach {port_name}", vars={"network": link}))
        if tasks:
            playbook.plays.append(
                Play(name=f"Enrich {host_name} networking", hosts=host_name, tasks=tasks)
            )
    return playbook


def _task_map(task: Task) -> YMap:
    body = YMap()
    body.add("name", task.name)
    if task.comment is not None:
        body.comment(task.comment)
    if task.vars:
        vars_map = YMap()
        for key, value in task.vars.items():
            vars_map.add(key, value)
        body.add("vars", vars_map)
    body.add("meta", "noop")
    return body


def render_playbook(playbook: Playbook) -> str:
    plays = YSeq()
    for play in playbook.plays:
        body = YMap()
        body.add("name", play.name)
        body.add("hosts", play.hosts)
        if play.roles:
            roles = YSeq()
            for role in play.roles:
                roles.add(role)
            body.add("roles", roles)
        if play.tasks:
            tasks = YSeq()
            for task in play.tasks:
                tasks.add(_task_map(task))
            body.add("tasks", tasks)
        plays.add(body)
    return render_document(plays, doc_start=True)


def render_role(role: RoleSkeleton) -> str:
    tasks = YSeq()
    for task in role.tasks:
        tasks.add(_task_map(task))
    return render_document(tasks, doc_start=True)


# ---------------------------------------------------------------------------
# packaging


def _csar_bytes(service_template_text: str) -> bytes:
    meta = (
        "TOSCA-Meta-File-Version: 1.0\n"
        "CSAR-Version: 1.1\n"
        "Created-By: attackforge\n"
        "Entry-Definitions: service_template.yaml\n"
    )
    buffer = io.BytesIO()
    with zipfile.ZipFile(buffer, "w", zipfile.ZIP_STORED) as archive:
        for name, data in (
            ("TOSCA-Metadata/TOSCA.meta", meta),
            ("service_template.yaml", service_template_text),
        ):
            info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
            info.external_attr = 0o644 << 16
            archive.writestr(info, data)
    return buffer.getvalue()


def package_bundle(bundle: PsmBundle, out_dir: str | Path) -> list[str]:
    """Write the bundle under ``out_dir`` and return the relative paths."""
    base = Path(out_dir)
    manifest: list[str] = []

    def put(relative: str, text: str) -> None:
        path = base / relative
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        manifest.append(relative)

    put("pim/service_template.yaml", bundle.service_template_text)
    put("pim/rules_trace.json", bundle.rules_trace_text)
    put(f"psm/{INVENTORY_FILE}", render_inventory(bundle.inventory))
    put(f"psm/{ATTACK_PLAYBOOK_FILE}", render_playbook(bundle.attack_playbook))
    put(f"psm/{ENRICHMENT_PLAYBOOK_FILE}", render_playbook(bundle.enrichment_playbook))
    for role in bundle.roles:
        put(f"psm/roles/{role.name}/tasks/main.yaml", render_role(role))

    csar_rel = f"csar/{bundle.scenario}.csar"
    csar_path = base / csar_rel
    csar_path.parent.mkdir(parents=True, exist_ok=True)
    csar_path.write_bytes(_csar_bytes(bundle.service_template_text))
    manifest.append(csar_rel)
    return manifest
