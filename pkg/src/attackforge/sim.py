"""Dry-run execution of the attack playbook against the state chain.

The simulator walks the plays in order, resolves each play's hosts group
through the inventory, and emits one result per role task.  A step's
trigger task (always the last task of its role) is checked against the
chain state at that step's position: unsatisfied preconditions fail the
task and halt the run.  No real command ever executes; the point is to
verify the generated artifacts agree with the derived state chain.

``TaskResult.role`` is an extension over the minimal result shape so the
rendered lines can name the role exactly as an orchestrator would.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .context import StateChain
from .diagnostics import PipelineError, error
from .psm import InventoryTree, Playbook, RoleSkeleton

RECAP_KEYS = ("ok", "changed", "unreachable", "failed", "skipped")
STATUS_OK = "ok"
STATUS_FAILED = "failed"


@dataclass(frozen=True)
class TaskResult:
    play: str
    task: str
    role: str
    host: str
    status: str
    changed: bool


@dataclass
class ExecutionTrace:
    results: list[TaskResult] = field(default_factory=list)
    recap: dict[str, dict[str, int]] = field(default_factory=dict)

    @property
    def failed(self) -> int:
        return sum(counts["failed"] for counts in self.recap.values())


def simulate(
    chain: StateChain,
    playbook: Playbook,
    roles: list[RoleSkeleton],
    inventory: InventoryTree,
) -> ExecutionTrace:
    """Execute the playbook against the chain without touching anything real."""
    groups = {name: hosts for name, hosts in inventory.agent_groups}
    role_map = {role.name: role for role in roles}
    if len(playbook.plays) > len(chain.transitions):
        raise ValueError(
            f"playbook has {len(playbook.plays)} plays but the chain has "
            f"{len(chain.transitions)} transitions"
        )

    trace = ExecutionTrace()

    def bucket(host: str) -> dict[str, int]:
        if host not in trace.recap:
            trace.recap[host] = {key: 0 for key in RECAP_KEYS}
        return trace.recap[host]

    halted = False
    for index, play in enumerate(playbook.plays):
        if halted:
            break
        hosts = groups.get(play.hosts)
        if hosts is None:
            raise PipelineError(
                error(
                    "E-INVENTORY-MISS",
                    f"play {play.name!r} addresses group {play.hosts!r} "
                    "which is not in the inventory",
                )
            )
        transition = chain.transitions[index]
        tasks: list[tuple[str, str]] = []  # (role name, task name)
        for role_name in play.roles:
            role = role_map.get(role_name)
            if role is None:
                raise KeyError(f"play {play.name!r} references unknown role {role_name!r}")
            tasks.extend((role.name, task.name) for task in role.tasks)
        for position, (role_name, task_name) in enumerate(tasks):
            is_trigger = position == len(tasks) - 1
            for host in hosts:
                if is_trigger:
                    satisfied = set(transition.pre) <= chain.states[index].facts
                    if satisfied:
                        status = STATUS_OK
                        changed = bool(transition.added or transition.removed)
                    else:
                        status = STATUS_FAILED
                        changed = False
                else:
                    status, changed = STATUS_OK, False
                trace.results.append(
                    TaskResult(play.name, task_name, role_name, host, status, changed)
                )
                counts = bucket(host)
                if status == STATUS_OK:
                    counts["ok"] += 1
                    if changed:
                        counts["changed"] += 1
                else:
                    counts["failed"] += 1
                    halted = True
            if halted:
                break
    return trace


def render_trace(trace: ExecutionTrace) -> str:
    lines = []
    current_play = None
    current_task = None
    for result in trace.results:
        if result.play != current_play:
            lines.append(f"PLAY [{result.play}] ***")
            current_play = result.play
            current_task = None
        task_key = (result.role, result.task)
        if task_key != current_task:
            lines.append(f"TASK [{result.role} : {result.task}] ***")
            current_task = task_key
    lines.append("PLAY RECAP ***")
    for host, counts in trace.recap.items():
        lines.append(
            f"{host} : ok={counts['ok']} changed={counts['changed']} "
            f"unreachable={counts['unreachable']} failed={counts['failed']} "
            f"skipped={counts['skipped']} rescued=0 ignored=0"
        )
    return "\n".join(lines) + "\n"
