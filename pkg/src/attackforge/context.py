"""Context derivation: which resources an attack touches and the state chain
it drives them through.

The scenario's top-level facts define state 0.  Each transition maps state
i-1 to state i by removing its ``remove`` facts and adding its ``add`` facts.
``derive_context`` folds that recurrence, marks every resource reachable from
the scenario's facts and triggers as a context element, and annotates the
graph with one state node per position plus HOLDS_AT edges recording where
each fact holds.  ``check_chain`` re-derives everything from the document and
reports any disagreement, making the semantics independently auditable.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .diagnostics import Diagnostic, PipelineError, Span, error, warning
from .graph import HOLDS_AT, PropertyGraph, add_fact_node, build_graph, named_node
from .scenario import FactDecl, ScenarioDocument


@dataclass(frozen=True)
class FactAssertion:
    """Canonical runtime form of a fact: node ids instead of names."""

    subject: int
    label: str
    object: int | str
    is_literal: bool


@dataclass(frozen=True)
class ContextState:
    position: int
    facts: frozenset[FactAssertion]


@dataclass(frozen=True)
class ChainTransition:
    """Per-transition delta, kept on the chain so later stages need no document."""

    name: str
    agent: str
    trigger: str
    pre: tuple[FactAssertion, ...]
    added: tuple[FactAssertion, ...]
    removed: tuple[FactAssertion, ...]


@dataclass(frozen=True)
class StateChain:
    states: tuple[ContextState, ...]
    transition_names: tuple[str, ...]
    transitions: tuple[ChainTransition, ...]
    names: dict[int, str]
    warnings: tuple[Diagnostic, ...] = ()

    def __len__(self) -> int:
        return len(self.states)


def _assertion(g: PropertyGraph, fact: FactDecl) -> FactAssertion:
    subject = named_node(g, fact.subject)
    obj: int | str = fact.object if fact.is_literal else named_node(g, fact.object)
    return FactAssertion(subject, fact.label, obj, fact.is_literal)


def render_assertion(a: FactAssertion, names: dict[int, str]) -> str:
    obj = f'"{a.object}"' if a.is_literal else names.get(a.object, str(a.object))  # type: ignore[arg-type]
    return f"{names.get(a.subject, str(a.subject))} {a.label} {obj}"


def _initial_facts(g: PropertyGraph, doc: ScenarioDocument) -> list[FactAssertion]:
    out: list[FactAssertion] = []
    seen: set[FactAssertion] = set()
    for fact in doc.facts:
        if not fact.holds_initially:
            continue
        a = _assertion(g, fact)
        if a not in seen:
            seen.add(a)
            out.append(a)
    return out


def _context_resources(doc: ScenarioDocument) -> set[str]:
    """Names of resources the scenario actually involves.

    Seeds: endpoints of all stated facts (top-level and per-transition) and
    the offering resource of every triggered or referenced functionality.
    Closure: a top-level fact pulls its second endpoint in once the first one
    is a context element.
    """
    resource_names = {r.name for r in doc.resources}
    offerer = {f.name: f.offered_by for f in doc.functionalities}
    context: set[str] = set()
    referenced_funcs: set[str] = set()

    def see_fact(fact: FactDecl) -> None:
        for endpoint in (fact.subject,) if fact.is_literal else (fact.subject, fact.object):
            if endpoint in resource_names:
                context.add(endpoint)
            if endpoint in offerer:
                referenced_funcs.add(endpoint)

    all_facts = list(doc.facts)
    for t in doc.transitions:
        referenced_funcs.add(t.trigger)
        for fact in t.preconditions + t.post_add + t.post_remove:
            all_facts.append(fact)
    for fact in all_facts:
        see_fact(fact)
    for func in referenced_funcs:
        if func in offerer and offerer[func] in resource_names:
            context.add(offerer[func])

    changed = True
    while changed:
        changed = False
        for fact in doc.facts:
            if fact.is_literal:
                continue
            a, b = fact.subject, fact.object
            if a in resource_names and b in resource_names:
                if a in context and b not in context:
                    context.add(b)
                    changed = True
                elif b in context and a not in context:
                    context.add(a)
                    changed = True
    return context


def derive_context(
    g: PropertyGraph,
    doc: ScenarioDocument,
    *,
    strict_remove: bool = False,
    enforce_preconditions: bool = True,
) -> tuple[PropertyGraph, StateChain]:
    """Fold the state chain and return (annotated graph, chain).

    Raises E-PRE-UNSATISFIED when a transition's precondition is missing from
    the preceding state; pass ``enforce_preconditions=False`` to fold anyway
    (used for dry-running deliberately broken scenarios).  Removing an absent
    fact warns, or errors under ``strict_remove``.
    """
    annotated = g.copy()
    warnings: list[Diagnostic] = []

    initial = _initial_facts(g, doc)
    states: list[frozenset[FactAssertion]] = [frozenset(initial)]
    chain_transitions: list[ChainTransition] = []
    fact_order: list[FactAssertion] = list(initial)
    seen_facts: set[FactAssertion] = set(initial)

    # declared-but-initially-false facts still own a property node
    for fact in doc.facts:
        a = _assertion(g, fact)
        if a not in seen_facts:
            seen_facts.add(a)
            fact_order.append(a)

    for position, name in enumerate(doc.path_order, start=1):
        t = doc.transition(name)
        current = states[-1]
        pre = tuple(_assertion(g, f) for f in t.preconditions)
        added = tuple(_assertion(g, f) for f in t.post_add)
        removed = tuple(_assertion(g, f) for f in t.post_remove)
        for a, decl in zip(pre, t.preconditions):
            if a not in current and enforce_preconditions:
                raise PipelineError(
                    error(
                        "E-PRE-UNSATISFIED",
                        f"step {t.name!r} at position {position} requires "
                        f"{decl.render()!r} which does not hold in state {position - 1}",
                        t.span,
                    )
                )
        for a, decl in zip(removed, t.post_remove):
            if a not in current:
                diag = warning(
                    "W-REMOVE-ABSENT",
                    f"step {t.name!r} removes {decl.render()!r} which does not hold",
                    t.span,
                )
                if strict_remove:
                    raise PipelineError(replace(diag, severity="error", code="E-REMOVE-ABSENT"))
                warnings.append(diag)
        states.append((current - set(removed)) | set(added))
        chain_transitions.append(ChainTransition(t.name, t.agent, t.trigger, pre, added, removed))
        for a in added:
            if a not in seen_facts:
                seen_facts.add(a)
                fact_order.append(a)

    # mark context resources
    context = _context_resources(doc)
    for r in doc.resources:
        if r.name in context:
            node_id = annotated.find("resource", r.name)
            if node_id is not None:
                annotated.nodes[node_id].attrs["context"] = "true"

    # state nodes and HOLDS_AT annotation
    state_ids = [annotated.add_node("state", position=str(i)) for i in range(len(states))]

    decl_keys: list[FactAssertion] = []
    for fact in doc.facts:
        a = _assertion(g, fact)
        if a not in decl_keys:
            decl_keys.append(a)
    prop_ids = [n for n in sorted(annotated.nodes) if annotated.nodes[n].label.startswith("property_")]
    node_of: dict[FactAssertion, int] = dict(zip(decl_keys, prop_ids))

    names = {
        n.id: n.attrs["name"]
        for n in annotated.nodes.values()
        if "name" in n.attrs and n.label in ("agent", "resource", "functionality")
    }
    for a in fact_order:
        if a not in node_of:
            subject = names[a.subject]
            obj = str(a.object) if a.is_literal else names[a.object]  # type: ignore[index]
            node_of[a] = add_fact_node(annotated, subject, a.label, obj, a.is_literal)
    for a, prop in node_of.items():
        for i, facts in enumerate(states):
            if a in facts:
                annotated.add_edge(prop, HOLDS_AT, state_ids[i])

    chain = StateChain(
        states=tuple(ContextState(i, facts) for i, facts in enumerate(states)),
        transition_names=tuple(doc.path_order),
        transitions=tuple(chain_transitions),
        names=names,
        warnings=tuple(warnings),
    )
    return annotated, chain


def state_at(chain: StateChain, position: int) -> set[FactAssertion]:
    """Facts holding at a position, as a fresh mutable set."""
    if position < 0 or position >= len(chain.states):
        raise IndexError(f"position {position} outside chain of length {len(chain.states)}")
    return set(chain.states[position].facts)


def check_chain(chain: StateChain, doc: ScenarioDocument) -> list[Diagnostic]:
    """Audit a chain against the document's transition semantics.

    Empty result iff the chain has the right shape, every transition's
    preconditions hold in the preceding state, and every state follows from
    its predecessor by the remove-then-add recurrence.
    """
    diags: list[Diagnostic] = []
    g = build_graph(doc)
    fallback = Span(1, 1)

    if len(chain.states) != len(chain.transition_names) + 1:
        diags.append(
            error(
                "E-CHAIN-SHAPE",
                f"chain has {len(chain.states)} states for "
                f"{len(chain.transition_names)} transitions",
                fallback,
            )
        )
        return diags
    for i, state in enumerate(chain.states):
        if state.position != i:
            diags.append(
                error("E-CHAIN-SHAPE", f"state at index {i} carries position {state.position}", fallback)
            )

    expected0 = frozenset(_initial_facts(g, doc))
    if chain.states[0].facts != expected0:
        diags.append(
            error("E-CHAIN-RECURRENCE", "state 0 differs from the declared initial facts", fallback)
        )

    for i, name in enumerate(chain.transition_names, start=1):
        try:
            t = doc.transition(name)
        except KeyError:
            diags.append(
                error("E-CHAIN-UNKNOWN-STEP", f"chain references unknown step {name!r}", fallback)
            )
            continue
        prev = chain.states[i - 1].facts
        for decl in t.preconditions:
            if _assertion(g, decl) not in prev:
                diags.append(
                    error(
                        "E-PRE-UNSATISFIED",
                        f"step {t.name!r} at position {i} requires {decl.render()!r} "
                        f"which does not hold in state {i - 1}",
                        t.span,
                    )
                )
        removed = {_assertion(g, f) for f in t.post_remove}
        added = {_assertion(g, f) for f in t.post_add}
        if chain.states[i].facts != (prev - removed) | added:
            diags.append(
                error(
                    "E-CHAIN-RECURRENCE",
                    f"state {i} does not equal state {i - 1} minus removals plus additions "
                    f"of step {t.name!r}",
                    t.span,
                )
            )
    return diags


def render_chain(chain: StateChain) -> str:
    """One text block per state, assertions sorted; used by golden tests."""
    blocks: list[str] = []
    for state in chain.states:
        lines = [f"state {state.position}"]
        lines.extend(sorted("  " + render_assertion(a, chain.names) for a in state.facts))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"
