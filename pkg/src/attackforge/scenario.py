"""Attack-scenario language: parsing and semantic validation.

A scenario file (``.atk``) declares agents, typed resources, functionalities
offered by resources, facts about the initial state, and the ordered steps an
agent performs.  ``parse_scenario`` turns source text into a
:class:`ScenarioDocument` without resolving names; ``validate_scenario``
checks every cross-reference and the controlled fact vocabulary, returning
diagnostics instead of raising.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .diagnostics import Diagnostic, ScenarioSyntaxError, Span, error, warning

RESOURCE_KINDS = ("RuntimeHost", "Network", "Software", "Service", "Interface", "Data")


# ---------------------------------------------------------------------------
# document model


@dataclass(frozen=True)
class AgentDecl:
    name: str
    span: Span


@dataclass(frozen=True)
class ResourceDecl:
    name: str
    kind: str
    span: Span


@dataclass(frozen=True)
class FunctionalityDecl:
    name: str
    offered_by: str
    span: Span


@dataclass(frozen=True)
class FactDecl:
    subject: str
    label: str
    object: str
    is_literal: bool
    holds_initially: bool = True
    span: Span = Span(0, 0)

    def key(self) -> tuple[str, str, str, bool]:
        """Identity of the stated fact, ignoring position metadata."""
        return (self.subject, self.label, self.object, self.is_literal)

    def render(self) -> str:
        obj = f'"{self.object}"' if self.is_literal else self.object
        return f"{self.subject} {self.label} {obj}"


@dataclass(frozen=True)
class TransitionDecl:
    name: str
    agent: str
    trigger: str
    description: str
    preconditions: tuple[FactDecl, ...]
    post_add: tuple[FactDecl, ...]
    post_remove: tuple[FactDecl, ...]
    internal_tasks: tuple[str, ...] = ()
    span: Span = Span(0, 0)


@dataclass(frozen=True)
class ScenarioDocument:
    name: str
    goal: str
    agents: tuple[AgentDecl, ...]
    resources: tuple[ResourceDecl, ...]
    functionalities: tuple[FunctionalityDecl, ...]
    facts: tuple[FactDecl, ...]
    transitions: tuple[TransitionDecl, ...]
    path_order: tuple[str, ...]

    def transition(self, name: str) -> TransitionDecl:
        for t in self.transitions:
            if t.name == name:
                return t
        raise KeyError(name)

    def ordered_transitions(self) -> tuple[TransitionDecl, ...]:
        return tuple(self.transition(n) for n in self.path_order)


# ---------------------------------------------------------------------------
# controlled vocabulary

# Kind tokens: a resource kind name, "resource" (any resource), "agent",
# "functionality", or "literal".


@dataclass(frozen=True)
class LabelSignature:
    subjects: frozenset[str]
    objects: frozenset[str]


def _sig(subjects: tuple[str, ...], objects: tuple[str, ...]) -> LabelSignature:
    return LabelSignature(frozenset(subjects), frozenset(objects))


DEFAULT_VOCABULARY: dict[str, LabelSignature] = {
    "connectedToNetwork": _sig(("RuntimeHost",), ("Network",)),
    "installedOn": _sig(("Software",), ("RuntimeHost",)),
    "providedBy": _sig(("Service",), ("RuntimeHost",)),
    "offers": _sig(("Software", "Service"), ("functionality",)),
    "perceivedAsAdministrator": _sig(("agent",), ("RuntimeHost",)),
    "grantsTo": _sig(("Interface",), ("agent",)),
    "grantsFunc": _sig(("Interface",), ("functionality",)),
    "accessibleFrom": _sig(("Interface",), ("RuntimeHost",)),
    "controls": _sig(("agent",), ("RuntimeHost",)),
    "possesses": _sig(("agent",), ("Data",)),
    "hasDefaultCredentials": _sig(("RuntimeHost",), ("literal",)),
    "capturesTraffic": _sig(("RuntimeHost",), ("literal",)),
    "storedOn": _sig(("Data",), ("RuntimeHost",)),
    "capturedIn": _sig(("Data",), ("Data",)),
}


# ---------------------------------------------------------------------------
# lexer


@dataclass(frozen=True)
class _Token:
    kind: str  # ident | string | punct | eof
    text: str
    line: int
    col: int

    @property
    def span(self) -> Span:
        return Span(self.line, self.col)


def _lex(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if ch == '"':
            i += 1
            col += 1
            buf: list[str] = []
            while True:
                if i >= n or source[i] == "\n":
                    raise ScenarioSyntaxError(
                        [error("E-SYNTAX", "unterminated string", Span(start_line, start_col))]
                    )
                c = source[i]
                if c == "\\":
                    if i + 1 >= n or source[i + 1] not in ('"', "\\"):
                        raise ScenarioSyntaxError(
                            [error("E-SYNTAX", "unknown escape in string", Span(line, col))]
                        )
                    buf.append(source[i + 1])
                    i += 2
                    col += 2
                    continue
                if c == '"':
                    i += 1
                    col += 1
                    break
                buf.append(c)
                i += 1
                col += 1
            tokens.append(_Token("string", "".join(buf), start_line, start_col))
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(_Token("ident", source[i:j], start_line, start_col))
            col += j - i
            i = j
            continue
        if ch == "-" and i + 1 < n and source[i + 1] == ">":
            tokens.append(_Token("punct", "->", start_line, start_col))
            i += 2
            col += 2
            continue
        if ch in "{}:":
            tokens.append(_Token("punct", ch, start_line, start_col))
            i += 1
            col += 1
            continue
        raise ScenarioSyntaxError(
            [error("E-SYNTAX", f"unexpected character {ch!r}", Span(start_line, start_col))]
        )
    tokens.append(_Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def fail(self, message: str, tok: _Token | None = None) -> ScenarioSyntaxError:
        tok = tok or self.peek()
        return ScenarioSyntaxError([error("E-SYNTAX", message, tok.span)])

    def expect_ident(self, what: str) -> _Token:
        tok = self.next()
        if tok.kind != "ident":
            raise self.fail(f"expected {what}, got {tok.text!r}" if tok.text else f"expected {what}", tok)
        return tok

    def expect_keyword(self, kw: str) -> _Token:
        tok = self.next()
        if tok.kind != "ident" or tok.text != kw:
            raise self.fail(f"expected {kw!r}", tok)
        return tok

    def expect_punct(self, p: str) -> _Token:
        tok = self.next()
        if tok.kind != "punct" or tok.text != p:
            raise self.fail(f"expected {p!r}", tok)
        return tok

    def expect_string(self, what: str) -> _Token:
        tok = self.next()
        if tok.kind != "string":
            raise self.fail(f"expected quoted {what}", tok)
        return tok

    # -- statements

    def parse_document(self) -> ScenarioDocument:
        self.expect_keyword("scenario")
        name = self.expect_ident("scenario name")
        self.expect_punct("{")
        goal: str | None = None
        agents: list[AgentDecl] = []
        resources: list[ResourceDecl] = []
        functionalities: list[FunctionalityDecl] = []
        facts: list[FactDecl] = []
        transitions: list[TransitionDecl] = []
        path_order: tuple[str, ...] | None = None
        while True:
            tok = self.peek()
            if tok.kind == "punct" and tok.text == "}":
                self.next()
                break
            if tok.kind != "ident":
                raise self.fail("expected a declaration", tok)
            if tok.text == "goal":
                self.next()
                self.expect_punct(":")
                text = self.expect_string("goal text")
                if goal is not None:
                    raise self.fail("duplicate goal declaration", tok)
                goal = text.text
            elif tok.text == "agent":
                self.next()
                ident = self.expect_ident("agent name")
                agents.append(AgentDecl(ident.text, ident.span))
            elif tok.text == "resource":
                self.next()
                ident = self.expect_ident("resource name")
                self.expect_punct(":")
                kind = self.expect_ident("resource kind")
                resources.append(ResourceDecl(ident.text, kind.text, ident.span))
            elif tok.text == "functionality":
                self.next()
                ident = self.expect_ident("functionality name")
                self.expect_keyword("offeredBy")
                res = self.expect_ident("offering resource name")
                functionalities.append(FunctionalityDecl(ident.text, res.text, ident.span))
            elif tok.text == "fact":
                facts.append(self.parse_fact())
            elif tok.text == "step":
                transitions.append(self.parse_step())
            elif tok.text == "order":
                self.next()
                if path_order is not None:
                    raise self.fail("duplicate order declaration", tok)
                names = [self.expect_ident("step name").text]
                while self.peek().kind == "punct" and self.peek().text == "->":
                    self.next()
                    names.append(self.expect_ident("step name").text)
                path_order = tuple(names)
            else:
                raise self.fail(f"unknown declaration {tok.text!r}", tok)
        tok = self.next()
        if tok.kind != "eof":
            raise self.fail("content after closing brace", tok)
        return ScenarioDocument(
            name=name.text,
            goal=goal or "",
            agents=tuple(agents),
            resources=tuple(resources),
            functionalities=tuple(functionalities),
            facts=tuple(facts),
            transitions=tuple(transitions),
            path_order=path_order or (),
        )

    def parse_fact(self) -> FactDecl:
        kw = self.expect_keyword("fact")
        subject = self.expect_ident("fact subject")
        label = self.expect_ident("fact label")
        obj = self.next()
        if obj.kind == "ident":
            object_name, is_literal = obj.text, False
        elif obj.kind == "string":
            object_name, is_literal = obj.text, True
        else:
            raise self.fail("expected fact object (name or quoted literal)", obj)
        holds = True
        nxt = self.peek()
        if nxt.kind == "ident" and nxt.text == "initially":
            self.next()
            flag = self.expect_ident("'true' or 'false'")
            if flag.text == "false":
                holds = False
            elif flag.text != "true":
                raise self.fail("expected 'true' or 'false' after initially", flag)
        return FactDecl(subject.text, label.text, object_name, is_literal, holds, kw.span)

    def parse_fact_block(self) -> tuple[FactDecl, ...]:
        self.expect_punct("{")
        out: list[FactDecl] = []
        while True:
            tok = self.peek()
            if tok.kind == "punct" and tok.text == "}":
                self.next()
                return tuple(out)
            out.append(self.parse_fact())

    def parse_step(self) -> TransitionDecl:
        kw = self.expect_keyword("step")
        name = self.expect_ident("step name")
        self.expect_punct("{")
        agent: str | None = None
        trigger: str | None = None
        description: str | None = None
        internal: list[str] = []
        pre: tuple[FactDecl, ...] | None = None
        add: tuple[FactDecl, ...] | None = None
        remove: tuple[FactDecl, ...] | None = None
        while True:
            tok = self.peek()
            if tok.kind == "punct" and tok.text == "}":
                self.next()
                break
            if tok.kind != "ident":
                raise self.fail("expected a step field", tok)
            if tok.text in ("agent", "trigger", "description", "internal"):
                self.next()
                self.expect_punct(":")
                if tok.text == "agent":
                    if agent is not None:
                        raise self.fail("duplicate agent field", tok)
                    agent = self.expect_ident("agent name").text
                elif tok.text == "trigger":
                    if trigger is not None:
                        raise self.fail("duplicate trigger field", tok)
                    trigger = self.expect_ident("functionality name").text
                elif tok.text == "description":
                    if description is not None:
                        raise self.fail("duplicate description field", tok)
                    description = self.expect_string("description").text
                else:
                    internal.append(self.expect_string("internal task text").text)
            elif tok.text == "pre":
                self.next()
                if pre is not None:
                    raise self.fail("duplicate pre block", tok)
                pre = self.parse_fact_block()
            elif tok.text == "add":
                self.next()
                if add is not None:
                    raise self.fail("duplicate add block", tok)
                add = self.parse_fact_block()
            elif tok.text == "remove":
                self.next()
                if remove is not None:
                    raise self.fail("duplicate remove block", tok)
                remove = self.parse_fact_block()
            else:
                raise self.fail(f"unknown step field {tok.text!r}", tok)
        for field_name, value in (("agent", agent), ("trigger", trigger), ("description", description)):
            if value is None:
                raise ScenarioSyntaxError(
                    [error("E-SYNTAX", f"step {name.text!r} is missing the {field_name} field", kw.span)]
                )
        return TransitionDecl(
            name=name.text,
            agent=agent,  # type: ignore[arg-type]
            trigger=trigger,  # type: ignore[arg-type]
            description=description,  # type: ignore[arg-type]
            preconditions=pre or (),
            post_add=add or (),
            post_remove=remove or (),
            internal_tasks=tuple(internal),
            span=kw.span,
        )


def parse_scenario(source: str) -> ScenarioDocument:
    """Parse scenario source text.

    Raises :class:`ScenarioSyntaxError` on malformed input; performs no name
    resolution (that is ``validate_scenario``'s job).
    """
    return _Parser(_lex(source)).parse_document()


# ---------------------------------------------------------------------------
# validation


@dataclass
class _Namespace:
    agents: dict[str, AgentDecl] = field(default_factory=dict)
    resources: dict[str, ResourceDecl] = field(default_factory=dict)
    functionalities: dict[str, FunctionalityDecl] = field(default_factory=dict)
    transitions: dict[str, TransitionDecl] = field(default_factory=dict)

    def kind_token(self, name: str) -> str | None:
        if name in self.agents:
            return "agent"
        if name in self.functionalities:
            return "functionality"
        if name in self.resources:
            return self.resources[name].kind
        return None

    def is_declared(self, name: str) -> bool:
        return self.kind_token(name) is not None


def _check_signature_side(token: str, allowed: frozenset[str], is_resource: bool) -> bool:
    if token in allowed:
        return True
    return is_resource and "resource" in allowed


def validate_scenario(
    doc: ScenarioDocument, vocabulary: dict[str, LabelSignature] | None = None
) -> list[Diagnostic]:
    """Check all cross-references and fact signatures; return diagnostics.

    An empty result means every downstream stage's precondition on the
    document holds.
    """
    vocab = DEFAULT_VOCABULARY if vocabulary is None else vocabulary
    diags: list[Diagnostic] = []
    ns = _Namespace()

    declared: dict[str, Span] = {}

    def declare(name: str, span: Span, bucket: dict, decl) -> None:
        if name in declared:
            diags.append(error("E-DUP-DECL", f"duplicate declaration of {name!r}", span))
            return
        declared[name] = span
        bucket[name] = decl

    for a in doc.agents:
        declare(a.name, a.span, ns.agents, a)
    for r in doc.resources:
        declare(r.name, r.span, ns.resources, r)
    for f in doc.functionalities:
        declare(f.name, f.span, ns.functionalities, f)
    for t in doc.transitions:
        declare(t.name, t.span, ns.transitions, t)

    for f in doc.functionalities:
        offerer = ns.resources.get(f.offered_by)
        if offerer is None:
            diags.append(
                error(
                    "E-UNRESOLVED-RESOURCE",
                    f"functionality {f.name!r} is offered by undeclared resource {f.offered_by!r}",
                    f.span,
                )
            )
        elif offerer.kind not in ("Software", "Service"):
            diags.append(
                error(
                    "E-OFFEREDBY-KIND",
                    f"functionality {f.name!r} must be offered by a Software or Service resource, "
                    f"not {offerer.kind}",
                    f.span,
                )
            )

    warned_labels: set[str] = set()

    def check_fact(fact: FactDecl, where: str) -> None:
        subject_token = ns.kind_token(fact.subject)
        if subject_token is None:
            diags.append(
                error("E-UNRESOLVED-NAME", f"{where}: unknown name {fact.subject!r}", fact.span)
            )
        object_token: str | None
        if fact.is_literal:
            object_token = "literal"
        else:
            object_token = ns.kind_token(fact.object)
            if object_token is None:
                diags.append(
                    error("E-UNRESOLVED-NAME", f"{where}: unknown name {fact.object!r}", fact.span)
                )
        sig = vocab.get(fact.label)
        if sig is None:
            if fact.label not in warned_labels:
                warned_labels.add(fact.label)
                diags.append(
                    warning(
                        "W-UNKNOWN-LABEL",
                        f"label {fact.label!r} is not in the controlled vocabulary",
                        fact.span,
                    )
                )
            return
        if subject_token is not None:
            ok = _check_signature_side(subject_token, sig.subjects, fact.subject in ns.resources)
            if not ok:
                diags.append(
                    error(
                        "E-LABEL-SIGNATURE",
                        f"{where}: subject of {fact.label!r} must be "
                        f"{'/'.join(sorted(sig.subjects))}, got {subject_token}",
                        fact.span,
                    )
                )
        if object_token is not None:
            ok = _check_signature_side(
                object_token, sig.objects, not fact.is_literal and fact.object in ns.resources
            )
            if not ok:
                diags.append(
                    error(
                        "E-LABEL-SIGNATURE",
                        f"{where}: object of {fact.label!r} must be "
                        f"{'/'.join(sorted(sig.objects))}, got {object_token}",
                        fact.span,
                    )
                )

    seen_facts: set[tuple[str, str, str, bool]] = set()
    for fact in doc.facts:
        check_fact(fact, "fact")
        if fact.key() in seen_facts:
            diags.append(
                warning("W-DUP-FACT", f"duplicate fact {fact.render()!r}", fact.span)
            )
        seen_facts.add(fact.key())

    for t in doc.transitions:
        if t.agent not in ns.agents:
            diags.append(
                error(
                    "E-UNRESOLVED-AGENT",
                    f"step {t.name!r} references undeclared agent {t.agent!r}",
                    t.span,
                )
            )
        if t.trigger not in ns.functionalities:
            diags.append(
                error(
                    "E-UNRESOLVED-TRIGGER",
                    f"step {t.name!r} references undeclared functionality {t.trigger!r}",
                    t.span,
                )
            )
        for fact in t.preconditions:
            check_fact(fact, f"step {t.name!r} precondition")
        for fact in t.post_add:
            check_fact(fact, f"step {t.name!r} add")
        for fact in t.post_remove:
            check_fact(fact, f"step {t.name!r} remove")
        overlap = {f.key() for f in t.post_add} & {f.key() for f in t.post_remove}
        for key in sorted(overlap):
            diags.append(
                error(
                    "E-ADD-REMOVE-OVERLAP",
                    f"step {t.name!r} both adds and removes {key[0]} {key[1]} {key[2]}",
                    t.span,
                )
            )

    seen_order: set[str] = set()
    order_span = doc.transitions[0].span if doc.transitions else Span(1, 1)
    for step_name in doc.path_order:
        if step_name not in ns.transitions:
            diags.append(
                error("E-PATH-UNKNOWN", f"order references unknown step {step_name!r}", order_span)
            )
        elif step_name in seen_order:
            diags.append(
                error("E-PATH-DUP", f"order lists step {step_name!r} twice", order_span)
            )
        seen_order.add(step_name)
    for t in doc.transitions:
        if t.name not in seen_order:
            diags.append(
                error("E-PATH-INCOMPLETE", f"step {t.name!r} is missing from the order", t.span)
            )

    return diags
