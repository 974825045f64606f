"""Parser and validator behaviour, checked on the bundled scenario and probes."""

import dataclasses

import pytest

from attackforge.diagnostics import ERROR, WARNING, ScenarioSyntaxError
from attackforge.scenario import FactDecl, parse_scenario, validate_scenario


def probe(body: str) -> str:
    """Wrap declarations in a minimal scenario block."""
    return 'scenario Probe {\n  goal: "probe"\n' + body + "\n}\n"


def codes(diags) -> list[str]:
    return [d.code for d in diags]


class TestFixtureParsing:
    """The bundled scenario is the primary exercise for the whole grammar."""

    def test_document_identity(self, snif_doc):
        assert snif_doc.name == "SnifAttack"
        assert snif_doc.goal.startswith("The attacker steals the credentials")

    def test_declaration_counts(self, snif_doc):
        assert len(snif_doc.agents) == 2
        assert len(snif_doc.resources) == 17
        assert len(snif_doc.functionalities) == 6
        assert len(snif_doc.facts) == 22
        assert len(snif_doc.transitions) == 6

    def test_path_order(self, snif_doc):
        assert snif_doc.path_order == (
            "Scan",
            "UseOfDefaults",
            "Sniffing",
            "Disclosure",
            "Discovery",
            "Checkmate",
        )
        ordered = snif_doc.ordered_transitions()
        assert [t.name for t in ordered] == list(snif_doc.path_order)

    def test_transition_lookup(self, snif_doc):
        step = snif_doc.transition("Discovery")
        assert step.agent == "Attacker"
        assert step.trigger == "reads"
        assert step.internal_tasks == (
            "retrieves a local copy of the collected traffic's dump file",
        )
        with pytest.raises(KeyError):
            snif_doc.transition("NoSuchStep")

    def test_literal_fact(self, snif_doc):
        fact = next(f for f in snif_doc.facts if f.label == "hasDefaultCredentials")
        assert fact.subject == "Router"
        assert fact.object == "true"
        assert fact.is_literal
        assert fact.holds_initially
        assert fact.render() == 'Router hasDefaultCredentials "true"'

    def test_step_deltas(self, snif_doc):
        step = snif_doc.transition("UseOfDefaults")
        assert [f.render() for f in step.preconditions] == [
            'Router hasDefaultCredentials "true"'
        ]
        assert [f.render() for f in step.post_add] == ["Attacker controls Router"]
        assert [f.render() for f in step.post_remove] == [
            'Router hasDefaultCredentials "true"'
        ]

    def test_fixture_is_clean(self, snif_doc):
        assert validate_scenario(snif_doc) == []

    def test_parse_is_deterministic(self, snif_source):
        assert parse_scenario(snif_source) == parse_scenario(snif_source)


class TestParserForms:
    """Small grammar features not exercised by the fixture."""

    def test_goal_and_order_are_optional(self):
        doc = parse_scenario("scenario Tiny {\n  agent Solo\n}\n")
        assert doc.goal == ""
        assert doc.path_order == ()
        assert validate_scenario(doc) == []

    def test_initially_false_fact(self):
        doc = parse_scenario(
            probe(
                "  agent A\n"
                "  resource H : RuntimeHost\n"
                "  fact A perceivedAsAdministrator H initially false"
            )
        )
        assert doc.facts[0].holds_initially is False
        assert validate_scenario(doc) == []

    def test_comments_are_skipped(self):
        doc = parse_scenario(probe("  # nothing here\n  agent A # trailing"))
        assert [a.name for a in doc.agents] == ["A"]

    def test_empty_blocks_allowed(self):
        doc = parse_scenario(
            probe(
                "  agent A\n"
                "  resource S : Software\n"
                "  functionality go offeredBy S\n"
                "  step Only {\n"
                "    agent: A\n"
                "    trigger: go\n"
                '    description: "noop"\n'
                "    pre { }\n"
                "    add { }\n"
                "    remove { }\n"
                "  }\n"
                "  order Only"
            )
        )
        step = doc.transitions[0]
        assert step.preconditions == ()
        assert step.post_add == ()
        assert step.post_remove == ()


class TestSyntaxErrors:
    def test_unbalanced_brace(self):
        with pytest.raises(ScenarioSyntaxError):
            parse_scenario('scenario Broken {\n  goal: "x"\n')

    def test_unknown_declaration(self):
        with pytest.raises(ScenarioSyntaxError) as err:
            parse_scenario(probe("  widget W"))
        assert err.value.diagnostics[0].code == "E-SYNTAX"

    def test_unterminated_string(self):
        with pytest.raises(ScenarioSyntaxError):
            parse_scenario('scenario Broken {\n  goal: "never closed\n}\n')

    def test_step_missing_trigger(self):
        with pytest.raises(ScenarioSyntaxError) as err:
            parse_scenario(
                probe('  agent A\n  step S {\n    agent: A\n    description: "d"\n  }')
            )
        assert "trigger" in err.value.diagnostics[0].message

    def test_content_after_closing_brace(self):
        with pytest.raises(ScenarioSyntaxError):
            parse_scenario("scenario Tiny {\n}\nleftover")

    def test_syntax_error_carries_position(self):
        with pytest.raises(ScenarioSyntaxError) as err:
            parse_scenario("scenario Tiny {\n  resource R\n}\n")
        span = err.value.diagnostics[0].span
        assert span is not None and span.line == 3


class TestValidation:
    def test_undeclared_step_agent(self):
        doc = parse_scenario(
            probe(
                "  resource S : Software\n"
                "  functionality go offeredBy S\n"
                "  step S1 {\n"
                "    agent: Ghost\n"
                "    trigger: go\n"
                '    description: "d"\n'
                "  }\n"
                "  order S1"
            )
        )
        assert codes(validate_scenario(doc)) == ["E-UNRESOLVED-AGENT"]

    def test_undeclared_trigger(self):
        doc = parse_scenario(
            probe(
                "  agent A\n"
                "  step S1 {\n"
                "    agent: A\n"
                "    trigger: ghost\n"
                '    description: "d"\n'
                "  }\n"
                "  order S1"
            )
        )
        assert codes(validate_scenario(doc)) == ["E-UNRESOLVED-TRIGGER"]

    def test_functionality_needs_declared_offerer(self):
        doc = parse_scenario(probe("  functionality go offeredBy Ghost"))
        assert codes(validate_scenario(doc)) == ["E-UNRESOLVED-RESOURCE"]

    def test_functionality_offerer_kind(self):
        doc = parse_scenario(
            probe("  resource H : RuntimeHost\n  functionality go offeredBy H")
        )
        assert codes(validate_scenario(doc)) == ["E-OFFEREDBY-KIND"]

    def test_duplicate_declaration(self):
        doc = parse_scenario(probe("  agent A\n  resource A : Network"))
        assert codes(validate_scenario(doc)) == ["E-DUP-DECL"]

    def test_unknown_fact_name(self):
        doc = parse_scenario(
            probe("  resource H : RuntimeHost\n  fact Ghost controls H")
        )
        assert codes(validate_scenario(doc)) == ["E-UNRESOLVED-NAME"]

    def test_label_signature_mismatch(self):
        doc = parse_scenario(
            probe(
                "  resource H : RuntimeHost\n"
                "  resource G : RuntimeHost\n"
                "  fact H installedOn G"
            )
        )
        assert codes(validate_scenario(doc)) == ["E-LABEL-SIGNATURE"]

    def test_unknown_label_warns_once(self):
        doc = parse_scenario(
            probe(
                "  resource H : RuntimeHost\n"
                "  resource G : RuntimeHost\n"
                "  fact H tickles G\n"
                "  fact G tickles H"
            )
        )
        diags = validate_scenario(doc)
        assert codes(diags) == ["W-UNKNOWN-LABEL"]
        assert diags[0].severity == WARNING

    def test_duplicate_fact_warns(self):
        doc = parse_scenario(
            probe(
                "  agent A\n"
                "  resource H : RuntimeHost\n"
                "  fact A controls H\n"
                "  fact A controls H"
            )
        )
        diags = validate_scenario(doc)
        assert codes(diags) == ["W-DUP-FACT"]

    def test_add_remove_overlap(self):
        doc = parse_scenario(
            probe(
                "  agent A\n"
                "  resource H : RuntimeHost\n"
                "  resource S : Software\n"
                "  functionality go offeredBy S\n"
                "  step S1 {\n"
                "    agent: A\n"
                "    trigger: go\n"
                '    description: "d"\n'
                "    add { fact A controls H }\n"
                "    remove { fact A controls H }\n"
                "  }\n"
                "  order S1"
            )
        )
        diags = validate_scenario(doc)
        assert codes(diags) == ["E-ADD-REMOVE-OVERLAP"]
        assert diags[0].severity == ERROR

    def test_order_references_unknown_step(self):
        doc = parse_scenario(probe("  order Ghost"))
        assert codes(validate_scenario(doc)) == ["E-PATH-UNKNOWN"]

    def test_order_lists_step_twice(self):
        doc = parse_scenario(
            probe(
                "  agent A\n"
                "  resource S : Software\n"
                "  functionality go offeredBy S\n"
                "  step S1 {\n"
                "    agent: A\n"
                "    trigger: go\n"
                '    description: "d"\n'
                "  }\n"
                "  order S1 -> S1"
            )
        )
        assert codes(validate_scenario(doc)) == ["E-PATH-DUP"]

    def test_step_missing_from_order(self):
        doc = parse_scenario(
            probe(
                "  agent A\n"
                "  resource S : Software\n"
                "  functionality go offeredBy S\n"
                "  step S1 {\n"
                "    agent: A\n"
                "    trigger: go\n"
                '    description: "d"\n'
                "  }"
            )
        )
        assert codes(validate_scenario(doc)) == ["E-PATH-INCOMPLETE"]

    def test_mutated_fact_object_detected(self, snif_doc):
        """Validation, not parsing, is what catches dangling references."""
        bad = FactDecl("Attacker", "controls", "Mothership", False)
        doc = dataclasses.replace(snif_doc, facts=snif_doc.facts + (bad,))
        assert codes(validate_scenario(doc)) == ["E-UNRESOLVED-NAME"]
