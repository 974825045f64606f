"""Property graph construction and the conjunctive pattern matcher."""

import json
import random
import time

import pytest

from attackforge.graph import (
    HAS_STEP,
    NEXT,
    OFFERS,
    SOURCE,
    TARGET,
    Pattern,
    PatternEdge,
    PropertyGraph,
    build_graph,
    export_graph,
    graph_from_json,
    match_pattern,
    named_node,
    node_constraint,
)

from conftest import FIXTURE_PATH
from oracles import (
    brute_force_match,
    expected_graph_counts,
    random_graph,
    random_pattern,
    tally_source,
)


COUNTS_PATH = FIXTURE_PATH.parent / "snifattack_counts.json"


class TestBuildGraph:
    def test_counts_match_text_tally(self, snif_source, snif_graph):
        """Node and edge totals recomputed from the raw scenario text."""
        counts = tally_source(snif_source)
        nodes, edges = expected_graph_counts(counts)
        assert len(snif_graph.nodes) == nodes == 54
        assert len(snif_graph.edges) == edges == 66

    def test_counts_match_hand_tally(self, snif_source, snif_graph):
        """The hand-counted record agrees with both the build and the text."""
        recorded = json.loads(COUNTS_PATH.read_text(encoding="utf-8"))
        tallied = tally_source(snif_source)
        assert tallied["agent"] == recorded["agents"]
        assert tallied["resource"] == recorded["resources"]
        assert tallied["functionality"] == recorded["functionalities"]
        assert tallied["step"] == recorded["transitions"]
        assert tallied["between"] == recorded["between_facts"]
        assert tallied["characterizing"] == recorded["characterizing_facts"]
        assert len(snif_graph.nodes) == recorded["nodes"]
        assert len(snif_graph.edges) == recorded["edges"]

    def test_ids_follow_declaration_order(self, snif_doc, snif_graph):
        assert snif_graph.nodes[0].label == "agent"
        assert snif_graph.nodes[0].attrs["name"] == "Attacker"
        first_resource = len(snif_doc.agents)
        assert snif_graph.nodes[first_resource].attrs["name"] == "AttackerHost"
        assert snif_graph.nodes[first_resource].attrs["resource_type"] == "RuntimeHost"

    def test_reified_between_facts(self, snif_graph):
        """Every between-resources fact is a node with one source and one target."""
        for node in snif_graph.nodes.values():
            if node.label != "property_betweenresources":
                continue
            assert len(snif_graph.into(node.id, SOURCE)) == 1
            assert len(snif_graph.out(node.id, TARGET)) == 1
            assert "label" in node.attrs

    def test_reified_characterizing_facts(self, snif_graph):
        props = snif_graph.nodes_with_label("property_resource")
        assert len(props) == 1
        node = snif_graph.nodes[props[0]]
        assert node.attrs["label"] == "hasDefaultCredentials"
        assert node.attrs["value"] == "true"
        assert len(snif_graph.into(node.id, SOURCE)) == 1
        assert snif_graph.out(node.id, TARGET) == []

    def test_attack_path_node(self, snif_doc, snif_graph):
        path_id = snif_graph.find("attack_path", "SnifAttack")
        assert path_id is not None
        assert snif_graph.nodes[path_id].attrs["goal"] == snif_doc.goal
        assert len(snif_graph.out(path_id, HAS_STEP)) == 6

    def test_next_chain_follows_order(self, snif_graph):
        scan = snif_graph.find("transition", "Scan")
        assert snif_graph.out(scan, NEXT) == [snif_graph.find("transition", "UseOfDefaults")]
        checkmate = snif_graph.find("transition", "Checkmate")
        assert snif_graph.out(checkmate, NEXT) == []

    def test_offers_edges(self, snif_graph):
        scanner = named_node(snif_graph, "PortScanner")
        scans = snif_graph.find("functionality", "scans")
        assert snif_graph.has_edge(scanner, OFFERS, scans)

    def test_build_is_deterministic(self, snif_doc):
        a = export_graph(build_graph(snif_doc), "json")
        b = export_graph(build_graph(snif_doc), "json")
        assert a == b

    def test_duplicate_edges_collapse(self):
        g = PropertyGraph()
        g.add_node("alpha")
        g.add_node("alpha")
        g.add_edge(0, "rel", 1)
        g.add_edge(0, "rel", 1)
        assert len(g.edges) == 1

    def test_edge_endpoints_must_exist(self):
        g = PropertyGraph()
        g.add_node("alpha")
        with pytest.raises(KeyError):
            g.add_edge(0, "rel", 7)

    def test_copy_is_independent(self, snif_graph):
        dup = snif_graph.copy()
        dup.add_node("extra")
        assert len(dup.nodes) == len(snif_graph.nodes) + 1
        assert export_graph(snif_graph, "json") != export_graph(dup, "json")


class TestMatcher:
    def test_homomorphism_allows_shared_binding(self):
        g = PropertyGraph()
        g.add_node("alpha")
        pattern = Pattern((node_constraint("x", "alpha"), node_constraint("y", "alpha")))
        assert match_pattern(g, pattern) == [{"x": 0, "y": 0}]

    def test_results_are_lexicographic(self):
        g = PropertyGraph()
        for _ in range(3):
            g.add_node("alpha")
        pattern = Pattern((node_constraint("x", "alpha"), node_constraint("y", "alpha")))
        found = match_pattern(g, pattern)
        assert [(b["x"], b["y"]) for b in found] == [
            (x, y) for x in range(3) for y in range(3)
        ]

    def test_attr_constraints_filter(self):
        g = PropertyGraph()
        g.add_node("alpha", k="x")
        g.add_node("alpha", k="y")
        pattern = Pattern((node_constraint("n", "alpha", k="y"),))
        assert match_pattern(g, pattern) == [{"n": 1}]

    def test_edge_constraints_filter(self):
        g = PropertyGraph()
        g.add_node("alpha")
        g.add_node("beta")
        g.add_node("beta")
        g.add_edge(0, "rel", 2)
        pattern = Pattern(
            (node_constraint("a", "alpha"), node_constraint("b", "beta")),
            (PatternEdge("a", "rel", "b"),),
        )
        assert match_pattern(g, pattern) == [{"a": 0, "b": 2}]

    def test_duplicate_variable_rejected(self):
        with pytest.raises(ValueError):
            Pattern((node_constraint("x"), node_constraint("x")))

    def test_undeclared_edge_variable_rejected(self):
        with pytest.raises(ValueError):
            Pattern((node_constraint("x"),), (PatternEdge("x", "rel", "y"),))

    def test_agrees_with_brute_force(self):
        """Randomized cross-check against exhaustive enumeration."""
        rng = random.Random(20260819)
        for _ in range(200):
            g = random_graph(rng)
            pattern = random_pattern(rng)
            assert match_pattern(g, pattern) == brute_force_match(g, pattern)

    def test_brute_force_agreement_is_fast(self):
        start = time.monotonic()
        rng = random.Random(7)
        for _ in range(100):
            g = random_graph(rng)
            pattern = random_pattern(rng)
            assert match_pattern(g, pattern) == brute_force_match(g, pattern)
        assert time.monotonic() - start < 10.0


class TestExport:
    def test_json_round_trip(self, snif_graph):
        text = export_graph(snif_graph, "json")
        restored = graph_from_json(text)
        assert export_graph(restored, "json") == text

    def test_dot_export(self, snif_graph):
        dot = export_graph(snif_graph, "dot")
        assert dot.startswith("digraph")
        assert "SnifAttack" in dot

    def test_unknown_format_rejected(self, snif_graph):
        with pytest.raises(ValueError):
            export_graph(snif_graph, "gexf")
