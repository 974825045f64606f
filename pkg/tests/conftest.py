"""Shared fixtures: the bundled scenario parsed once, pipeline runs per test."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import pytest

from attackforge import scenario as scenario_module
from attackforge.context import StateChain, derive_context
from attackforge.graph import PropertyGraph, build_graph
from attackforge.pim import (
    RuleApplication,
    ServiceTemplate,
    generate_topology,
    generate_workflow,
    infer_targets,
    init_template,
)
from attackforge.scenario import ScenarioDocument, parse_scenario, validate_scenario

FIXTURE_PATH = Path(scenario_module.__file__).parent / "fixtures" / "snifattack.atk"
GOLDEN_DIR = Path(__file__).parent / "golden"


def golden(name: str) -> str:
    return (GOLDEN_DIR / name).read_text(encoding="utf-8")


@dataclass
class PipelineRun:
    """Everything the model-to-model stages produce for one scenario."""

    doc: ScenarioDocument
    graph: PropertyGraph
    chain: StateChain
    template: ServiceTemplate
    trace: list[RuleApplication] = field(default_factory=list)


def run_pipeline(doc: ScenarioDocument, base: PropertyGraph | None = None) -> PipelineRun:
    """Parse-to-template pipeline with default settings, for tests."""
    if base is None:
        base = build_graph(doc)
    annotated, chain = derive_context(base, doc)
    tpl = init_template()
    trace: list[RuleApplication] = []
    generate_topology(annotated, tpl, trace)
    generate_workflow(annotated, tpl, trace)
    infer_targets(annotated, chain, tpl, trace=trace)
    return PipelineRun(doc=doc, graph=annotated, chain=chain, template=tpl, trace=trace)


@pytest.fixture(scope="session")
def snif_source() -> str:
    return FIXTURE_PATH.read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def snif_doc(snif_source: str) -> ScenarioDocument:
    doc = parse_scenario(snif_source)
    assert validate_scenario(doc) == []
    return doc


@pytest.fixture(scope="session")
def snif_graph(snif_doc: ScenarioDocument) -> PropertyGraph:
    return build_graph(snif_doc)


@pytest.fixture()
def pipeline(snif_doc: ScenarioDocument, snif_graph: PropertyGraph) -> PipelineRun:
    return run_pipeline(snif_doc, snif_graph)
