"""Command-line front door wiring the pipeline end to end.

Four subcommands mirror the pipeline stages: ``check`` stops after scenario
validation, ``graph`` reports the knowledge graph, ``build`` writes the full
output bundle, and ``simulate`` dry-runs the generated attack playbook.

Exit codes are uniform across subcommands: 0 means success, 1 means a
domain diagnostic (validation, generation, or a simulated failure), and 2
means an environmental problem such as unreadable input, a syntax error, or
an unwritable output directory.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

from .context import derive_context
from .diagnostics import (
    Diagnostic,
    PipelineError,
    ScenarioSyntaxError,
    emit,
    error,
    has_errors,
)
from .graph import PropertyGraph, build_graph, export_graph
from .pim import (
    RuleApplication,
    ServiceTemplate,
    emit_service_template,
    generate_topology,
    generate_workflow,
    infer_targets,
    init_template,
    render_rules_trace,
)
from .psm import (
    PsmBundle,
    generate_attack_playbook,
    generate_enrichment_playbook,
    generate_inventory,
    generate_roles,
    package_bundle,
)
from .scenario import ScenarioDocument, parse_scenario, validate_scenario
from .sim import render_trace, simulate
from .tosca import validate_template

DEFAULT_OUT = "out"


@dataclass
class RunConfig:
    input: str
    out_dir: str | None = None
    tie_break: str = "error"
    strict_remove: bool = False
    emit_dot: bool = False
    skip_validate: bool = False
    lenient: bool = False


class _Exit(Exception):
    """Internal control flow carrying a process exit code."""

    def __init__(self, code: int):
        super().__init__(code)
        self.code = code


def _load_scenario(config: RunConfig) -> ScenarioDocument:
    try:
        source = Path(config.input).read_text(encoding="utf-8")
    except OSError as exc:
        reason = exc.strerror or str(exc)
        emit([error("E-IO", f"cannot read {config.input}: {reason}")])
        raise _Exit(2) from exc
    try:
        doc = parse_scenario(source)
    except ScenarioSyntaxError as exc:
        emit(exc.diagnostics)
        raise _Exit(2) from exc
    diags = validate_scenario(doc)
    emit(diags)
    if has_errors(diags):
        raise _Exit(1)
    return doc


def _derive(config: RunConfig, g: PropertyGraph, doc: ScenarioDocument, enforce: bool):
    annotated, chain = derive_context(
        g, doc, strict_remove=config.strict_remove, enforce_preconditions=enforce
    )
    emit(chain.warnings)
    if has_errors(chain.warnings):
        raise _Exit(1)
    return annotated, chain


def _generate_template(
    config: RunConfig, annotated: PropertyGraph, chain
) -> tuple[ServiceTemplate, list[RuleApplication]]:
    tpl = init_template()
    trace: list[RuleApplication] = []
    generate_topology(annotated, tpl, trace)
    generate_workflow(annotated, tpl, trace, lenient=config.lenient)
    notes: list[Diagnostic] = []
    infer_targets(
        annotated, chain, tpl, tie_break=config.tie_break, trace=trace, notes=notes
    )
    emit(notes)
    return tpl, trace


def cmd_check(config: RunConfig) -> int:
    doc = _load_scenario(config)
    print(f"{config.input}: ok ({doc.name}, {len(doc.transitions)} steps)")
    return 0


def cmd_graph(config: RunConfig) -> int:
    doc = _load_scenario(config)
    g = build_graph(doc)
    print(f"graph: nodes={len(g.nodes)} edges={len(g.edges)}")
    annotated, chain = _derive(config, g, doc, enforce=True)
    print(
        f"context: nodes={len(annotated.nodes)} edges={len(annotated.edges)} "
        f"states={len(chain.states)}"
    )
    if config.out_dir is not None:
        base = Path(config.out_dir)
        base.mkdir(parents=True, exist_ok=True)
        (base / "graph.json").write_text(export_graph(annotated, "json"), encoding="utf-8")
        print(f"{config.out_dir}/graph.json")
        if config.emit_dot:
            (base / "graph.dot").write_text(export_graph(annotated, "dot"), encoding="utf-8")
            print(f"{config.out_dir}/graph.dot")
    return 0


def cmd_build(config: RunConfig) -> int:
    doc = _load_scenario(config)
    g = build_graph(doc)
    annotated, chain = _derive(config, g, doc, enforce=True)
    tpl, trace = _generate_template(config, annotated, chain)
    if not config.skip_validate:
        diags = validate_template(tpl)
        emit(diags)
        if has_errors(diags):
            return 1
    attack = generate_attack_playbook(tpl, doc)
    bundle = PsmBundle(
        scenario=doc.name,
        inventory=generate_inventory(tpl, doc),
        attack_playbook=attack,
        enrichment_playbook=generate_enrichment_playbook(tpl),
        roles=generate_roles(attack, doc),
        service_template_text=emit_service_template(tpl),
        rules_trace_text=render_rules_trace(trace),
    )
    out_dir = config.out_dir if config.out_dir is not None else DEFAULT_OUT
    manifest = package_bundle(bundle, out_dir)
    if config.emit_dot:
        dot_path = Path(out_dir) / "cim" / "graph.dot"
        dot_path.parent.mkdir(parents=True, exist_ok=True)
        dot_path.write_text(export_graph(annotated, "dot"), encoding="utf-8")
        manifest.append("cim/graph.dot")
    for relative in manifest:
        print(f"{out_dir}/{relative}")
    return 0


def cmd_simulate(config: RunConfig) -> int:
    doc = _load_scenario(config)
    g = build_graph(doc)
    annotated, chain = _derive(config, g, doc, enforce=False)
    tpl, _ = _generate_template(config, annotated, chain)
    attack = generate_attack_playbook(tpl, doc)
    roles = generate_roles(attack, doc)
    inventory = generate_inventory(tpl, doc)
    run = simulate(chain, attack, roles, inventory)
    text = render_trace(run)
    sys.stdout.write(text)
    if config.out_dir is not None:
        trace_path = Path(config.out_dir) / "psm" / "trace.txt"
        trace_path.parent.mkdir(parents=True, exist_ok=True)
        trace_path.write_text(text, encoding="utf-8")
    return 0 if run.failed == 0 else 1


_HANDLERS = {
    "check": cmd_check,
    "graph": cmd_graph,
    "build": cmd_build,
    "simulate": cmd_simulate,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attackforge",
        description="Compile attack scenarios into TOSCA templates and orchestration bundles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    summaries = {
        "check": "parse and validate a scenario",
        "graph": "build the knowledge graph and report its size",
        "build": "run the full pipeline and write the output bundle",
        "simulate": "dry-run the generated attack playbook",
    }
    for name, text in summaries.items():
        command = sub.add_parser(name, help=text)
        command.add_argument("scenario", help="path to the scenario file")
        command.add_argument(
            "-o",
            "--out",
            dest="out_dir",
            default=None,
            metavar="DIR",
            help="output directory (build defaults to 'out'; other commands write only when given)",
        )
        command.add_argument(
            "--tie-break",
            dest="tie_break",
            choices=("error", "first"),
            default="error",
            help="how to settle an ambiguous step target",
        )
        command.add_argument(
            "--strict-remove",
            action="store_true",
            help="treat removal of an absent fact as an error instead of a warning",
        )
        command.add_argument(
            "--emit-dot",
            action="store_true",
            help="additionally export the annotated graph in dot format",
        )
        command.add_argument(
            "--skip-validate",
            action="store_true",
            help="skip service-template validation during build",
        )
        command.add_argument(
            "--lenient",
            action="store_true",
            help="when a trigger is declared twice, let the first description win",
        )
    return parser


def _run(handler, config: RunConfig) -> int:
    try:
        return handler(config)
    except _Exit as stop:
        return stop.code
    except PipelineError as exc:
        emit([exc.diagnostic])
        return 1
    except OSError as exc:
        emit([error("E-IO", str(exc))])
        return 2


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    config = RunConfig(
        input=args.scenario,
        out_dir=args.out_dir,
        tie_break=args.tie_break,
        strict_remove=args.strict_remove,
        emit_dot=args.emit_dot,
        skip_validate=args.skip_validate,
        lenient=args.lenient,
    )
    return _run(_HANDLERS[args.command], config)


if __name__ == "__main__":
    sys.exit(main())
