"""attackforge: compile attack scenarios into TOSCA templates and bundles.

The pipeline has three stages.  A scenario file is parsed and validated,
then lifted into a labeled property graph annotated with its state chain
(the computation-independent model).  Transformation rules project that
graph onto a TOSCA service template with an abstract workflow (the
platform-independent model).  Finally the template is rendered into an
inventory, playbooks, role skeletons and a CSAR archive (the
platform-specific model), and a simulator can dry-run the result against
the state chain.
"""

from .context import check_chain, derive_context, state_at
from .graph import build_graph, export_graph, match_pattern
from .pim import (
    emit_service_template,
    generate_topology,
    generate_workflow,
    infer_targets,
    init_template,
)
from .psm import (
    generate_attack_playbook,
    generate_enrichment_playbook,
    generate_inventory,
    generate_roles,
    package_bundle,
)
from .scenario import parse_scenario, validate_scenario
from .sim import render_trace, simulate
from .tosca import parse_service_template, validate_template

__version__ = "0.1.0"

__all__ = [
    "build_graph",
    "check_chain",
    "derive_context",
    "emit_service_template",
    "export_graph",
    "generate_attack_playbook",
    "generate_enrichment_playbook",
    "generate_inventory",
    "generate_roles",
    "generate_topology",
    "generate_workflow",
    "infer_targets",
    "init_template",
    "match_pattern",
    "package_bundle",
    "parse_scenario",
    "parse_service_template",
    "render_trace",
    "simulate",
    "state_at",
    "validate_scenario",
    "validate_template",
    "__version__",
]
