"""Structural controllability checks for interconnected linear systems."""

from .model import (
    BipartiteGraph,
    Digraph,
    InterconnectedSystem,
    Interconnection,
    ModelError,
    SparsityPattern,
    Subsystem,
    assemble_global,
    condensed_graph,
    load,
    loads,
    dumps,
    random_serial_system,
    random_system,
    save,
)
from .centralized import Verdict, check_certificate, numeric_probe, verify, verify_via_cacti
from .runtime import (
    AgentContext,
    DeadlockError,
    ProtocolError,
    Recv,
    RunResult,
    Send,
    Trace,
    run,
)
from .distributed import (
    boundary_vertex_count,
    controlled,
    controlled_program,
    reached,
    reached_program,
)
from .serial import (
    SerialCheck,
    check_lemma4,
    check_lemma4_details,
    is_serial,
    run_seq_strt_ctl,
    seq_strt_ctl,
    seq_strt_ctl_variant,
)
from .similar import (
    CheckResult,
    SimilarSystemSpec,
    check_cycle_cover,
    check_via_collapse,
    expand,
    precondition_report,
    random_similar_spec,
    similar_dumps,
    similar_loads,
)

__all__ = [
    "AgentContext",
    "BipartiteGraph",
    "CheckResult",
    "DeadlockError",
    "Digraph",
    "InterconnectedSystem",
    "Interconnection",
    "ModelError",
    "ProtocolError",
    "Recv",
    "RunResult",
    "Send",
    "SerialCheck",
    "SimilarSystemSpec",
    "SparsityPattern",
    "Subsystem",
    "Trace",
    "Verdict",
    "assemble_global",
    "boundary_vertex_count",
    "check_certificate",
    "check_cycle_cover",
    "check_lemma4",
    "check_lemma4_details",
    "check_via_collapse",
    "condensed_graph",
    "controlled",
    "controlled_program",
    "dumps",
    "expand",
    "is_serial",
    "load",
    "loads",
    "numeric_probe",
    "precondition_report",
    "random_serial_system",
    "random_similar_spec",
    "random_system",
    "reached",
    "reached_program",
    "run",
    "run_seq_strt_ctl",
    "save",
    "seq_strt_ctl",
    "seq_strt_ctl_variant",
    "similar_dumps",
    "similar_loads",
    "verify",
    "verify_via_cacti",
]

__version__ = "0.1.0"
