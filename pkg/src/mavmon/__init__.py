"""mavmon: compile refined session-typed protocol specs into MAVLink
runtime monitors (reference interpreter + generated C99 state machines)."""

from .dialect import Dialect, MessageField, MessageSchema, load_dialect, parse_dialect
from .diff_oracle import differential_corpus, generate_corpus, run_differential
from .dsl import parse_protocol, print_protocol
from .graph import StateGraph, build_graph, compress_epsilon, to_dot
from .interp import DecodedMessage, MonitorConfig, Verdict, monitor_init, monitor_step, run_trace
from .pipeline import Compiled, compile_protocol, load_protocol
from .protocol import GlobalType, Participant, PayloadBinder, ProtocolSpec
from .refinement import eval_expr, free_variables, validate_refinement
from .resolve import resolve
from .synth import SourceUnit, emit_monitor, emit_prefilter, translate_guard
from .wf import WfReport, check_all, check_fidelity, check_guarded_recursion, check_progress, check_unique_labels

__version__ = "0.1.0"

__all__ = [
    "Compiled", "DecodedMessage", "Dialect", "GlobalType", "MessageField",
    "MessageSchema", "MonitorConfig", "Participant", "PayloadBinder",
    "ProtocolSpec", "SourceUnit", "StateGraph", "Verdict", "WfReport",
    "build_graph", "check_all", "check_fidelity", "check_guarded_recursion",
    "check_progress", "check_unique_labels", "compile_protocol",
    "compress_epsilon", "differential_corpus", "emit_monitor",
    "emit_prefilter", "eval_expr", "free_variables", "generate_corpus",
    "load_dialect", "load_protocol", "monitor_init", "monitor_step",
    "parse_dialect", "parse_protocol", "print_protocol", "resolve",
    "run_differential", "run_trace", "to_dot", "translate_guard",
    "validate_refinement",
]
