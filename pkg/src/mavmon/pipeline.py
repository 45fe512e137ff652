"""End-to-end loading: DSL + dialect -> resolved spec -> graphs -> WF report."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .dialect import Dialect, load_dialect
from .dsl import parse_protocol
from .graph import StateGraph, build_graph, check_definite_assignment, compress_epsilon
from .protocol import ProtocolSpec
from .resolve import resolve
from .wf import WfReport, check_all


@dataclass(frozen=True)
class Compiled:
    spec: ProtocolSpec
    dialect: Dialect
    pre_graph: StateGraph
    report: WfReport
    graph: StateGraph | None  # compressed; None when WF failed


def compile_protocol(spec_text: str, dialect: Dialect, per_choice: bool = False) -> Compiled:
    spec = resolve(parse_protocol(spec_text), dialect)
    pre = build_graph(spec)
    report = check_all(pre, per_choice=per_choice)
    graph = None
    if report.overall:
        graph = compress_epsilon(pre)
        check_definite_assignment(graph)
    return Compiled(spec=spec, dialect=dialect, pre_graph=pre, report=report, graph=graph)


def load_protocol(spec_path: str | Path, dialect_path: str | Path,
                  per_choice: bool = False) -> Compiled:
    dialect = load_dialect(dialect_path)
    return compile_protocol(Path(spec_path).read_text(), dialect, per_choice=per_choice)
