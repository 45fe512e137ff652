"""Command-line interface.

Subcommands: check, graph, synth, simulate, bench, diff.  `--json` switches
machine-readable output.  Exit codes: 0 ok, 1 violation or WF failure,
2 usage error (argparse's own convention).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from tempfile import TemporaryDirectory

from . import bench as bench_mod
from . import cdriver
from . import diff_oracle
from .errors import BuildFailed, DifferentialMismatch, MavmonError
from .graph import graph_to_json, to_dot
from .pipeline import Compiled, load_protocol
from .proxy import run_proxy_session, run_trace_file, run_udp_proxy
from .scenarios import generate_scenario, parse_scenario_name
from .synth import emit_monitor, lexical_check


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--spec", required=True, help="protocol DSL file (.rmpst)")
    p.add_argument("--dialect", required=True, help="MAVLink dialect XML")
    p.add_argument("--json", action="store_true", help="machine-readable output")


def _load(args) -> Compiled:
    return load_protocol(args.spec, args.dialect,
                         per_choice=getattr(args, "per_choice", False))


def cmd_check(args) -> int:
    compiled = _load(args)
    report = compiled.report
    if args.json:
        print(json.dumps(report.to_json(), indent=2))
    else:
        for line in report.lines():
            print(line)
    return 0 if report.overall else 1


def cmd_graph(args) -> int:
    compiled = _load(args)
    g = compiled.pre_graph
    if args.compressed:
        if compiled.graph is None:
            print("cannot compress: well-formedness failed", file=sys.stderr)
            return 1
        g = compiled.graph
    text = json.dumps(graph_to_json(g), indent=2) if args.json else to_dot(g)
    if args.out and args.out != "-":
        Path(args.out).write_text(text)
    else:
        print(text, end="")
    return 0


def cmd_synth(args) -> int:
    compiled = _load(args)
    if not compiled.report.overall:
        for line in compiled.report.lines():
            print(line, file=sys.stderr)
        return 1
    unit = emit_monitor(compiled.graph, compiled.spec, compiled.report,
                        fail_stop=args.fail_stop,
                        use_mavlink_headers=args.use_mavlink_headers)
    lex = lexical_check(unit)
    if not lex.ok:
        print(f"structural check failed: {lex.offenders}", file=sys.stderr)
        return 1
    paths = cdriver.write_unit(unit, args.out, with_support=not args.use_mavlink_headers)
    if args.json:
        print(json.dumps({
            "files": {k: str(v) for k, v in paths.items()},
            "prefilter": list(unit.prefilter_table),
            "context": [list(c) for c in unit.context_layout],
        }, indent=2))
    else:
        for k, v in paths.items():
            print(f"{k}: {v}")
    return 0


def cmd_simulate(args) -> int:
    compiled = _load(args)
    if compiled.graph is None:
        print("well-formedness failed; run `check`", file=sys.stderr)
        return 1

    if args.udp:
        stats = run_udp_proxy(compiled, args.gcs_port, args.uav_port,
                              max_messages=args.max_messages)
        print(json.dumps(stats.to_json(), indent=2))
        return 0 if stats.dropped == 0 else 1

    if args.trace:
        lines = Path(args.trace).read_text().splitlines()
        log = run_trace_file(compiled, lines, fail_stop=args.fail_stop)
        for doc in log:
            print(json.dumps(doc))
        return 0 if all(d["verdict"] != "DROP" for d in log) else 1

    name, params = parse_scenario_name(args.scenario)
    scenario = generate_scenario(name, params, compiled.dialect, seed=args.seed)
    stats, log = run_proxy_session(compiled, scenario, engine=args.engine,
                                   fail_stop=args.fail_stop)
    if args.verdicts:
        Path(args.verdicts).write_text("\n".join(json.dumps(d) for d in log) + "\n")
    if args.json:
        print(json.dumps({"scenario": scenario.name, "description": scenario.description,
                          "stats": stats.to_json(), "verdicts": log}, indent=2))
    else:
        print(f"scenario   {scenario.name}{scenario.params}: {scenario.description}")
        print(f"forwarded  {stats.forwarded}")
        print(f"dropped    {stats.dropped}")
        print(f"passthrough {stats.passthrough}")
        print(f"terminal   {stats.terminal}")
    return 0 if stats.dropped == 0 else 1


def cmd_bench(args) -> int:
    compiled = _load(args)
    if compiled.graph is None:
        print("well-formedness failed; run `check`", file=sys.stderr)
        return 1
    report = bench_mod.bench_step_latency(compiled, engine=args.engine,
                                          iterations=args.iterations)
    if args.json:
        print(json.dumps(report.to_json(), indent=2))
    else:
        for row in report.rows():
            print("  ".join(f"{cell:<38}" if i == 1 else f"{cell:<10}"
                            for i, cell in enumerate(row)).rstrip())
    if args.out:
        paths = bench_mod.write_report(report, args.out)
        print(f"wrote {paths['csv']} and {paths['png']}", file=sys.stderr)
    return 0


def cmd_diff(args) -> int:
    compiled = _load(args)
    if compiled.graph is None:
        print("well-formedness failed; run `check`", file=sys.stderr)
        return 1
    corpus = diff_oracle.generate_corpus(compiled, args.count, args.seed)
    unit = emit_monitor(compiled.graph, compiled.spec, compiled.report)
    with TemporaryDirectory(prefix="mavmon-diff-") as tmp:
        work = args.keep or tmp
        try:
            exe = cdriver.build_driver(unit, work)
            compared = diff_oracle.run_differential(compiled, corpus, exe)
        except BuildFailed as exc:
            print(f"build failed: {exc}", file=sys.stderr)
            return 1
        except DifferentialMismatch as exc:
            print(f"MISMATCH: {exc}", file=sys.stderr)
            return 1
    if args.json:
        print(json.dumps({"traces": len(corpus), "steps": compared, "mismatches": 0}))
    else:
        print(f"{len(corpus)} traces, {compared} steps compared, 0 mismatches")
    return 0


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="mavmon",
                                  description="session-typed MAVLink monitor toolchain")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="run the four well-formedness checks")
    _add_common(p)
    p.add_argument("--per-choice", action="store_true",
                   help="relax label uniqueness to per-choice scope")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("graph", help="print the state graph (DOT, or JSON with --json)")
    _add_common(p)
    p.add_argument("--compressed", action="store_true", help="epsilon-compressed form")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(fn=cmd_graph)

    p = sub.add_parser("synth", help="emit the C99 monitor")
    _add_common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--fail-stop", action="store_true",
                   help="latch a poisoned state on violation instead of sticky-state")
    p.add_argument("--use-mavlink-headers", action="store_true",
                   help="emit library-call style decoding instead of self-contained decoders")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("simulate", help="run a scenario or trace through the proxy")
    _add_common(p)
    p.add_argument("--scenario", help="e.g. happy(100), truncated(100,50), oversized_count")
    p.add_argument("--trace", help="JSON-lines trace file instead of a scenario")
    p.add_argument("--engine", choices=("interpreter", "compiled"), default="interpreter")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fail-stop", action="store_true")
    p.add_argument("--verdicts", help="write the verdict log to this file")
    p.add_argument("--udp", action="store_true", help="relay live loopback UDP traffic")
    p.add_argument("--gcs-port", type=int, default=14550)
    p.add_argument("--uav-port", type=int, default=14551)
    p.add_argument("--max-messages", type=int, default=0)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("bench", help="step-latency microbenchmark")
    _add_common(p)
    p.add_argument("--engine", choices=("interpreter", "compiled"), default="interpreter")
    p.add_argument("--iterations", type=int, default=10_000)
    p.add_argument("--out", help="write latency.csv and latency.png here")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("diff", help="differential corpus: interpreter vs compiled monitor")
    _add_common(p)
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--seed", type=int, default=20260810)
    p.add_argument("--keep", help="keep build artifacts in this directory")
    p.set_defaults(fn=cmd_diff)

    return top


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "simulate" and not (args.scenario or args.trace or args.udp):
        build_parser().error("simulate needs --scenario, --trace, or --udp")
    try:
        return args.fn(args)
    except (MavmonError, OSError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
