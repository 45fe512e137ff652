"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run `pytest tests/test_acceptance.py -v -s` to see the per-criterion lines.
The two criteria marked `ctoolchain` need a system C compiler; everything
else runs without one.
"""

import json
import random

import pytest

from conftest import FIXTURES, TEST_FIXTURES
from mavmon import cdriver, diff_oracle
from mavmon.dsl import parse_expr, parse_protocol
from mavmon.errors import DifferentialMismatch
from mavmon.graph import build_graph, compress_epsilon, graph_from_json
from mavmon.interp import DecodedMessage, run_trace
from mavmon.proxy import run_proxy_session
from mavmon.resolve import resolve
from mavmon.scenarios import generate_scenario, parse_scenario_name
from mavmon.synth import SourceUnit, TranslationContext, emit_monitor, lexical_check, translate_guard
from mavmon.wf import check_all, check_unique_labels


def _ok(name: str) -> None:
    print(f"\n[acceptance] {name}: PASS")


def test_wf_suite_mission_and_mutants(mission, dialect):
    report = check_all(mission.pre_graph)
    assert report.overall, "mission fixture must pass all four checks"

    def report_for(name):
        path = FIXTURES / "mutants" / name
        if name.endswith(".rmpst"):
            return check_all(build_graph(resolve(parse_protocol(path.read_text()), dialect)))
        return check_all(graph_from_json(json.loads(path.read_text())))

    targets = {
        "duplicate_label.rmpst": "unique_labels",
        "unguarded_loop.rmpst": "guarded_recursion",
        "stuck_state.json": "progress",
        "dangling_target.json": "fidelity",
    }
    for name, target in targets.items():
        rep = report_for(name)
        flags = {
            "unique_labels": rep.unique_labels.passed,
            "guarded_recursion": rep.guarded_recursion.passed,
            "progress": rep.progress.passed,
            "fidelity": rep.fidelity.passed,
        }
        assert flags.pop(target) is False, f"{name} must fail {target}"
        assert all(flags.values()), f"{name} must pass the other three checks"
    _ok("wf-suite: mission passes, each mutant fails exactly its check")


def test_label_check_equivalence_10000_lists():
    def naive(labels):
        return any(labels[i] == labels[j] and labels[i] != "RECUR"
                   for i in range(len(labels)) for j in range(i + 1, len(labels)))

    rng = random.Random(0xC0FFEE)
    alphabet = ["MISSION_COUNT", "MISSION_ACK", "A", "B", "C", "D", "RECUR"]
    for _ in range(10_000):
        labels = [rng.choice(alphabet) for _ in range(rng.randrange(0, 16))]
        assert check_unique_labels(labels) == (not naive(labels))
    _ok("unique-labels agrees with the pairwise oracle on 10,000 lists")


def test_reification_golden_byte_exact():
    out = translate_guard(
        parse_expr("x > 5 && x < 10"),
        TranslationContext(local_binder=None, local_fields=frozenset(["x"]),
                           ctx_names=frozenset()))
    assert out == "((payload.x > 5) && (payload.x < 10))"
    _ok("guard reification golden is byte-exact")


def test_emitted_monitor_golden_fragments(mission_unit):
    impl = mission_unit.impl_text
    assert "payload.count >= 1 && payload.count < 65535" in impl
    assert "mon->ctx.cnt = payload.count;" in impl
    assert "mon->ctx.curr = 0;" in impl
    _ok("emitted monitor contains the guard and context-update goldens")


def test_mission_happy_path_202(mission):
    stats, _ = run_proxy_session(mission, generate_scenario("happy", (100,), mission.dialect))
    assert stats.forwarded == 202
    assert stats.dropped == 0
    assert stats.terminal
    _ok("happy(100): 202 forwarded, 0 dropped, terminal reached")


def test_stealthy_attacks_rejected(mission):
    frozen = json.loads((TEST_FIXTURES / "scenario_expectations.json").read_text())

    # truncated(N, k<N): exactly the premature success acknowledgment drops
    sc = generate_scenario("truncated", (100, 50), mission.dialect)
    stats, log = run_proxy_session(mission, sc)
    drops = [d["step"] for d in log if d["verdict"] == "DROP"]
    assert stats.dropped == 1 and drops == [len(sc.script) - 1]

    # out_of_order(N): the first bad request drops, nothing else
    sc = generate_scenario("out_of_order", (20,), mission.dialect)
    stats, log = run_proxy_session(mission, sc)
    drops = [d["step"] for d in log if d["verdict"] == "DROP"]
    assert drops == [1]

    # oversized_count: rejected at the count itself
    sc = generate_scenario("oversized_count", (), mission.dialect)
    stats, log = run_proxy_session(mission, sc)
    assert [d["verdict"] for d in log] == ["DROP"]

    # and every shipped scenario still matches its frozen fixture
    for key, want in frozen.items():
        name, params = parse_scenario_name(key)
        stats, log = run_proxy_session(
            mission, generate_scenario(name, params, mission.dialect, seed=0))
        assert [d["verdict"] for d in log] == want["verdicts"], key
    _ok("stealthy attacks drop exactly where the fixtures say")


def test_epsilon_compression_preserves_verdicts(mission, status_poll):
    for compiled in (mission, status_poll):
        rng = random.Random(0xE95)
        ids = compiled.graph.message_ids() + [0, 424242]
        for _ in range(1000):
            trace = []
            for _ in range(rng.randrange(1, 14)):
                mid = rng.choice(ids)
                schema = compiled.dialect.by_id.get(mid)
                fields = {}
                if schema is not None:
                    fields = {f.name: rng.randrange(0, 5) for f in schema.xml_fields
                              if not f.array_len and f.base_type not in ("float", "double")}
                trace.append((rng.randrange(2), DecodedMessage(mid, fields)))
            pre = [v.kind for v in run_trace(compiled.pre_graph, trace)]
            post = [v.kind for v in run_trace(compiled.graph, trace)]
            assert pre == post
    _ok("epsilon compression preserves verdicts on 1000 traces per fixture")


def test_every_emitted_unit_clean_and_deterministic(mission, status_poll, dialect):
    units: list[SourceUnit] = []
    for compiled in (mission, status_poll):
        units.append(emit_monitor(compiled.graph, compiled.spec, compiled.report))
        units.append(emit_monitor(compiled.graph, compiled.spec, compiled.report, fail_stop=True))
        units.append(emit_monitor(compiled.graph, compiled.spec, compiled.report,
                                  use_mavlink_headers=True))
    quiet = resolve(parse_protocol("protocol quiet { roles A = 0, B = 1; end }"), dialect)
    qpre = build_graph(quiet)
    units.append(emit_monitor(compress_epsilon(qpre), quiet, check_all(qpre)))

    for unit in units:
        rep = lexical_check(unit)
        assert rep.ok, f"{unit.name}: {rep.offenders}"

    again = emit_monitor(mission.graph, mission.spec, mission.report)
    first = emit_monitor(mission.graph, mission.spec, mission.report)
    assert (first.header_text, first.impl_text) == (again.header_text, again.impl_text)
    _ok("all emitted units pass the lexical checks; emission is byte-deterministic")


def test_benchmark_smoke_thresholds(mission):
    from mavmon.bench import REFERENCE_ACTIVE_NS, REFERENCE_IDLE_NS, bench_step_latency

    report = bench_step_latency(mission, engine="interpreter", iterations=10_000)
    idle_us = report.idle.median_ns / 1000
    active_us = report.active.median_ns / 1000
    print(f"\n[acceptance] bench idle median {idle_us:.2f} us (reference "
          f"{REFERENCE_IDLE_NS / 1000:.2f} us, published, different hardware)")
    print(f"[acceptance] bench active median {active_us:.2f} us (reference "
          f"{REFERENCE_ACTIVE_NS / 1000:.2f} us, published, different hardware)")
    assert idle_us < 50, "idle-path median must stay under 50 us"
    assert active_us < 100, "active-path median must stay under 100 us"
    _ok("benchmark smoke: medians inside the machine-independent bounds")


@pytest.mark.ctoolchain
def test_differential_oracle_1000_traces(mission, mission_driver, mission_unit, tmp_path):
    corpus = diff_oracle.generate_corpus(mission, 1000, seed=20260810)
    assert len(corpus) == 1000
    again = diff_oracle.generate_corpus(mission, 1000, seed=20260810)
    assert diff_oracle.corpus_lines(corpus) == diff_oracle.corpus_lines(again)

    compared = diff_oracle.run_differential(mission, corpus, mission_driver)
    assert compared >= 1000

    # the fault-injection fixture must be caught
    sab = SourceUnit(**{**vars(mission_unit), "impl_text": mission_unit.impl_text.replace(
        "payload.count >= 1 && payload.count < 65535",
        "payload.count >= 2 && payload.count < 65535")})
    exe = cdriver.build_driver(sab, tmp_path)
    with pytest.raises(DifferentialMismatch):
        diff_oracle.run_differential(
            mission, [(diff_oracle.Step(0, DecodedMessage(44, {"count": 1})),)], exe)
    _ok(f"differential oracle: {compared} steps, zero mismatches; "
        "fault injection reported")


@pytest.mark.ctoolchain
def test_warning_clean_strict_build(mission_unit, tmp_path):
    import subprocess

    cc = cdriver.find_cc()
    paths = cdriver.write_unit(mission_unit, tmp_path)
    driver = tmp_path / "trace_driver.c"
    driver.write_text((cdriver._SUPPORT_DIR / "trace_driver.c").read_text())
    proc = subprocess.run(
        [cc, *cdriver.STRICT_CFLAGS, str(driver), str(paths["impl"]),
         "-I", str(tmp_path), "-o", str(tmp_path / "drv")],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert proc.stderr.strip() == ""
    _ok(f"strict build ({' '.join(cdriver.STRICT_CFLAGS)}) is warning-clean")
