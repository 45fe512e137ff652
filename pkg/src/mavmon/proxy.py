"""Simulated GCS<->UAV proxy session.

Two in-process endpoints exchange framed bytes through the monitor: frames
are forwarded on Accept/PassThrough and dropped on Violation.  The compiled
engine bridges to the emitted monitor through the trace driver subprocess;
the interpreter engine steps the state graph directly.  Either way the
proxy's forwarding decisions come from one verdict stream.
"""

from __future__ import annotations

import resource
import socket
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from tempfile import TemporaryDirectory

from . import cdriver
from .errors import FramingError, UnknownMsgId
from .framing import decode_frame, encode_frame
from .interp import ACCEPT, DROP, PASS, DecodedMessage, monitor_init, monitor_step
from .pipeline import Compiled
from .scenarios import Scenario
from .synth import emit_monitor


@dataclass
class SessionStats:
    forwarded: int = 0
    dropped: int = 0
    passthrough: int = 0
    latency_ns: list[int] = dc_field(default_factory=list)
    peak_rss_kb: int = 0
    terminal: bool = False

    def to_json(self) -> dict:
        return {
            "forwarded": self.forwarded,
            "dropped": self.dropped,
            "passthrough": self.passthrough,
            "steps": len(self.latency_ns),
            "peak_rss_kb": self.peak_rss_kb,
            "terminal": self.terminal,
        }


@dataclass
class Endpoint:
    """Scripted actor: records every frame the proxy forwards to it."""

    name: str
    received: list[bytes] = dc_field(default_factory=list)


def _compiled_verdicts(compiled: Compiled, scenario: Scenario,
                       driver_exe: str | Path | None, timing: bool) -> tuple[list[str], list[int]]:
    lines = [cdriver.trace_line(d, m) for d, m in scenario.script]
    with TemporaryDirectory(prefix="mavmon-driver-") as tmp:
        exe = driver_exe
        if exe is None:
            unit = emit_monitor(compiled.graph, compiled.spec, compiled.report)
            exe = cdriver.build_driver(unit, tmp)
        out = cdriver.run_driver(exe, lines, timing=timing)
    tokens, nanos = [], []
    for row in out:
        parts = row.split()
        tokens.append(parts[0])
        nanos.append(int(parts[1]) if len(parts) > 1 else 0)
    return tokens, nanos


def run_proxy_session(compiled: Compiled, scenario: Scenario,
                      engine: str = "interpreter",
                      fail_stop: bool = False,
                      driver_exe: str | Path | None = None) -> tuple[SessionStats, list[dict]]:
    """Run a scenario through the proxy; returns stats plus the verdict log."""
    assert compiled.graph is not None, "protocol failed well-formedness"
    gcs = Endpoint("GCS")
    uav = Endpoint("UAV")
    stats = SessionStats()
    log: list[dict] = []

    pre_tokens = pre_nanos = None
    if engine == "compiled":
        pre_tokens, pre_nanos = _compiled_verdicts(compiled, scenario, driver_exe, timing=True)
    elif engine != "interpreter":
        raise ValueError(f"unknown engine {engine!r}")

    mon = monitor_init(compiled.graph, fail_stop=fail_stop)
    seq = 0
    for step, (direction, msg) in enumerate(scenario.script):
        schema = compiled.dialect.by_id[msg.msg_id]
        wire = encode_frame(schema, msg.fields, seq=seq & 0xFF)
        seq += 1
        # the proxy re-decodes off the wire; what the monitor sees round-trips
        # through the codec exactly like live traffic would
        _, decoded = decode_frame(wire, compiled.dialect)

        if engine == "compiled":
            token = pre_tokens[step]
            stats.latency_ns.append(pre_nanos[step])
            verdict_doc = {"step": step, "verdict": token}
        else:
            t0 = time.perf_counter_ns()
            mon, verdict = monitor_step(mon, direction, decoded)
            stats.latency_ns.append(time.perf_counter_ns() - t0)
            token = verdict.kind
            verdict_doc = verdict.to_json(step)
        log.append(verdict_doc)

        receiver = uav if direction == 0 else gcs
        if token == PASS:
            stats.passthrough += 1
            receiver.received.append(wire)  # forwarded untouched
        elif token == ACCEPT:
            stats.forwarded += 1
            receiver.received.append(wire)
        elif token == DROP:
            stats.dropped += 1
        else:
            raise AssertionError(f"unknown verdict token {token!r}")

    if engine == "compiled":
        # replay through the interpreter only to learn the final state
        for direction, msg in scenario.script:
            mon, _ = monitor_step(mon, direction, msg)
    stats.terminal = mon.terminal
    stats.peak_rss_kb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    return stats, log


def run_trace_file(compiled: Compiled, lines: list[str],
                   fail_stop: bool = False) -> list[dict]:
    """Interpret a JSON-lines trace ({dir, msg, fields[, trunc]})."""
    import json

    from .framing import decode_payload, encode_payload

    mon = monitor_init(compiled.graph, fail_stop=fail_stop)
    log = []
    for step, raw in enumerate(lines):
        raw = raw.strip()
        if not raw:
            continue
        doc = json.loads(raw)
        fields = doc.get("fields", {})
        schema = compiled.dialect.by_id.get(doc["msg"])
        if schema is not None and doc.get("trunc") is not None:
            wire = encode_payload(schema, fields)[: doc["trunc"]]
            fields = decode_payload(schema, wire)
        mon, verdict = monitor_step(mon, doc["dir"], DecodedMessage(doc["msg"], fields))
        log.append(verdict.to_json(step))
    return log


def run_udp_proxy(compiled: Compiled, gcs_port: int, uav_port: int,
                  max_messages: int = 0, timeout: float = 1.0,
                  fail_stop: bool = False) -> SessionStats:
    """Loopback UDP relay for manual interop play.

    The GCS-facing socket learns its peer from the first datagram it sees,
    as does the UAV-facing socket; frames then flow through the monitor in
    both directions.  Runs until `max_messages` frames (0 = until timeout).
    """
    assert compiled.graph is not None
    stats = SessionStats()
    mon = monitor_init(compiled.graph, fail_stop=fail_stop)

    gcs_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    uav_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    gcs_sock.bind(("127.0.0.1", gcs_port))
    uav_sock.bind(("127.0.0.1", uav_port))
    gcs_sock.settimeout(timeout)
    uav_sock.settimeout(timeout)
    peers: dict[str, tuple | None] = {"gcs": None, "uav": None}

    import select

    handled = 0
    try:
        while max_messages == 0 or handled < max_messages:
            ready, _, _ = select.select([gcs_sock, uav_sock], [], [], timeout)
            if not ready:
                break
            for sock in ready:
                data, addr = sock.recvfrom(65536)
                from_gcs = sock is gcs_sock
                peers["gcs" if from_gcs else "uav"] = addr
                handled += 1
                direction = 0 if from_gcs else 1
                try:
                    _, decoded = decode_frame(data, compiled.dialect)
                except UnknownMsgId:
                    verdict_kind = PASS  # unknown-but-well-formed passes through
                except FramingError:
                    stats.dropped += 1
                    continue
                else:
                    mon, verdict = monitor_step(mon, direction, decoded)
                    verdict_kind = verdict.kind
                out_sock = uav_sock if from_gcs else gcs_sock
                peer = peers["uav" if from_gcs else "gcs"]
                if verdict_kind == DROP:
                    stats.dropped += 1
                    continue
                if verdict_kind == PASS:
                    stats.passthrough += 1
                else:
                    stats.forwarded += 1
                if peer is not None:
                    out_sock.sendto(data, peer)
    finally:
        gcs_sock.close()
        uav_sock.close()
    stats.terminal = mon.terminal
    stats.peak_rss_kb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    return stats
