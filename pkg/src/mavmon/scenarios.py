"""Deterministic mission-upload scenarios: the happy path and the stealthy
attacks the monitor exists to stop."""

from __future__ import annotations

import random
import re
from dataclasses import dataclass

from .dialect import Dialect
from .errors import UnknownScenario
from .interp import DecodedMessage, GCS_TO_UAV, UAV_TO_GCS

MAV_MISSION_ACCEPTED = 0
MAV_MISSION_ERROR = 1


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    script: tuple[tuple[int, DecodedMessage], ...]
    params: tuple[int, ...] = ()
    # per-message Forward/Drop expectations; filled by with_expectations and
    # frozen as fixtures so regressions show up as fixture diffs
    expected: tuple[str, ...] = ()


def with_expectations(scenario: Scenario, graph) -> Scenario:
    """Attach interpreter-computed Forward/Drop expectations per message."""
    from dataclasses import replace

    from .interp import DROP, run_trace

    verdicts = run_trace(graph, list(scenario.script))
    expected = tuple("Drop" if v.kind == DROP else "Forward" for v in verdicts)
    return replace(scenario, expected=expected)


def _mission_messages(dialect: Dialect, rng: random.Random):
    ids = {lbl: dialect.schema(lbl).msg_id
           for lbl in ("MISSION_COUNT", "MISSION_REQUEST_INT", "MISSION_ITEM_INT", "MISSION_ACK")}

    def count(n: int) -> DecodedMessage:
        return DecodedMessage(ids["MISSION_COUNT"], {
            "target_system": 1, "target_component": 1, "count": n, "mission_type": 0})

    def request(seq: int) -> DecodedMessage:
        return DecodedMessage(ids["MISSION_REQUEST_INT"], {
            "target_system": 255, "target_component": 190, "seq": seq, "mission_type": 0})

    def item(seq: int) -> DecodedMessage:
        return DecodedMessage(ids["MISSION_ITEM_INT"], {
            "target_system": 1, "target_component": 1, "seq": seq,
            "frame": 6, "command": 16, "current": 0, "autocontinue": 1,
            "x": rng.randrange(-90_0000000, 90_0000000),
            "y": rng.randrange(-180_0000000, 180_0000000),
            "mission_type": 0})

    def ack(result: int) -> DecodedMessage:
        return DecodedMessage(ids["MISSION_ACK"], {
            "target_system": 255, "target_component": 190, "type": result, "mission_type": 0})

    return count, request, item, ack


def generate_scenario(name: str, params: tuple[int, ...], dialect: Dialect,
                      seed: int = 0) -> Scenario:
    """Build the named scenario's message script, deterministic in
    (name, params, seed)."""
    rng = random.Random((name, tuple(params), seed).__repr__())
    count, request, item, ack = _mission_messages(dialect, rng)
    script: list[tuple[int, DecodedMessage]] = []

    if name == "happy":
        (n,) = params
        script.append((GCS_TO_UAV, count(n)))
        for x in range(n):
            script.append((UAV_TO_GCS, request(x)))
            script.append((GCS_TO_UAV, item(x)))
        script.append((UAV_TO_GCS, ack(MAV_MISSION_ACCEPTED)))
        desc = f"complete upload of {n} items, acknowledged"
    elif name == "truncated":
        n, k = params
        if not k < n:
            raise UnknownScenario(f"truncated needs k < N, got k={k} N={n}")
        script.append((GCS_TO_UAV, count(n)))
        for x in range(k):
            script.append((UAV_TO_GCS, request(x)))
            script.append((GCS_TO_UAV, item(x)))
        script.append((UAV_TO_GCS, ack(MAV_MISSION_ACCEPTED)))
        desc = f"declares {n} items but acknowledges success after {k}"
    elif name == "out_of_order":
        (n,) = params
        script.append((GCS_TO_UAV, count(n)))
        script.append((UAV_TO_GCS, request(1)))  # skips item 0
        for x in range(n):
            script.append((UAV_TO_GCS, request(x)))
            script.append((GCS_TO_UAV, item(x)))
        script.append((UAV_TO_GCS, ack(MAV_MISSION_ACCEPTED)))
        desc = f"first request out of order, then a clean upload of {n}"
    elif name == "oversized_count":
        script.append((GCS_TO_UAV, count(65535)))
        desc = "declares a count outside the buffer limit"
    elif name == "replay_item":
        (n,) = params
        script.append((GCS_TO_UAV, count(n)))
        for x in range(n):
            script.append((UAV_TO_GCS, request(x)))
            script.append((GCS_TO_UAV, item(x)))
            if x == 0:
                script.append((GCS_TO_UAV, item(x)))  # replayed item
        script.append((UAV_TO_GCS, ack(MAV_MISSION_ACCEPTED)))
        desc = f"item 0 replayed during an upload of {n}"
    else:
        raise UnknownScenario(name)

    return Scenario(name=name, description=desc, script=tuple(script), params=tuple(params))


_NAME_RE = re.compile(r"^\s*([a-z_]+)\s*(?:\(\s*([0-9]+(?:\s*,\s*[0-9]+)*)?\s*\))?\s*$")


def parse_scenario_name(text: str) -> tuple[str, tuple[int, ...]]:
    """'truncated(100, 50)' -> ('truncated', (100, 50))."""
    m = _NAME_RE.match(text)
    if not m:
        raise UnknownScenario(text)
    name = m.group(1)
    params = tuple(int(p) for p in m.group(2).split(",")) if m.group(2) else ()
    return name, params
