"""Reference interpreter: executes a StateGraph directly.

This is the semantic oracle the emitted C monitors are differentially
tested against, and the engine behind `simulate`.  It runs compressed
graphs natively and pre-compression graphs via epsilon-closure stepping
(used only to check that compression preserves trace semantics).
"""

from __future__ import annotations

from dataclasses import dataclass

from .dialect import MessageSchema, SIGNED_TYPES, BASE_TYPES
from .errors import ArithmeticOverflow, DivisionByZero, WfRequired
from .graph import StateGraph, Transition
from .refinement import Expr, eval_expr, pretty

PASS = "PASS"
ACCEPT = "ACCEPT"
DROP = "DROP"

# violation reasons
UNEXPECTED_LABEL = "UnexpectedLabel"
WRONG_DIRECTION = "WrongDirection"
GUARD_FAILED = "GuardFailed"
TERMINAL_STATE = "TerminalState"

GCS_TO_UAV = 0
UAV_TO_GCS = 1


@dataclass(frozen=True)
class DecodedMessage:
    msg_id: int
    fields: dict[str, int | float]


@dataclass(frozen=True)
class Verdict:
    kind: str  # PASS | ACCEPT | DROP
    reason: str | None = None
    transition: int | None = None
    new_state: int | None = None
    guard: Expr | None = None
    valuation: dict | None = None

    def to_json(self, step: int | None = None) -> dict:
        doc: dict = {"verdict": self.kind}
        if step is not None:
            doc["step"] = step
        if self.reason is not None:
            doc["reason"] = self.reason
        if self.guard is not None:
            doc["guard"] = pretty(self.guard)
        if self.valuation is not None:
            doc["valuation"] = self.valuation
        return doc


def normalize_field_value(base_type: str, value: int | float) -> int | float:
    """Wrap a raw trace value into the field's storage range, exactly as the
    wire codec (encode then zero-extended decode) would."""
    if base_type in ("float", "double"):
        return float(value)
    bits = BASE_TYPES[base_type][0] * 8
    u = int(value) & ((1 << bits) - 1)
    if base_type in SIGNED_TYPES and u >= 1 << (bits - 1):
        u -= 1 << bits
    return u


def payload_valuation(schema: MessageSchema, fields: dict) -> dict:
    """Schema-shaped field map: missing fields read as zero (the wire format
    truncates trailing zeros), extras are dropped, values wrap to width."""
    out: dict[str, int | float] = {}
    for f in schema.xml_fields:
        raw = fields.get(f.name, 0)
        if f.array_len and f.base_type == "char":
            out[f.name] = raw if isinstance(raw, str) else ""
        elif f.array_len:
            out[f.name] = 0  # non-char arrays are storable, never refinable
        else:
            out[f.name] = normalize_field_value(f.base_type, raw)
    return out


class MonitorConfig:
    """Mutable monitor state: current graph node plus context valuation."""

    def __init__(self, graph: StateGraph, fail_stop: bool = False):
        # refuse graphs the step function cannot run safely; the full
        # four-check report is the synthesis gate, these two are the ones
        # the interpreter itself relies on
        from .wf import check_fidelity, check_guarded_recursion

        if not check_fidelity(graph):
            raise WfRequired("graph has dangling transitions")
        if not check_guarded_recursion(graph):
            raise WfRequired("graph has an epsilon cycle")
        self.graph = graph
        self.fail_stop = fail_stop
        self.state = graph.initial
        self.ctx: dict[str, int | float] = {}
        self.poisoned = False
        self._out: dict[int, list[tuple[int, Transition]]] = {}
        for i, t in enumerate(graph.transitions):
            self._out.setdefault(t.source, []).append((i, t))
        self.prefilter = frozenset(graph.message_ids())
        for cv, e in graph.initial_updates:
            self.ctx[cv.name] = eval_expr(e, self.ctx, {})
        self._eps_close({})

    @property
    def terminal(self) -> bool:
        if self.poisoned:
            return False
        return self.graph.state(self.state).is_end

    def _eps_close(self, payload: dict) -> None:
        # pre-compression graphs interleave internal update edges; a chain
        # keeps the payload of the communication step that entered it
        guard_steps = 0
        while True:
            eps = [t for _, t in self._out.get(self.state, ()) if t.kind == "eps"]
            if not eps:
                return
            t = eps[0]
            for cv, e in t.updates:
                self.ctx[cv.name] = eval_expr(e, self.ctx, payload)
            self.state = t.target
            guard_steps += 1
            assert guard_steps <= len(self.graph.states), "epsilon cycle at runtime"


def monitor_init(g: StateGraph, fail_stop: bool = False) -> MonitorConfig:
    return MonitorConfig(g, fail_stop=fail_stop)


def monitor_step(m: MonitorConfig, direction: int, msg: DecodedMessage) -> tuple[MonitorConfig, Verdict]:
    """Classify one message: PASS (not protocol-relevant), ACCEPT (transition
    taken, context updated), or DROP with the most specific reason."""
    if msg.msg_id not in m.prefilter:
        return m, Verdict(PASS)

    def violate(reason: str, guard: Expr | None = None, valuation: dict | None = None) -> Verdict:
        if m.fail_stop:
            m.poisoned = True
            m.state = -1
        return Verdict(DROP, reason=reason, guard=guard, valuation=valuation)

    if m.poisoned:
        return m, violate(UNEXPECTED_LABEL)

    candidates = [(i, t) for i, t in m._out.get(m.state, ()) if t.kind == "comm"]
    if m.terminal and not candidates:
        return m, violate(TERMINAL_STATE)

    matching = [(i, t) for i, t in candidates if t.schema.msg_id == msg.msg_id]
    if not matching:
        return m, violate(UNEXPECTED_LABEL)
    index, t = matching[0]

    if direction != t.sender.id:
        return m, violate(WRONG_DIRECTION)

    payload = payload_valuation(t.schema, msg.fields)
    try:
        ok = eval_expr(t.guard, m.ctx, payload)
    except (DivisionByZero, ArithmeticOverflow):
        ok = False  # a guard that cannot be evaluated is false
    if not ok:
        return m, violate(GUARD_FAILED, guard=t.guard,
                          valuation={"ctx": dict(m.ctx), "payload": dict(payload)})

    # updates apply in order; each sees the effect of earlier ones, exactly
    # like the emitted monitor's statement sequence
    for cv, e in t.updates:
        m.ctx[cv.name] = eval_expr(e, m.ctx, payload)
    m.state = t.target
    m._eps_close(payload)
    return m, Verdict(ACCEPT, transition=index, new_state=m.state)


def run_trace(g: StateGraph, trace: list[tuple[int, DecodedMessage]],
              fail_stop: bool = False) -> list[Verdict]:
    """Fold monitor_step over a trace; violations are recorded, never fatal."""
    m = monitor_init(g, fail_stop=fail_stop)
    verdicts = []
    for direction, msg in trace:
        m, v = monitor_step(m, direction, msg)
        verdicts.append(v)
    return verdicts
