"""Differential oracle: interpreter vs compiled monitor on a randomized corpus.

Half the corpus is valid graph walks with in-range payload values; half is
single-step mutants (out-of-range value, label swap, direction flip, payload
truncation).  A mismatch anywhere is a hard failure carrying the exact trace
and step.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

from . import cdriver
from .errors import DifferentialMismatch
from .framing import decode_payload, encode_payload
from .graph import Transition
from .interp import DecodedMessage, monitor_init, monitor_step
from .pipeline import Compiled
from .refinement import Binary, Expr, FieldAccess, Var, eval_expr, free_variables
from .errors import EvalError


@dataclass(frozen=True)
class Step:
    direction: int
    msg: DecodedMessage
    trunc: int | None = None


Trace = tuple[Step, ...]


def _conjuncts(e: Expr) -> list[Expr]:
    if isinstance(e, Binary) and e.op == "&&":
        return _conjuncts(e.left) + _conjuncts(e.right)
    return [e]


def _field_name_of(e: Expr, schema) -> str | None:
    if isinstance(e, FieldAccess):
        return e.fld if schema.field_by_name(e.fld) else None
    if isinstance(e, Var) and schema.field_by_name(e.name):
        return e.name
    return None


def _solve_guard(t: Transition, ctx: dict, rng: random.Random) -> dict | None:
    """Find an integer field valuation satisfying the transition guard:
    equality propagation first, then bounded random search."""
    schema = t.schema
    fields: dict[str, int] = {}
    for c in _conjuncts(t.guard):
        if isinstance(c, Binary) and c.op == "==":
            for lhs, rhs in ((c.left, c.right), (c.right, c.left)):
                name = _field_name_of(lhs, schema)
                if name and not (free_variables(rhs) - set(ctx)):
                    try:
                        fields[name] = int(eval_expr(rhs, ctx, {}))
                    except EvalError:
                        pass

    refinable = [f.name for f in schema.xml_fields
                 if f.base_type not in ("float", "double", "char", "u64") and not f.array_len]
    pool = [0, 1, 2, 3, 5] + [v for v in ctx.values() if isinstance(v, int)]
    pool += [v + 1 for v in pool] + [65534]

    from .interp import payload_valuation

    for _ in range(60):
        candidate = dict(fields)
        for name in refinable:
            if name not in candidate:
                candidate[name] = rng.choice(pool)
        payload = payload_valuation(schema, candidate)
        try:
            if eval_expr(t.guard, ctx, payload):
                return candidate
        except EvalError:
            pass
    return None


def _valid_walk(compiled: Compiled, rng: random.Random, max_steps: int) -> list[Step]:
    g = compiled.graph
    mon = monitor_init(g)
    steps: list[Step] = []
    heartbeat = compiled.dialect.schema("HEARTBEAT")
    for _ in range(max_steps):
        if heartbeat is not None and rng.random() < 0.10:
            msg = DecodedMessage(heartbeat.msg_id, {"type": 2, "system_status": 4})
            steps.append(Step(rng.randrange(2), msg))
            continue
        outs = [t for t in g.transitions if t.source == mon.state]
        if not outs:
            break
        staying = [t for t in outs if not g.state(t.target).is_end]
        pick_from = staying if staying and rng.random() < 0.7 else outs
        t = rng.choice(pick_from)
        solution = _solve_guard(t, mon.ctx, rng)
        if solution is None:
            others = [o for o in outs if o is not t]
            solution = None
            for o in others:
                solution = _solve_guard(o, mon.ctx, rng)
                if solution is not None:
                    t = o
                    break
            if solution is None:
                break
        msg = DecodedMessage(t.schema.msg_id, solution)
        mon, verdict = monitor_step(mon, t.sender.id, msg)
        assert verdict.kind == "ACCEPT", f"walk generator produced {verdict}"
        steps.append(Step(t.sender.id, msg))
        if mon.terminal:
            break
    return steps


def _mutate(compiled: Compiled, trace: list[Step], rng: random.Random) -> list[Step]:
    if not trace:
        return trace
    protocol_ids = set(compiled.graph.message_ids())
    idxs = [i for i, s in enumerate(trace) if s.msg.msg_id in protocol_ids]
    if not idxs:
        return trace
    i = rng.choice(idxs)
    step = trace[i]
    schema = compiled.dialect.by_id[step.msg.msg_id]
    kind = rng.choice(("value", "label", "direction", "trunc"))
    mutated = list(trace)
    if kind == "value":
        ints = [f.name for f in schema.xml_fields
                if f.base_type not in ("float", "double", "char", "u64") and not f.array_len]
        if not ints:
            return trace
        name = rng.choice(ints)
        bad = rng.choice((-1, 65535, 1 << 20, (step.msg.fields.get(name, 0) or 0) + 1))
        fields = dict(step.msg.fields) | {name: bad}
        mutated[i] = Step(step.direction, DecodedMessage(step.msg.msg_id, fields), step.trunc)
    elif kind == "label":
        other = rng.choice(sorted(protocol_ids - {step.msg.msg_id}) or [step.msg.msg_id])
        mutated[i] = Step(step.direction, DecodedMessage(other, dict(step.msg.fields)), step.trunc)
    elif kind == "direction":
        mutated[i] = Step(1 - step.direction, step.msg, step.trunc)
    else:  # truncation
        size = schema.wire_size
        mutated[i] = Step(step.direction, step.msg, rng.randrange(0, max(size, 1)))
    return mutated


def generate_corpus(compiled: Compiled, count: int, seed: int) -> list[Trace]:
    """`count` traces, deterministic in the seed: 50% valid walks, 50%
    single-step mutants of valid walks."""
    rng = random.Random(seed)
    corpus: list[Trace] = []
    for i in range(count):
        walk = _valid_walk(compiled, rng, max_steps=rng.randrange(3, 28))
        if i % 2 == 1:
            walk = _mutate(compiled, walk, rng)
        corpus.append(tuple(walk))
    return corpus


def interp_tokens(compiled: Compiled, trace: Trace) -> list[str]:
    """Interpreter verdict tokens, with trace-level truncation applied the
    same way the driver's wire round-trip applies it."""
    mon = monitor_init(compiled.graph)
    tokens = []
    for step in trace:
        fields = step.msg.fields
        schema = compiled.dialect.by_id.get(step.msg.msg_id)
        if schema is not None:
            wire = encode_payload(schema, fields)
            if step.trunc is not None:
                wire = wire[:step.trunc]
            fields = decode_payload(schema, wire)
        mon, verdict = monitor_step(mon, step.direction, DecodedMessage(step.msg.msg_id, fields))
        tokens.append(verdict.kind)
    return tokens


def corpus_lines(corpus: list[Trace]) -> list[str]:
    lines = []
    for trace in corpus:
        lines.append(cdriver.RESET_LINE)
        for step in trace:
            lines.append(cdriver.trace_line(step.direction, step.msg, step.trunc))
    return lines


def run_differential(compiled: Compiled, corpus: list[Trace],
                     driver_exe: str | Path) -> int:
    """Compare verdict vectors trace by trace; returns the number of steps
    compared, raises DifferentialMismatch at the first divergence."""
    driver_out = cdriver.run_driver(driver_exe, corpus_lines(corpus))
    pos = 0
    compared = 0
    for trace_index, trace in enumerate(corpus):
        assert driver_out[pos] == "RESET", f"driver lost sync at line {pos}"
        pos += 1
        expected = interp_tokens(compiled, trace)
        for step_index, want in enumerate(expected):
            got = driver_out[pos]
            pos += 1
            compared += 1
            if got != want:
                raise DifferentialMismatch(trace_index, step_index, want, got)
    return compared


def differential_corpus(compiled: Compiled, count: int, seed: int,
                        driver_exe: str | Path | None = None) -> tuple[list[Trace], int]:
    """Generate a corpus and run the full differential comparison.

    Builds the emitted monitor + trace driver when no executable is given.
    Returns (corpus, steps compared); raises DifferentialMismatch on the
    first divergence.
    """
    from tempfile import TemporaryDirectory

    from .synth import emit_monitor

    corpus = generate_corpus(compiled, count, seed)
    if driver_exe is not None:
        return corpus, run_differential(compiled, corpus, driver_exe)
    unit = emit_monitor(compiled.graph, compiled.spec, compiled.report)
    with TemporaryDirectory(prefix="mavmon-diff-") as tmp:
        exe = cdriver.build_driver(unit, tmp)
        return corpus, run_differential(compiled, corpus, exe)
