"""C99 monitor synthesis from a compressed, WF-passing state graph.

Refinements are type-erased into (variable, storage type, guard) triples,
guards are reified into C conditional text, and the whole machine becomes
one switch statement over the state enumeration.  The emitted unit is
self-contained: payload structs and little-endian decoders are generated
from the message schemas, so no MAVLink library is required.

Guard arithmetic runs in 64-bit intermediates; a division helper turns a
zero divisor into a failed guard instead of undefined behavior.
"""

from __future__ import annotations

from dataclasses import dataclass

from .dialect import MessageSchema
from .errors import NonBooleanRefinement, UnresolvableVariable, WfRequired
from .graph import ContextVar, StateGraph, Transition
from .protocol import ProtocolSpec, binders
from .refinement import (
    CMP_OPS,
    Binary,
    BoolConst,
    EnumConst,
    Expr,
    FieldAccess,
    IntConst,
    Unary,
    Var,
    pretty,
)
from .wf import WfReport

SUPPORT_HEADER = "monitor_support.h"


# -- refinement extraction -----------------------------------------------------

@dataclass(frozen=True)
class RefinedType:
    """A storage type with zero or more layered refinements (layers nest)."""

    base: "str | RefinedType"
    refinement: Expr | None = None


@dataclass(frozen=True)
class ExtractedBinder:
    var: str
    base_type: str
    guard: Expr  # BoolConst(True) when unrefined


def _is_boolean_shaped(e: Expr) -> bool:
    match e:
        case BoolConst():
            return True
        case Unary(op="not"):
            return True
        case Binary(op=op):
            return op in CMP_OPS or op in ("&&", "||")
        case _:
            return False


def extract_binder(var: str, sort: str | RefinedType) -> ExtractedBinder:
    """Split a possibly-refined sort into storage type and guard; nested
    refinement layers flatten into one conjunction (outermost last).

    Resolution already type-checked refinements; the boolean-shape test here
    is a defensive guard against hand-built sorts.
    """
    guards: list[Expr] = []
    while isinstance(sort, RefinedType):
        if sort.refinement is not None:
            if not _is_boolean_shaped(sort.refinement):
                raise NonBooleanRefinement(f"refinement on {var!r} is not a boolean predicate")
            guards.append(sort.refinement)
        sort = sort.base
    guards.reverse()  # innermost first
    if not guards:
        return ExtractedBinder(var, sort, BoolConst(True))
    guard = guards[0]
    for g in guards[1:]:
        guard = Binary("&&", guard, g)
    return ExtractedBinder(var, sort, guard)


# -- guard translation ---------------------------------------------------------

@dataclass(frozen=True)
class TranslationContext:
    """Name resolution for guard reification: payload-local names win."""

    local_binder: str | None
    local_fields: frozenset[str]
    ctx_names: frozenset[str]

    def resolve(self, e: Expr) -> str:
        if isinstance(e, Var):
            if e.name in self.local_fields:
                return f"payload.{e.name}"
            if e.name in self.ctx_names:
                return f"mon->ctx.{e.name}"
            raise UnresolvableVariable(e.name)
        if isinstance(e, FieldAccess):
            if self.local_binder is not None and e.var != self.local_binder:
                raise UnresolvableVariable(f"{e.var}.{e.fld}")
            if e.fld not in self.local_fields:
                raise UnresolvableVariable(f"{e.var}.{e.fld}")
            return f"payload.{e.fld}"
        raise UnresolvableVariable(repr(e))


# one shared precedence level for all comparisons keeps chained comparisons
# parenthesized (C would parse them, but -Wparentheses rightly objects)
_C_PREC = {"||": 1, "&&": 2, "==": 3, "!=": 3, "<": 3, ">": 3, "<=": 3, ">=": 3,
           "+": 4, "-": 4, "*": 5, "/": 5}

_C_OP = {"&&": "&&", "||": "||", "==": "==", "!=": "!=", "<": "<", ">": ">",
         "<=": "<=", ">=": ">=", "+": "+", "-": "-", "*": "*", "/": "/"}


def translate_guard(guard: Expr, ctx: TranslationContext) -> str:
    """Reify a refinement into C guard text.

    Logical nodes wrap themselves in parentheses and parenthesize their
    relational children (`((payload.x > 5) && (payload.x < 10))`); equality
    and relational nodes render bare, infix.
    """

    def plain(e: Expr, parent_prec: int) -> str:
        match e:
            case IntConst(value=v):
                return str(v)
            case BoolConst(value=v):
                return "1" if v else "0"
            case EnumConst(value=v):
                return str(v)
            case Var() | FieldAccess():
                return ctx.resolve(e)
            case Unary(op=op, operand=x):
                body = plain(x, 99)
                if isinstance(x, Binary):
                    body = f"({plain(x, 0)})"
                return ("-" if op == "neg" else "!") + body
            case Binary(op=op, left=l, right=r) if op in ("&&", "||"):
                return logical(e)
            case Binary(op=op, left=l, right=r):
                p = _C_PREC[op]
                s = f"{plain(l, p)} {_C_OP[op]} {plain(r, p + 1)}"
                return f"({s})" if p < parent_prec else s
            case _:
                raise UnresolvableVariable(repr(e))

    def wrap_child(e: Expr) -> str:
        if isinstance(e, Binary) and e.op in ("&&", "||"):
            return logical(e)
        if isinstance(e, (Binary, Unary)):
            return f"({plain(e, 0)})"
        return plain(e, 0)

    def logical(e: Binary) -> str:
        return f"({wrap_child(e.left)} {_C_OP[e.op]} {wrap_child(e.right)})"

    if isinstance(guard, Binary) and guard.op in ("&&", "||"):
        return logical(guard)
    return plain(guard, 0)


# -- typed C rendering (emission path) ------------------------------------------

class _CTyped:
    """Schema-aware renderer used inside the emitted unit.

    Comparisons follow the translation table (logical nodes parenthesized,
    relational children bare); u32 operands and narrow-on-narrow arithmetic
    get explicit int64_t casts so the compiled semantics match the 64-bit
    reference evaluation; `/` goes through the checked division helper.
    """

    def __init__(self, schema: MessageSchema | None, binder: str | None,
                 ctx_types: dict[str, str]):
        self.schema = schema
        self.binder = binder
        self.ctx_types = ctx_types
        self.uses_div = False

    def _lookup(self, e: Expr) -> tuple[str, str]:
        """(C lvalue text, base type key)"""
        if isinstance(e, Var):
            if self.schema is not None and self.schema.field_by_name(e.name) is not None:
                f = self.schema.field_by_name(e.name)
                return f"payload.{e.name}", f.base_type
            if e.name in self.ctx_types:
                return f"mon->ctx.{e.name}", self.ctx_types[e.name]
            raise UnresolvableVariable(e.name)
        if isinstance(e, FieldAccess):
            if self.schema is None:
                raise UnresolvableVariable(f"{e.var}.{e.fld}")
            f = self.schema.field_by_name(e.fld)
            if f is None or (self.binder is not None and e.var != self.binder):
                raise UnresolvableVariable(f"{e.var}.{e.fld}")
            return f"payload.{e.fld}", f.base_type
        raise UnresolvableVariable(repr(e))

    def type_of(self, e: Expr) -> str:
        """'i64' | narrow base type | 'bool'"""
        match e:
            case IntConst() | EnumConst():
                return "intlit"
            case BoolConst():
                return "bool"
            case Var() | FieldAccess():
                base = self._lookup(e)[1]
                return "i64" if base == "int" else base
            case Unary(op="neg"):
                return "i64"
            case Unary(op="not"):
                return "bool"
            case Binary(op=op) if op in ("+", "-", "*", "/"):
                return "i64"
            case _:
                return "bool"

    def atom(self, e: Expr, parent_prec: int, force_wide: bool = False) -> str:
        match e:
            case IntConst(value=v):
                s = str(v)
                if not (-(1 << 31) <= v < (1 << 31)):
                    s += "LL"
                return f"(int64_t){s}" if force_wide else s
            case EnumConst(value=v):
                return f"(int64_t){v}" if force_wide else str(v)
            case BoolConst(value=v):
                return "1" if v else "0"
            case Var() | FieldAccess():
                text, base = self._lookup(e)
                if force_wide and base not in ("int", "i64"):
                    return f"(int64_t){text}"
                if base == "u32" and not force_wide:
                    # avoid unsigned/signed comparison pitfalls
                    return f"(int64_t){text}"
                return text
            case Unary(op=op, operand=x):
                if op == "not":
                    inner = self.atom(x, 99)
                    if isinstance(x, (Binary, Unary)):
                        inner = f"({self.atom(x, 0)})"
                    return "!" + inner
                return f"(-{self.atom(x, 99, force_wide=True)})"
            case Binary(op=op, left=l, right=r) if op in ("&&", "||"):
                return self.logical(e)
            case Binary(op="/", left=l, right=r):
                self.uses_div = True
                return (f"mon_div({self.atom(l, 0, force_wide=True)}, "
                        f"{self.atom(r, 0, force_wide=True)}, &mon_ok)")
            case Binary(op=op, left=l, right=r) if op in ("+", "-", "*"):
                # widen unless one side is already a 64-bit value
                wide = not (self.type_of(l) in ("i64", "int") or self.type_of(r) in ("i64", "int"))
                p = _C_PREC[op]
                s = (f"{self.atom(l, p, force_wide=wide)} {op} "
                     f"{self.atom(r, p + 1, force_wide=wide)}")
                return f"({s})" if p < parent_prec else s
            case Binary(op=op, left=l, right=r):
                p = _C_PREC[op]
                s = f"{self.atom(l, p)} {_C_OP[op]} {self.atom(r, p + 1)}"
                return f"({s})" if p < parent_prec else s
            case _:
                raise UnresolvableVariable(repr(e))

    def logical(self, e: Binary) -> str:
        def child(x: Expr) -> str:
            if isinstance(x, Binary) and x.op in ("&&", "||"):
                return self.logical(x)
            return self.atom(x, 0)

        return f"({child(e.left)} {_C_OP[e.op]} {child(e.right)})"

    def condition(self, guard: Expr) -> str:
        """if-condition text: top-level conjuncts joined bare, matching the
        flat `a && b` shape of the generated-monitor listing style."""
        conjuncts: list[Expr] = []

        def flatten(e: Expr) -> None:
            if isinstance(e, Binary) and e.op == "&&":
                flatten(e.left)
                flatten(e.right)
            else:
                conjuncts.append(e)

        flatten(guard)
        parts = []
        for c in conjuncts:
            if isinstance(c, Binary) and c.op in ("&&", "||"):
                parts.append(self.logical(c))
            else:
                parts.append(self.atom(c, _C_PREC["&&"] + 1))
        return " && ".join(parts)


# -- source unit -----------------------------------------------------------------

@dataclass(frozen=True)
class SourceUnit:
    name: str
    header_name: str
    header_text: str
    impl_name: str
    impl_text: str
    prefilter_table: tuple[int, ...]
    context_layout: tuple[tuple[str, str], ...]  # (name, C storage type)


def _mu_annotations(spec: ProtocolSpec) -> dict[str, str]:
    """Loop-binder refinements survive type erasure as annotations only:
    the storage slot keeps the base type, the predicate becomes a comment."""
    from .protocol import Mu, walk

    notes: dict[str, str] = {}
    for node in walk(spec.root):
        if isinstance(node, Mu) and node.binder_var is not None:
            extracted = extract_binder(
                node.binder_var, RefinedType("int", node.binder_refinement))
            if not (isinstance(extracted.guard, BoolConst) and extracted.guard.value):
                notes[node.binder_var] = f" where {pretty(extracted.guard)}"
    return notes


def emit_prefilter(spec: ProtocolSpec) -> tuple[int, ...]:
    """Sorted table of exactly the message ids the protocol references; any
    id absent from it is classified PassThrough before the FSM runs."""
    assert spec.resolved
    ids = {b.binder.schema.msg_id for b in binders(spec.root)}
    return tuple(sorted(ids))


def _ctx_c_type(cv: ContextVar) -> str:
    from .dialect import BASE_TYPES

    if cv.base_type == "int":
        return "int64_t"
    return BASE_TYPES[cv.base_type][1]


def _state_symbol(g: StateGraph, sid: int, labels_prefix: str) -> str:
    st = g.state(sid)
    if sid == g.initial:
        hint = "IDLE"
    elif st.is_end:
        hint = "DONE"
    else:
        out = [t for t in g.transitions if t.source == sid]
        lbl = out[0].label if out else "WAIT"
        if labels_prefix and lbl.startswith(labels_prefix) and len(lbl) > len(labels_prefix):
            lbl = lbl[len(labels_prefix):]
        hint = lbl
    return f"STATE_{hint}_{sid}"


def _common_label_prefix(labels: list[str]) -> str:
    if len(labels) < 2:
        return ""
    prefix = labels[0]
    for lb in labels[1:]:
        while not lb.startswith(prefix):
            prefix = prefix[:-1]
            if not prefix:
                return ""
    cut = prefix.rfind("_")
    return prefix[:cut + 1] if cut > 0 else ""


def _payload_struct_name(schema: MessageSchema) -> str:
    return f"{schema.label.lower()}_payload_t"


def _decoder_name(schema: MessageSchema) -> str:
    return f"decode_{schema.label.lower()}"


def _reader_for(f) -> str:
    return {
        "u8": "mon_b(frame, {off})",
        "i8": "(int8_t)mon_b(frame, {off})",
        "u16": "mon_u16(frame, {off})",
        "i16": "(int16_t)mon_u16(frame, {off})",
        "u32": "mon_u32(frame, {off})",
        "i32": "(int32_t)mon_u32(frame, {off})",
        "u64": "mon_u64(frame, {off})",
        "i64": "(int64_t)mon_u64(frame, {off})",
        "float": "mon_f32(frame, {off})",
        "double": "mon_f64(frame, {off})",
        "char": "(char)mon_b(frame, {off})",
    }[f.base_type]


def emit_monitor(g: StateGraph, spec: ProtocolSpec, wf: WfReport,
                 fail_stop: bool = False,
                 use_mavlink_headers: bool = False) -> SourceUnit:
    """Emit the monitor source unit for a compressed, WF-passing graph."""
    if not wf.overall:
        raise WfRequired("well-formedness report has failures; refusing to emit")
    if not g.epsilon_free:
        raise WfRequired("graph still has epsilon transitions; compress it first")
    role_ids = sorted(r.id for r in spec.roles)
    if role_ids != [0, 1]:
        raise WfRequired("emission targets two-party protocols with role ids 0 and 1")

    name = spec.name
    guard_macro = f"{name.upper()}_MONITOR_H"
    header_name = f"{name}_monitor.h"
    impl_name = f"{name}_monitor.c"

    ctx_types = {cv.name: cv.base_type for cv in g.context}
    context_layout = tuple((cv.name, _ctx_c_type(cv)) for cv in g.context)

    schemas = sorted({t.schema.msg_id: t.schema for t in g.transitions}.values(),
                     key=lambda s: s.msg_id)
    prefilter = emit_prefilter(spec)
    labels_prefix = _common_label_prefix(sorted({t.label for t in g.transitions}))

    # ---- header ----
    h: list[str] = []
    h.append(f"/* Monitor for protocol '{name}'. Generated; do not edit. */")
    h.append(f"#ifndef {guard_macro}")
    h.append(f"#define {guard_macro}")
    h.append("")
    if use_mavlink_headers:
        h.append("#include <stdbool.h>")
        h.append("#include <stdint.h>")
        h.append('#include "mavlink.h"')
    else:
        h.append(f'#include "{SUPPORT_HEADER}"')
    h.append("")
    h.append("typedef enum {")
    state_syms = {s.id: _state_symbol(g, s.id, labels_prefix) for s in g.states}
    enum_lines = [f"    {state_syms[s.id]} = {s.id}" for s in g.states]
    if fail_stop:
        enum_lines.append("    STATE_POISONED = -1")
    h.append(",\n".join(enum_lines))
    h.append("} monitor_state_id_t;")
    h.append("")
    h.append("typedef struct {")
    if context_layout:
        mu_notes = _mu_annotations(spec)
        for cname, ctype in context_layout:
            note = ""
            cv = g.context_var(cname)
            if cv is not None and cv.origin[0] == "mu":
                note = f"  /* loop variable of rec {cv.origin[1]}{mu_notes.get(cname, '')} */"
            h.append(f"    {ctype} {cname};{note}")
    else:
        h.append("    uint8_t unused_;  /* no context variables */")
    h.append("} monitor_ctx_t;")
    h.append("")
    h.append("struct monitor {")
    h.append("    int32_t state;")
    h.append("    monitor_ctx_t ctx;")
    h.append("};")
    if use_mavlink_headers:
        h.append("typedef struct monitor monitor_t;")
        h.append("")
        h.append("void monitor_init(monitor_t *mon);")
        h.append("bool monitor_step(monitor_t *mon, const mavlink_message_t *msg);")
    h.append("")
    h.append(f"#endif /* {guard_macro} */")
    header_text = "\n".join(h) + "\n"

    # ---- implementation ----
    if use_mavlink_headers:
        impl_text = _emit_impl_mavlink_style(g, spec, header_name, state_syms, prefilter, fail_stop)
    else:
        impl_text = _emit_impl_selfcontained(g, spec, header_name, state_syms, schemas,
                                             prefilter, ctx_types, fail_stop)

    return SourceUnit(
        name=name,
        header_name=header_name,
        header_text=header_text,
        impl_name=impl_name,
        impl_text=impl_text,
        prefilter_table=prefilter,
        context_layout=context_layout,
    )


def _render_update_rhs(r: _CTyped, e: Expr) -> str:
    # simple right-hand sides stay literal (`payload.count`, `0`); arithmetic
    # goes through the widened renderer
    return r.atom(e, 0)


def _emit_impl_selfcontained(g: StateGraph, spec: ProtocolSpec, header_name: str,
                             state_syms: dict[int, str], schemas: list[MessageSchema],
                             prefilter: tuple[int, ...], ctx_types: dict[str, str],
                             fail_stop: bool) -> str:
    c: list[str] = []
    c.append(f"/* Monitor for protocol '{spec.name}'. Generated; do not edit. */")
    c.append(f'#include "{header_name}"')
    c.append("")
    for s in schemas:
        c.append(f"#define MSG_ID_{s.label} {s.msg_id}u")
    c.append("")

    # pre-filter: sorted static table + binary-search membership test
    n = len(prefilter)
    ids = ", ".join(f"{i}u" for i in prefilter) if prefilter else "0u"
    c.append(f"static const uint32_t monitor_prefilter_ids[{max(n, 1)}] = {{ {ids} }};")
    c.append("")
    c.append("bool monitor_is_protocol_message(uint32_t msg_id) {")
    c.append(f"    int lo = 0, hi = {n} - 1;")
    c.append("    while (lo <= hi) {")
    c.append("        int mid = lo + (hi - lo) / 2;")
    c.append("        if (monitor_prefilter_ids[mid] == msg_id) return true;")
    c.append("        if (monitor_prefilter_ids[mid] < msg_id) lo = mid + 1; else hi = mid - 1;")
    c.append("    }")
    c.append("    return false;")
    c.append("}")
    c.append("")

    # byte readers for exactly the widths the schemas use
    widths = {f.base_type for s in schemas for f in s.xml_fields}
    encodable = [(s, [f for f in s.wire_fields if not f.array_len and f.base_type != "char"])
                 for s in schemas]
    has_encodable = any(fs for _, fs in encodable)
    if widths:
        c.append("static uint8_t mon_b(const mon_frame_view_t *frame, uint16_t off) {")
        c.append("    return off < frame->len ? frame->payload[off] : 0;  /* zero-extend truncation */")
        c.append("}")
    if widths & {"u16", "i16"}:
        c.append("static uint16_t mon_u16(const mon_frame_view_t *frame, uint16_t off) {")
        c.append("    return (uint16_t)((uint16_t)mon_b(frame, off) | ((uint16_t)mon_b(frame, (uint16_t)(off + 1)) << 8));")
        c.append("}")
    if widths & {"u32", "i32", "float"}:
        c.append("static uint32_t mon_u32(const mon_frame_view_t *frame, uint16_t off) {")
        c.append("    uint32_t v = 0;")
        c.append("    int i;")
        c.append("    for (i = 3; i >= 0; i--) v = (v << 8) | mon_b(frame, (uint16_t)(off + i));")
        c.append("    return v;")
        c.append("}")
    if widths & {"u64", "i64", "double"}:
        c.append("static uint64_t mon_u64(const mon_frame_view_t *frame, uint16_t off) {")
        c.append("    uint64_t v = 0;")
        c.append("    int i;")
        c.append("    for (i = 7; i >= 0; i--) v = (v << 8) | mon_b(frame, (uint16_t)(off + i));")
        c.append("    return v;")
        c.append("}")
    if "float" in widths:
        c.append("static float mon_f32(const mon_frame_view_t *frame, uint16_t off) {")
        c.append("    union { uint32_t u; float f; } cvt;")
        c.append("    cvt.u = mon_u32(frame, off);")
        c.append("    return cvt.f;")
        c.append("}")
    if "double" in widths:
        c.append("static double mon_f64(const mon_frame_view_t *frame, uint16_t off) {")
        c.append("    union { uint64_t u; double f; } cvt;")
        c.append("    cvt.u = mon_u64(frame, off);")
        c.append("    return cvt.f;")
        c.append("}")
    c.append("")

    # payload structs + decoders (wire order offsets, declaration-order members)
    for s in schemas:
        c.append(f"typedef struct {{")
        for f in s.xml_fields:
            if f.array_len:
                c.append(f"    {f.c_type} {f.name}[{f.array_len}];")
            else:
                c.append(f"    {f.c_type} {f.name};")
        if not s.xml_fields:
            c.append("    uint8_t unused_;")
        c.append(f"}} {_payload_struct_name(s)};")
        c.append("")
        c.append(f"static void {_decoder_name(s)}(const mon_frame_view_t *frame, {_payload_struct_name(s)} *out) {{")
        if not s.xml_fields:
            c.append("    (void)frame;")
            c.append("    out->unused_ = 0;")
        off = 0
        for f in s.wire_fields:
            if f.array_len:
                c.append(f"    {{ int i; for (i = 0; i < {f.array_len}; i++) "
                         f"out->{f.name}[i] = {_reader_for(f).format(off=f'(uint16_t)({off} + i * {f.unit_size})')}; }}")
            else:
                c.append(f"    out->{f.name} = {_reader_for(f).format(off=off)};")
            off += f.wire_size
        c.append("}")
        c.append("")

    # division helper only when some guard divides
    need_div = any("/" == op for t in g.transitions for op in _ops_of(t.guard))
    if need_div:
        c.append("static int64_t mon_div(int64_t n, int64_t d, bool *ok) {")
        c.append("    if (d == 0 || (n == INT64_MIN && d == -1)) { *ok = false; return 0; }")
        c.append("    return n / d;")
        c.append("}")
        c.append("")

    # test-support encoders: build wire payloads through the same schemas
    if has_encodable:
        c.append("static bool mon_name_eq(const char *a, const char *b) {")
        c.append("    uint16_t i = 0;")
        c.append("    while (a[i] != 0 && b[i] != 0 && a[i] == b[i]) i++;")
        c.append("    return a[i] == 0 && b[i] == 0;")
        c.append("}")
        c.append("")
    c.append("int monitor_test_payload_size(uint32_t msg_id) {")
    c.append("    switch (msg_id) {")
    for s in schemas:
        c.append(f"    case MSG_ID_{s.label}: return {s.wire_size};")
    c.append("    default: return 0;")
    c.append("    }")
    c.append("}")
    c.append("")
    c.append("int monitor_test_encode_field(uint32_t msg_id, const char *field_name,")
    c.append("                              int64_t value, uint8_t *payload) {")
    if not has_encodable:
        c.append("    (void)msg_id;")
        c.append("    (void)field_name;")
        c.append("    (void)value;")
        c.append("    (void)payload;")
        c.append("    return 0;")
        c.append("}")
        c.append("")
        return _finish_impl(c, g, spec, state_syms, ctx_types, fail_stop)
    c.append("    switch (msg_id) {")
    for s in schemas:
        c.append(f"    case MSG_ID_{s.label}: {{")
        off = 0
        for f in s.wire_fields:
            if not f.array_len and f.base_type not in ("char",):
                if f.base_type in ("float", "double"):
                    width = f.unit_size
                    c.append(f"        if (mon_name_eq(field_name, \"{f.name}\")) {{")
                    if f.base_type == "float":
                        c.append("            union { float f; uint32_t u; } cvt;")
                        c.append("            cvt.f = (float)value;")
                    else:
                        c.append("            union { double f; uint64_t u; } cvt;")
                        c.append("            cvt.f = (double)value;")
                    c.append("            uint64_t bits = cvt.u;")
                    c.append(f"            int i; for (i = 0; i < {width}; i++) payload[{off} + i] = (uint8_t)(bits >> (8 * i));")
                    c.append("            return 1;")
                    c.append("        }")
                else:
                    width = f.unit_size
                    c.append(f"        if (mon_name_eq(field_name, \"{f.name}\")) {{")
                    c.append(f"            int i; for (i = 0; i < {width}; i++) payload[{off} + i] = (uint8_t)((uint64_t)value >> (8 * i));")
                    c.append("            return 1;")
                    c.append("        }")
            off += f.wire_size
        c.append("        return 0;")
        c.append("    }")
    c.append("    default: return 0;")
    c.append("    }")
    c.append("}")
    c.append("")
    return _finish_impl(c, g, spec, state_syms, ctx_types, fail_stop)


def _finish_impl(c: list[str], g: StateGraph, spec: ProtocolSpec,
                 state_syms: dict[int, str], ctx_types: dict[str, str],
                 fail_stop: bool) -> str:
    # monitor instance + lifecycle
    terminal_ids = [s.id for s in g.states if s.is_end]
    c.append("static struct monitor monitor_singleton;")
    c.append("")
    c.append("monitor_t *monitor_instance(void) { return &monitor_singleton; }")
    c.append("")
    c.append("void monitor_init(monitor_t *mon) {")
    c.append(f"    mon->state = {state_syms[g.initial]};")
    if g.context:
        for cname, _ctype in ((cv.name, None) for cv in g.context):
            c.append(f"    mon->ctx.{cname} = 0;")
    else:
        c.append("    mon->ctx.unused_ = 0;")
    for cv, e in g.initial_updates:
        r = _CTyped(None, None, ctx_types)
        c.append(f"    mon->ctx.{cv.name} = {_render_update_rhs(r, e)};")
    c.append("}")
    c.append("")
    c.append("int monitor_state(const monitor_t *mon) { return (int)mon->state; }")
    c.append("")
    if terminal_ids:
        cond = " || ".join(f"mon->state == {state_syms[i]}" for i in terminal_ids)
    else:
        cond = "false"
    c.append("bool monitor_is_terminal(const monitor_t *mon) {")
    c.append(f"    return {cond};")
    c.append("}")
    c.append("")

    # the state machine
    c.append("bool monitor_step(monitor_t *mon, mon_direction_t dir, const mon_frame_view_t *frame) {")
    if not any(t.kind == "comm" for t in g.transitions):
        c.append("    (void)dir;")
    c.append("    if (!monitor_is_protocol_message(frame->msg_id)) {")
    c.append("        return true;  /* pre-filter: not protocol-relevant */")
    c.append("    }")
    c.append("    switch (mon->state) {")
    for s in g.states:
        out = [t for t in g.transitions if t.source == s.id]
        c.append(f"    case {state_syms[s.id]}: {{")
        if s.is_end:
            c.append("        /* terminal: nothing further is expected */")
        for t in out:
            r = _CTyped(t.schema, t.binder_var, ctx_types)
            dir_sym = "MON_DIR_GCS_TO_UAV" if t.sender.id == 0 else "MON_DIR_UAV_TO_GCS"
            c.append(f"        /* {t.sender.name} -> {t.receiver.name}: {t.label}"
                     f"{_guard_comment(t)} */")
            c.append(f"        if (frame->msg_id == MSG_ID_{t.schema.label} && dir == {dir_sym}) {{")
            c.append(f"            {_payload_struct_name(t.schema)} payload;")
            c.append(f"            {_decoder_name(t.schema)}(frame, &payload);")
            body: list[str] = []
            for cv, e in t.updates:
                ru = _CTyped(t.schema, t.binder_var, ctx_types)
                body.append(f"mon->ctx.{cv.name} = {_render_update_rhs(ru, e)};")
            body.append(f"mon->state = {state_syms[t.target]};")
            body.append("return true;")
            if isinstance(t.guard, BoolConst) and t.guard.value:
                for line in body:
                    c.append(f"            {line}")
            else:
                cond = r.condition(t.guard)
                pad = "            "
                if r.uses_div:
                    c.append(f"{pad}bool mon_ok = true;")
                    c.append(f"{pad}bool mon_guard = ({cond});")
                    c.append(f"{pad}if (mon_guard && mon_ok) {{")
                else:
                    c.append(f"{pad}if ({cond}) {{")
                for line in body:
                    c.append(f"{pad}    {line}")
                c.append(f"{pad}}}")
            c.append("        }")
        c.append("        break;")
        c.append("    }")
    c.append("    default:")
    c.append("        break;")
    c.append("    }")
    if fail_stop:
        c.append("    mon->state = STATE_POISONED;  /* latch: fail-stop mode */")
    c.append("    return false;  /* violation; state unchanged */" if not fail_stop
             else "    return false;  /* violation */")
    c.append("}")
    return "\n".join(c) + "\n"


def _guard_comment(t: Transition) -> str:
    if isinstance(t.guard, BoolConst) and t.guard.value:
        return ""
    return f" where {pretty(t.guard)}"


def _ops_of(e: Expr):
    match e:
        case Binary(op=op, left=l, right=r):
            yield op
            yield from _ops_of(l)
            yield from _ops_of(r)
        case Unary(operand=x):
            yield from _ops_of(x)
        case _:
            return


def _emit_impl_mavlink_style(g: StateGraph, spec: ProtocolSpec, header_name: str,
                             state_syms: dict[int, str], prefilter: tuple[int, ...],
                             fail_stop: bool) -> str:
    """Library-call emission style: decodes through MAVLink headers and
    switches on msgid only, mirroring the classic generated-monitor shape."""
    ctx_types = {cv.name: cv.base_type for cv in g.context}
    c: list[str] = []
    c.append(f"/* Monitor for protocol '{spec.name}'. Generated; do not edit. */")
    c.append(f'#include "{header_name}"')
    c.append("")
    c.append("void monitor_init(monitor_t *mon) {")
    c.append(f"    mon->state = {state_syms[g.initial]};")
    for cv in g.context:
        c.append(f"    mon->ctx.{cv.name} = 0;")
    c.append("}")
    c.append("")
    c.append("bool monitor_step(monitor_t *mon, const mavlink_message_t *msg) {")
    c.append("    switch (mon->state) {")
    for s in g.states:
        out = [t for t in g.transitions if t.source == s.id]
        c.append(f"    case {state_syms[s.id]}: {{")
        for t in out:
            low = t.schema.label.lower()
            r = _CTyped(t.schema, t.binder_var, ctx_types)
            c.append(f"        if (msg->msgid == MAVLINK_MSG_ID_{t.schema.label}) {{")
            c.append(f"            mavlink_{low}_t payload;")
            c.append(f"            mavlink_msg_{low}_decode(msg, &payload);")
            body = [f"mon->ctx.{cv.name} = {_render_update_rhs(_CTyped(t.schema, t.binder_var, ctx_types), e)};"
                    for cv, e in t.updates]
            body.append(f"mon->state = {state_syms[t.target]};")
            body.append("return true;")
            if isinstance(t.guard, BoolConst) and t.guard.value:
                c.extend(f"            {line}" for line in body)
            else:
                c.append(f"            if ({r.condition(t.guard)}) {{")
                c.extend(f"                {line}" for line in body)
                c.append("            }")
            c.append("        }")
        c.append("        break;")
        c.append("    }")
    c.append("    default:")
    c.append("        break;")
    c.append("    }")
    if fail_stop:
        c.append("    mon->state = STATE_POISONED;")
    c.append("    return false;")
    c.append("}")
    return "\n".join(c) + "\n"


# -- lexical structure checks -----------------------------------------------------

_FORBIDDEN_CALLS = ("malloc", "calloc", "realloc", "free", "alloca")


def _function_bodies(text: str) -> dict[str, str]:
    """Function name -> body text, by brace matching (good enough for the
    generated shape: one definition per `name(...) {` line)."""
    import re

    bodies: dict[str, str] = {}
    for m in re.finditer(r"\b(\w+)\s*\([^;{}]*\)\s*\{", text):
        name = m.group(1)
        if name in ("if", "while", "for", "switch", "union", "struct", "return", "sizeof"):
            continue
        depth = 0
        start = text.index("{", m.start())
        for i in range(start, len(text)):
            if text[i] == "{":
                depth += 1
            elif text[i] == "}":
                depth -= 1
                if depth == 0:
                    bodies[name] = text[start:i + 1]
                    break
    return bodies


@dataclass(frozen=True)
class LexicalReport:
    allocation_free: bool
    recursion_free: bool
    states_declared: bool
    offenders: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return self.allocation_free and self.recursion_free and self.states_declared


def lexical_check(unit: SourceUnit) -> LexicalReport:
    """No allocation, no recursion, and every assigned state symbol declared."""
    import re

    offenders: list[str] = []
    alloc_ok = True
    for word in _FORBIDDEN_CALLS:
        if re.search(rf"\b{word}\s*\(", unit.impl_text):
            alloc_ok = False
            offenders.append(f"allocation call {word}")

    rec_ok = True
    for fname, body in _function_bodies(unit.impl_text).items():
        inner = body[1:]  # skip its own opening brace
        if re.search(rf"\b{re.escape(fname)}\s*\(", inner):
            rec_ok = False
            offenders.append(f"self-referential call in {fname}")

    declared = set(re.findall(r"\b(STATE_\w+)\s*=", unit.header_text))
    assigned = set(re.findall(r"mon->state\s*=\s*(STATE_\w+)", unit.impl_text))
    states_ok = assigned <= declared
    if not states_ok:
        offenders.extend(f"undeclared state {s}" for s in sorted(assigned - declared))

    return LexicalReport(alloc_ok, rec_ok, states_ok, tuple(offenders))
