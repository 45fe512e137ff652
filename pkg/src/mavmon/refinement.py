"""Refinement expression language: AST, evaluator, and type checker.

Expressions range over 64-bit signed integers and booleans.  Evaluation is
strict left-to-right with short-circuit `&&`/`||` so the interpreter and the
emitted C guards agree bit-for-bit.  Division truncates toward zero; a zero
divisor or a 64-bit overflow raises (the monitor treats such a guard as
false).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    ArithmeticOverflow,
    DivisionByZero,
    TypeMismatch,
    UnboundVariable,
)

INT64_MIN = -(1 << 63)
INT64_MAX = (1 << 63) - 1

# Value = int (signed 64-bit) | bool.  Python bools are ints, so every type
# test below uses `type(v) is bool` to keep the two apart.
Value = int | bool

Span = tuple[int, int]  # (line, col), 1-based


@dataclass(frozen=True)
class Expr:
    """Base class; every node carries an optional source span."""

    span: Span | None = field(default=None, compare=False, kw_only=True)


@dataclass(frozen=True)
class IntConst(Expr):
    value: int = 0


@dataclass(frozen=True)
class BoolConst(Expr):
    value: bool = False


@dataclass(frozen=True)
class EnumConst(Expr):
    """A named constant resolved against the dialect's enum tables.

    `value` is None until resolution; evaluating an unresolved enum is an
    UnboundVariable error.
    """

    name: str = ""
    value: int | None = None


@dataclass(frozen=True)
class Var(Expr):
    name: str = ""


@dataclass(frozen=True)
class FieldAccess(Expr):
    var: str = ""
    fld: str = ""


@dataclass(frozen=True)
class Unary(Expr):
    op: str = ""  # 'neg' | 'not'
    operand: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Binary(Expr):
    op: str = ""  # + - * / == != < > <= >= && ||
    left: Expr = None  # type: ignore[assignment]
    right: Expr = None  # type: ignore[assignment]


ARITH_OPS = ("+", "-", "*", "/")
CMP_OPS = ("==", "!=", "<", ">", "<=", ">=")
LOGIC_OPS = ("&&", "||")


def _check_i64(v: int) -> int:
    if v < INT64_MIN or v > INT64_MAX:
        raise ArithmeticOverflow(f"value {v} outside signed 64-bit range")
    return v


def _as_int(v: Value, ctx: str) -> int:
    if type(v) is bool:
        raise TypeMismatch(f"expected integer, got boolean in {ctx}")
    return v


def _as_bool(v: Value, ctx: str) -> bool:
    if type(v) is not bool:
        raise TypeMismatch(f"expected boolean, got integer in {ctx}")
    return v


def trunc_div(a: int, b: int) -> int:
    """C99 division: truncate toward zero."""
    if b == 0:
        raise DivisionByZero(f"{a} / 0")
    q = abs(a) // abs(b)
    if (a < 0) != (b < 0):
        q = -q
    return _check_i64(q)


def eval_expr(e: Expr, env: dict[str, Value] | None = None,
              payload: dict[str, Value] | None = None) -> Value:
    """Evaluate `e` under context variables `env` and message fields `payload`.

    Bare names resolve against the payload first (the in-scope message),
    then the context; `v.field` always resolves against the payload.
    """
    env = env or {}
    payload = payload or {}
    match e:
        case IntConst(value=v):
            return _check_i64(v)
        case BoolConst(value=v):
            return v
        case EnumConst(name=n, value=v):
            if v is None:
                raise UnboundVariable(f"unresolved enum constant {n}")
            return v
        case Var(name=n):
            if n in payload:
                return payload[n]
            if n in env:
                return env[n]
            raise UnboundVariable(n)
        case FieldAccess(var=v, fld=f):
            if f in payload:
                return payload[f]
            raise UnboundVariable(f"{v}.{f}")
        case Unary(op="neg", operand=x):
            return _check_i64(-_as_int(eval_expr(x, env, payload), "negation"))
        case Unary(op="not", operand=x):
            return not _as_bool(eval_expr(x, env, payload), "logical not")
        case Binary(op="&&", left=l, right=r):
            if not _as_bool(eval_expr(l, env, payload), "&&"):
                return False
            return _as_bool(eval_expr(r, env, payload), "&&")
        case Binary(op="||", left=l, right=r):
            if _as_bool(eval_expr(l, env, payload), "||"):
                return True
            return _as_bool(eval_expr(r, env, payload), "||")
        case Binary(op=op, left=l, right=r) if op in ARITH_OPS:
            a = _as_int(eval_expr(l, env, payload), op)
            b = _as_int(eval_expr(r, env, payload), op)
            if op == "+":
                return _check_i64(a + b)
            if op == "-":
                return _check_i64(a - b)
            if op == "*":
                return _check_i64(a * b)
            return trunc_div(a, b)
        case Binary(op=op, left=l, right=r) if op in CMP_OPS:
            a = eval_expr(l, env, payload)
            b = eval_expr(r, env, payload)
            if (type(a) is bool) != (type(b) is bool):
                raise TypeMismatch(f"mixed-type comparison {op}")
            if type(a) is bool and op not in ("==", "!="):
                raise TypeMismatch(f"ordering {op} on booleans")
            if op == "==":
                return a == b
            if op == "!=":
                return a != b
            if op == "<":
                return a < b
            if op == ">":
                return a > b
            if op == "<=":
                return a <= b
            return a >= b
        case _:
            raise TypeMismatch(f"malformed expression node {e!r}")


def free_variables(e: Expr) -> set[str]:
    """Root names of every Var/FieldAccess occurring in `e`."""
    match e:
        case Var(name=n):
            return {n}
        case FieldAccess(var=v):
            return {v}
        case Unary(operand=x):
            return free_variables(x)
        case Binary(left=l, right=r):
            return free_variables(l) | free_variables(r)
        case _:
            return set()


def field_reads(e: Expr) -> set[tuple[str, str]]:
    """All (binder, field) pairs read through FieldAccess nodes."""
    match e:
        case FieldAccess(var=v, fld=f):
            return {(v, f)}
        case Unary(operand=x):
            return field_reads(x)
        case Binary(left=l, right=r):
            return field_reads(l) | field_reads(r)
        case _:
            return set()


# -- validation --------------------------------------------------------------

@dataclass(frozen=True)
class Issue:
    kind: str  # UnknownField | UnknownVariable | TypeMismatch
    message: str
    span: Span | None = None

    def __str__(self) -> str:
        at = f" at {self.span[0]}:{self.span[1]}" if self.span else ""
        return f"{self.kind}{at}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    issues: tuple[Issue, ...] = ()

    def __str__(self) -> str:
        return "ok" if self.ok else "; ".join(str(i) for i in self.issues)


# Fields wider than what fits a signed 64-bit guard, plus non-integer
# storage, are storable but may not appear in refinements.
_UNREFINABLE = {"float", "double", "u64"}


def validate_refinement(e: Expr, schema, ctx_vars: dict[str, str],
                        binder: str | None = None,
                        expected: str = "bool") -> ValidationReport:
    """Type-check `e` against a message schema and the context variables.

    Passes iff the expression has the `expected` type (boolean for guards,
    integer for updates), every field access hits a schema field, and every
    bare name hits a schema field (local wins) or a context variable.
    `schema` may be None for context-only expressions.
    """
    issues: list[Issue] = []

    def fail(kind: str, msg: str, node: Expr) -> str:
        issues.append(Issue(kind, msg, node.span))
        return "error"

    def field_type(name: str, node: Expr) -> str:
        mf = schema.field_by_name(name) if schema is not None else None
        if mf is None:
            return fail("UnknownField", f"no field '{name}' in {schema.label if schema else '<no schema>'}", node)
        if mf.base_type in _UNREFINABLE or mf.base_type.startswith("char") or mf.array_len:
            kind = f"{mf.base_type}[{mf.array_len}]" if mf.array_len else mf.base_type
            return fail("TypeMismatch", f"field '{name}' of type {kind} is not refinable", node)
        return "int"

    def typeof(node: Expr) -> str:
        match node:
            case IntConst():
                return "int"
            case BoolConst():
                return "bool"
            case EnumConst():
                return "int"
            case Var(name=n):
                if schema is not None and schema.field_by_name(n) is not None:
                    return field_type(n, node)
                if n in ctx_vars:
                    return "int"
                return fail("UnknownVariable", f"unbound name '{n}'", node)
            case FieldAccess(var=v, fld=f):
                if binder is not None and v != binder:
                    return fail("UnknownVariable", f"'{v}' is not the payload binder", node)
                if schema is None:
                    return fail("UnknownField", f"field access '{v}.{f}' without a schema", node)
                return field_type(f, node)
            case Unary(op=op, operand=x):
                t = typeof(x)
                want = "int" if op == "neg" else "bool"
                if t not in (want, "error"):
                    return fail("TypeMismatch", f"'{op}' applied to {t}", node)
                return want
            case Binary(op=op, left=l, right=r):
                lt, rt = typeof(l), typeof(r)
                if "error" in (lt, rt):
                    return "error"
                if op in ARITH_OPS:
                    if lt != "int" or rt != "int":
                        return fail("TypeMismatch", f"'{op}' needs integers, got {lt} and {rt}", node)
                    return "int"
                if op in LOGIC_OPS:
                    if lt != "bool" or rt != "bool":
                        return fail("TypeMismatch", f"'{op}' needs booleans, got {lt} and {rt}", node)
                    return "bool"
                # comparison: homogeneous; ordering only on integers
                if lt != rt:
                    return fail("TypeMismatch", f"'{op}' compares {lt} with {rt}", node)
                if lt == "bool" and op not in ("==", "!="):
                    return fail("TypeMismatch", f"ordering '{op}' on booleans", node)
                return "bool"
            case _:
                return fail("TypeMismatch", f"malformed node {node!r}", node)

    top = typeof(e)
    if top not in (expected, "error"):
        issues.append(Issue("TypeMismatch", f"expression must be {expected}, got {top}", e.span))
    return ValidationReport(ok=not issues, issues=tuple(issues))


# -- JSON encoding (versioned graph format) ----------------------------------

def expr_to_json(e: Expr) -> dict:
    match e:
        case IntConst(value=v):
            return {"k": "int", "v": v}
        case BoolConst(value=v):
            return {"k": "bool", "v": v}
        case EnumConst(name=n, value=v):
            return {"k": "enum", "name": n, "v": v}
        case Var(name=n):
            return {"k": "var", "name": n}
        case FieldAccess(var=v, fld=f):
            return {"k": "field", "var": v, "field": f}
        case Unary(op=op, operand=x):
            return {"k": "un", "op": op, "e": expr_to_json(x)}
        case Binary(op=op, left=l, right=r):
            return {"k": "bin", "op": op, "l": expr_to_json(l), "r": expr_to_json(r)}
        case _:
            raise TypeMismatch(f"malformed node {e!r}")


def expr_from_json(d: dict) -> Expr:
    match d["k"]:
        case "int":
            return IntConst(d["v"])
        case "bool":
            return BoolConst(d["v"])
        case "enum":
            return EnumConst(d["name"], d["v"])
        case "var":
            return Var(d["name"])
        case "field":
            return FieldAccess(d["var"], d["field"])
        case "un":
            return Unary(d["op"], expr_from_json(d["e"]))
        case "bin":
            return Binary(d["op"], expr_from_json(d["l"]), expr_from_json(d["r"]))
        case kind:
            raise ValueError(f"unknown expression kind {kind!r}")


# -- pretty printing ---------------------------------------------------------

_PREC = {"||": 1, "&&": 2, "==": 3, "!=": 3, "<": 3, ">": 3, "<=": 3, ">=": 3,
         "+": 4, "-": 4, "*": 5, "/": 5}


def pretty(e: Expr) -> str:
    """Source-syntax rendering; parses back to a structurally equal tree."""

    def go(node: Expr, parent_prec: int) -> str:
        match node:
            case IntConst(value=v):
                return str(v)
            case BoolConst(value=v):
                return "true" if v else "false"
            case EnumConst(name=n):
                return n
            case Var(name=n):
                return n
            case FieldAccess(var=v, fld=f):
                return f"{v}.{f}"
            case Unary(op=op, operand=x):
                inner = go(x, 6)
                return ("-" if op == "neg" else "!") + inner
            case Binary(op=op, left=l, right=r):
                p = _PREC[op]
                s = f"{go(l, p)} {op} {go(r, p + 1)}"
                return f"({s})" if p < parent_prec else s
            case _:
                raise TypeMismatch(f"malformed node {node!r}")

    return go(e, 0)
