"""Schema binding and refinement validation over a parsed protocol.

Binds every payload binder to its dialect schema, substitutes spec-level
constants and enum entries into refinements, type-checks every expression
in context, and rejects name clashes that would make the monitor context
ambiguous.
"""

from __future__ import annotations

from dataclasses import replace

from .dialect import Dialect, MessageSchema
from .errors import (
    AmbiguousBranch,
    DuplicateContextVar,
    RefinementInvalid,
    UnknownMessageLabel,
)
from .protocol import (
    Branch,
    Choice,
    End,
    GlobalType,
    LetBinding,
    Mu,
    ProtocolSpec,
    Recur,
    walk,
)
from .refinement import (
    Binary,
    EnumConst,
    Expr,
    IntConst,
    Unary,
    Var,
    validate_refinement,
)


def _substitute(e: Expr, schema: MessageSchema | None, ctx: set[str],
                constants: dict[str, int], dialect: Dialect) -> Expr:
    """Replace free names that are neither payload fields nor context
    variables with spec constants or dialect enum values."""
    match e:
        case Var(name=n):
            if schema is not None and schema.field_by_name(n) is not None:
                return e
            if n in ctx:
                return e
            if n in constants:
                return IntConst(constants[n], span=e.span)
            v = dialect.enum_value(n)
            if v is not None:
                return EnumConst(n, v, span=e.span)
            return e
        case Unary(op=op, operand=x):
            return Unary(op, _substitute(x, schema, ctx, constants, dialect), span=e.span)
        case Binary(op=op, left=l, right=r):
            return Binary(op, _substitute(l, schema, ctx, constants, dialect),
                          _substitute(r, schema, ctx, constants, dialect), span=e.span)
        case _:
            return e


def resolve(spec: ProtocolSpec, dialect: Dialect) -> ProtocolSpec:
    """Produce a resolved copy of `spec` or raise the first binding error."""

    ctx_names: set[str] = set()
    for node in walk(spec.root):
        names: list[tuple[str, object]] = []
        if isinstance(node, Mu) and node.binder_var is not None:
            names.append((node.binder_var, node))
        if isinstance(node, Choice):
            for b in node.branches:
                for lt in b.lets:
                    names.append((lt.name, lt))
        for name, owner in names:
            if name in ctx_names:
                span = getattr(owner, "span", None)
                raise DuplicateContextVar(
                    f"context variable {name!r} declared twice",
                    *(span or (None, None)))
            ctx_names.add(name)

    def check(e: Expr, schema: MessageSchema | None, ctx: dict[str, str],
              binder: str | None, expected: str) -> None:
        report = validate_refinement(e, schema, ctx, binder, expected)
        if not report.ok:
            span = report.issues[0].span or (None, None)
            raise RefinementInvalid(report, *span)

    def fix_expr(e: Expr, schema: MessageSchema | None, ctx: dict[str, str],
                 binder: str | None, expected: str) -> Expr:
        e2 = _substitute(e, schema, set(ctx), spec.constants, dialect)
        check(e2, schema, ctx, binder, expected)
        return e2

    def go(node: GlobalType, ctx: dict[str, str],
           scope: tuple[str, MessageSchema] | None) -> GlobalType:
        if isinstance(node, End):
            return node
        if isinstance(node, Recur):
            # the loop-back update rides the enclosing communication edge,
            # so the in-scope payload (if any) is readable here
            schema = scope[1] if scope else None
            binder = scope[0] if scope else None
            arg = fix_expr(node.arg, schema, ctx, binder, "int")
            return replace(node, arg=arg)
        if isinstance(node, Mu):
            schema = scope[1] if scope else None
            binder = scope[0] if scope else None
            init = None
            binder_ref = None
            body_ctx = dict(ctx)
            if node.binder_var is not None:
                init = fix_expr(node.init, schema, ctx, binder, "int")
                body_ctx[node.binder_var] = "int"
                if node.binder_refinement is not None:
                    binder_ref = _substitute(node.binder_refinement, None,
                                             set(body_ctx), spec.constants, dialect)
                    check(binder_ref, None, body_ctx, None, "bool")
            body = go(node.body, body_ctx, scope)
            return replace(node, init=init, binder_refinement=binder_ref, body=body)
        if isinstance(node, Choice):
            seen_schemas: dict[str, str] = {}
            new_branches: list[Branch] = []
            for b in node.branches:
                schema = dialect.schema(b.binder.schema_label)
                if schema is None:
                    raise UnknownMessageLabel(
                        f"no message {b.binder.schema_label!r} in dialect",
                        *(b.binder.span or (None, None)))
                if b.binder.schema_label in seen_schemas:
                    raise AmbiguousBranch(
                        f"schema {b.binder.schema_label!r} bound by branches "
                        f"{seen_schemas[b.binder.schema_label]!r} and {b.label!r} of one choice",
                        *(b.binder.span or (None, None)))
                seen_schemas[b.binder.schema_label] = b.label
                refinement = fix_expr(b.binder.refinement, schema, ctx, b.binder.var, "bool")
                branch_ctx = dict(ctx)
                new_lets: list[LetBinding] = []
                for lt in b.lets:
                    lexpr = fix_expr(lt.expr, schema, branch_ctx, b.binder.var, "int")
                    branch_ctx[lt.name] = "int"
                    new_lets.append(replace(lt, expr=lexpr))
                continuation = go(b.continuation, branch_ctx, (b.binder.var, schema))
                new_binder = replace(b.binder, refinement=refinement, schema=schema)
                new_branches.append(Branch(b.label, new_binder, tuple(new_lets), continuation))
            return replace(node, branches=tuple(new_branches))
        raise TypeError(f"unknown node {node!r}")

    root = go(spec.root, {}, None)
    return replace(spec, root=root, dialect=dialect, resolved=True)
