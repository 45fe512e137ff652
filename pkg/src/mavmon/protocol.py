"""Session-type AST for global protocols.

A protocol is a tree of End / Choice / Mu / Recur nodes.  Each Choice branch
binds a message payload under a refinement; `let` bindings promote payload
fields into the persistent monitor context.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .dialect import Dialect, MessageSchema
from .refinement import Expr, Span


@dataclass(frozen=True)
class Participant:
    id: int
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("participant name must be non-empty")
        if self.id < 0:
            raise ValueError("participant id must be non-negative")


@dataclass(frozen=True)
class PayloadBinder:
    var: str
    schema_label: str
    refinement: Expr  # BoolConst(True) when unrefined
    schema: MessageSchema | None = field(default=None, compare=False)
    span: Span | None = field(default=None, compare=False)


@dataclass(frozen=True)
class LetBinding:
    """`let name = expr;` — promotes a payload value into the context."""

    name: str
    expr: Expr
    span: Span | None = field(default=None, compare=False)


@dataclass(frozen=True)
class GlobalType:
    span: Span | None = field(default=None, compare=False, kw_only=True)


@dataclass(frozen=True)
class End(GlobalType):
    pass


@dataclass(frozen=True)
class Branch:
    label: str
    binder: PayloadBinder
    lets: tuple[LetBinding, ...]
    continuation: GlobalType


@dataclass(frozen=True)
class Choice(GlobalType):
    sender: Participant = None  # type: ignore[assignment]
    receiver: Participant = None  # type: ignore[assignment]
    branches: tuple[Branch, ...] = ()


@dataclass(frozen=True)
class Mu(GlobalType):
    loop_id: str = ""
    binder_var: str | None = None
    binder_refinement: Expr | None = None
    init: Expr | None = None
    body: GlobalType = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Recur(GlobalType):
    loop_id: str = ""
    arg: Expr | None = None


@dataclass(frozen=True)
class ProtocolSpec:
    name: str
    roles: tuple[Participant, ...]
    root: GlobalType
    constants: dict[str, int] = field(default_factory=dict, compare=False)
    dialect: Dialect | None = field(default=None, compare=False)
    resolved: bool = field(default=False, compare=False)

    def role_by_name(self, name: str) -> Participant | None:
        for r in self.roles:
            if r.name == name:
                return r
        return None


def walk(g: GlobalType):
    """Pre-order traversal of the session-type tree."""
    yield g
    if isinstance(g, Choice):
        for b in g.branches:
            yield from walk(b.continuation)
    elif isinstance(g, Mu):
        yield from walk(g.body)


def binders(g: GlobalType):
    """All (branch, enclosing choice) payload binders in pre-order."""
    for node in walk(g):
        if isinstance(node, Choice):
            for b in node.branches:
                yield b
