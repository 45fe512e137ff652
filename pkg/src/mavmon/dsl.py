"""Textual protocol DSL (`.rmpst` files).

Each interaction step carries exactly the five semantic pieces — sender,
receiver, label, payload binder, refinement — with recursion and loops:

    protocol mission_upload {
      roles GCS = 0, UAV = 1;
      const LIMIT = 65535;

      GCS -> UAV {
        MISSION_COUNT(m: MISSION_COUNT where m.count >= 1 && m.count < LIMIT) ->
          let cnt = m.count;
          rec T(curr: int where curr >= 0 && curr <= cnt := 0) {
            UAV -> GCS { ... }
          }
      }
    }

Bare identifiers in refinements name payload fields of the current message
(checked first) or context variables; `v.field` goes through the payload
binder explicitly.  Only `let`-bound names and `rec` binders enter the
persistent context.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import (
    DslSyntaxError,
    DuplicateRoleId,
    EmptyChoice,
    UnboundRecursionVariable,
)
from .protocol import (
    Branch,
    Choice,
    End,
    GlobalType,
    LetBinding,
    Mu,
    Participant,
    PayloadBinder,
    ProtocolSpec,
    Recur,
)
from .refinement import Binary, BoolConst, Expr, FieldAccess, IntConst, Unary, Var

KEYWORDS = {"protocol", "roles", "const", "rec", "continue", "end", "where", "let", "true", "false", "int"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|//[^\n]*)
  | (?P<num>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>->|:=|==|!=|<=|>=|&&|\|\||[{}(),;:.=<>!+\-*/])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # 'num' | 'ident' | 'op' | 'eof'
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise DslSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup or ""
        tok = m.group()
        if kind != "ws":
            tokens.append(Token(kind, tok, line, col))
        newlines = tok.count("\n")
        if newlines:
            line += newlines
            col = len(tok) - tok.rfind("\n")
        else:
            col += len(tok)
        pos = m.end()
    tokens.append(Token("eof", "<eof>", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0
        self.loop_ids: list[str] = []
        self.role_names: dict[str, Participant] = {}

    # -- token helpers -----------------------------------------------------

    def peek(self) -> Token:
        return self.tokens[self.i]

    def next(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        return self.peek().text == text and self.peek().kind in ("op", "ident")

    def expect(self, text: str) -> Token:
        t = self.next()
        if t.text != text:
            raise DslSyntaxError(f"expected {text!r}, found {t.text!r}", t.line, t.col)
        return t

    def ident(self, what: str = "identifier") -> Token:
        t = self.next()
        if t.kind != "ident" or t.text in KEYWORDS:
            raise DslSyntaxError(f"expected {what}, found {t.text!r}", t.line, t.col)
        return t

    # -- grammar -------------------------------------------------------------

    def protocol(self) -> ProtocolSpec:
        self.expect("protocol")
        name = self.ident("protocol name").text
        self.expect("{")
        roles = self.roles_decl()
        constants: dict[str, int] = {}
        while self.at("const"):
            self.next()
            cname = self.ident("constant name").text
            self.expect("=")
            val = self.next()
            if val.kind != "num":
                raise DslSyntaxError("constant value must be an integer literal", val.line, val.col)
            self.expect(";")
            constants[cname] = int(val.text)
        root = self.global_type()
        self.expect("}")
        t = self.peek()
        if t.kind != "eof":
            raise DslSyntaxError(f"trailing input {t.text!r}", t.line, t.col)
        return ProtocolSpec(name=name, roles=roles, root=root, constants=constants)

    def roles_decl(self) -> tuple[Participant, ...]:
        self.expect("roles")
        roles: list[Participant] = []
        ids_seen: set[int] = set()
        while True:
            rname = self.ident("role name")
            self.expect("=")
            rid_tok = self.next()
            if rid_tok.kind != "num":
                raise DslSyntaxError("role id must be an integer literal", rid_tok.line, rid_tok.col)
            rid = int(rid_tok.text)
            if rid in ids_seen:
                raise DuplicateRoleId(f"role id {rid} used twice", rid_tok.line, rid_tok.col)
            if rname.text in self.role_names:
                raise DuplicateRoleId(f"role name {rname.text!r} used twice", rname.line, rname.col)
            ids_seen.add(rid)
            p = Participant(rid, rname.text)
            self.role_names[rname.text] = p
            roles.append(p)
            if self.at(","):
                self.next()
                continue
            break
        self.expect(";")
        return tuple(roles)

    def global_type(self) -> GlobalType:
        t = self.peek()
        if self.at("end"):
            self.next()
            return End(span=(t.line, t.col))
        if self.at("continue"):
            self.next()
            loop = self.ident("recursion name")
            if loop.text not in self.loop_ids:
                raise UnboundRecursionVariable(
                    f"'continue {loop.text}' outside any 'rec {loop.text}'", loop.line, loop.col)
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Recur(loop_id=loop.text, arg=arg, span=(t.line, t.col))
        if self.at("rec"):
            return self.rec()
        return self.interaction()

    def rec(self) -> Mu:
        t = self.expect("rec")
        loop = self.ident("recursion name")
        binder_var = None
        binder_ref: Expr | None = None
        init: Expr | None = None
        if self.at("("):
            self.next()
            binder_var = self.ident("binder variable").text
            self.expect(":")
            self.expect("int")
            if self.at("where"):
                self.next()
                binder_ref = self.expr()
            self.expect(":=")
            init = self.expr()
            self.expect(")")
        self.expect("{")
        self.loop_ids.append(loop.text)
        body = self.global_type()
        self.loop_ids.pop()
        self.expect("}")
        return Mu(loop_id=loop.text, binder_var=binder_var, binder_refinement=binder_ref,
                  init=init, body=body, span=(t.line, t.col))

    def interaction(self) -> Choice:
        sender_tok = self.ident("role name")
        sender = self.role_names.get(sender_tok.text)
        if sender is None:
            raise DslSyntaxError(f"unknown role {sender_tok.text!r}", sender_tok.line, sender_tok.col)
        self.expect("->")
        recv_tok = self.ident("role name")
        receiver = self.role_names.get(recv_tok.text)
        if receiver is None:
            raise DslSyntaxError(f"unknown role {recv_tok.text!r}", recv_tok.line, recv_tok.col)
        brace = self.expect("{")
        branches: list[Branch] = []
        if self.at("}"):
            raise EmptyChoice("choice has no branches", brace.line, brace.col)
        while True:
            branches.append(self.branch())
            if self.at(","):
                self.next()
                continue
            break
        self.expect("}")
        return Choice(sender=sender, receiver=receiver, branches=tuple(branches),
                      span=(sender_tok.line, sender_tok.col))

    def branch(self) -> Branch:
        label = self.ident("message label")
        self.expect("(")
        var = self.ident("payload variable").text
        self.expect(":")
        schema_label = self.ident("schema label").text
        refinement: Expr = BoolConst(True, span=(label.line, label.col))
        if self.at("where"):
            self.next()
            refinement = self.expr()
        self.expect(")")
        self.expect("->")
        lets: list[LetBinding] = []
        while self.at("let"):
            lt = self.next()
            lname = self.ident("let name").text
            self.expect("=")
            lexpr = self.expr()
            self.expect(";")
            lets.append(LetBinding(lname, lexpr, span=(lt.line, lt.col)))
        continuation = self.global_type()
        binder = PayloadBinder(var=var, schema_label=schema_label, refinement=refinement,
                               span=(label.line, label.col))
        return Branch(label=label.text, binder=binder, lets=tuple(lets), continuation=continuation)

    # -- expressions (precedence climbing) -----------------------------------

    def expr(self) -> Expr:
        return self._or()

    def _binop(self, sub, ops: tuple[str, ...]) -> Expr:
        left = sub()
        while self.peek().kind == "op" and self.peek().text in ops:
            op = self.next()
            right = sub()
            left = Binary(op.text, left, right, span=(op.line, op.col))
        return left

    def _or(self) -> Expr:
        return self._binop(self._and, ("||",))

    def _and(self) -> Expr:
        return self._binop(self._cmp, ("&&",))

    def _cmp(self) -> Expr:
        return self._binop(self._add, ("==", "!=", "<", ">", "<=", ">="))

    def _add(self) -> Expr:
        return self._binop(self._mul, ("+", "-"))

    def _mul(self) -> Expr:
        return self._binop(self._unary, ("*", "/"))

    def _unary(self) -> Expr:
        t = self.peek()
        if t.text == "-" and t.kind == "op":
            self.next()
            operand = self._unary()
            if isinstance(operand, IntConst):  # fold literal negation
                return IntConst(-operand.value, span=(t.line, t.col))
            return Unary("neg", operand, span=(t.line, t.col))
        if t.text == "!" and t.kind == "op":
            self.next()
            return Unary("not", self._unary(), span=(t.line, t.col))
        return self._atom()

    def _atom(self) -> Expr:
        t = self.next()
        if t.kind == "num":
            return IntConst(int(t.text), span=(t.line, t.col))
        if t.text == "(" and t.kind == "op":
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "ident":
            if t.text == "true":
                return BoolConst(True, span=(t.line, t.col))
            if t.text == "false":
                return BoolConst(False, span=(t.line, t.col))
            if t.text in KEYWORDS:
                raise DslSyntaxError(f"unexpected keyword {t.text!r} in expression", t.line, t.col)
            if self.at("."):
                self.next()
                fld = self.ident("field name")
                return FieldAccess(t.text, fld.text, span=(t.line, t.col))
            return Var(t.text, span=(t.line, t.col))
        raise DslSyntaxError(f"unexpected token {t.text!r} in expression", t.line, t.col)


def parse_protocol(text: str) -> ProtocolSpec:
    """Parse DSL source into an unresolved ProtocolSpec (spans on all nodes)."""
    return _Parser(tokenize(text)).protocol()


def parse_expr(text: str) -> Expr:
    """Parse a standalone refinement expression (used by tests and tools)."""
    p = _Parser(tokenize(text))
    e = p.expr()
    t = p.peek()
    if t.kind != "eof":
        raise DslSyntaxError(f"trailing input {t.text!r}", t.line, t.col)
    return e


# -- pretty printer -----------------------------------------------------------

def print_protocol(spec: ProtocolSpec) -> str:
    from .refinement import pretty

    out: list[str] = [f"protocol {spec.name} {{"]
    roles = ", ".join(f"{r.name} = {r.id}" for r in spec.roles)
    out.append(f"  roles {roles};")
    for cname, cval in spec.constants.items():
        out.append(f"  const {cname} = {cval};")

    def node(g: GlobalType, indent: int) -> None:
        pad = "  " * indent
        if isinstance(g, End):
            out.append(f"{pad}end")
        elif isinstance(g, Recur):
            out.append(f"{pad}continue {g.loop_id}({pretty(g.arg)})")
        elif isinstance(g, Mu):
            head = f"rec {g.loop_id}"
            if g.binder_var is not None:
                where = f" where {pretty(g.binder_refinement)}" if g.binder_refinement is not None else ""
                head += f"({g.binder_var}: int{where} := {pretty(g.init)})"
            out.append(f"{pad}{head} {{")
            node(g.body, indent + 1)
            out.append(f"{pad}}}")
        elif isinstance(g, Choice):
            out.append(f"{pad}{g.sender.name} -> {g.receiver.name} {{")
            for k, b in enumerate(g.branches):
                where = ""
                if b.binder.refinement != BoolConst(True):
                    where = f" where {pretty(b.binder.refinement)}"
                out.append(f"{pad}  {b.label}({b.binder.var}: {b.binder.schema_label}{where}) ->")
                for lt in b.lets:
                    out.append(f"{pad}    let {lt.name} = {pretty(lt.expr)};")
                node(b.continuation, indent + 2)
                if k + 1 < len(g.branches):
                    out[-1] += ","
            out.append(f"{pad}}}")
        else:
            raise TypeError(f"unknown node {g!r}")

    node(spec.root, 1)
    out.append("}")
    return "\n".join(out) + "\n"
