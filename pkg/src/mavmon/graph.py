"""Intermediate representation: the protocol state graph.

One state per End/Choice/Mu/Recur node of the session type.  Choice branches
become labeled, guarded communication transitions; Mu initialization and
loop-back arguments become internal epsilon transitions (label RECUR)
carrying context updates.  A Recur's epsilon edge targets the loop *body*
state, bypassing the Mu head so the initializer never re-runs on loop-back.

`compress_epsilon` folds every epsilon chain into the communication edge
that precedes it, leaving the flat machine the emitter and interpreter run.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .dialect import MessageSchema
from .errors import DefiniteAssignmentError, UnguardedLoop
from .protocol import (
    Choice,
    End,
    GlobalType,
    Mu,
    Participant,
    ProtocolSpec,
    Recur,
)
from .refinement import (
    BoolConst,
    Expr,
    FieldAccess,
    expr_from_json,
    expr_to_json,
    free_variables,
    pretty,
)

RECUR_LABEL = "RECUR"

GRAPH_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ContextVar:
    name: str
    base_type: str  # 'int' or a message-field base type such as 'u16'
    origin: tuple[str, object]  # ('mu', loop_id) | ('let', state_id)


Update = tuple[ContextVar, Expr]


@dataclass(frozen=True)
class State:
    id: int
    is_end: bool


@dataclass(frozen=True)
class Transition:
    source: int
    target: int
    kind: str  # 'comm' | 'eps'
    label: str  # message label, or RECUR on epsilon edges
    sender: Participant | None = None
    receiver: Participant | None = None
    schema: MessageSchema | None = None
    binder_var: str | None = None
    guard: Expr = field(default_factory=lambda: BoolConst(True))
    updates: tuple[Update, ...] = ()


@dataclass(frozen=True)
class StateGraph:
    states: tuple[State, ...]
    transitions: tuple[Transition, ...]
    initial: int
    context: tuple[ContextVar, ...]
    initial_updates: tuple[Update, ...] = ()  # non-empty only after compressing a Mu-rooted protocol

    @property
    def epsilon_free(self) -> bool:
        return all(t.kind == "comm" for t in self.transitions)

    def state(self, sid: int) -> State:
        return self.states[sid]

    def context_var(self, name: str) -> ContextVar | None:
        for cv in self.context:
            if cv.name == name:
                return cv
        return None

    def message_ids(self) -> list[int]:
        ids = {t.schema.msg_id for t in self.transitions if t.schema is not None}
        return sorted(ids)

    def ordered_labels(self) -> list[str]:
        """Transition labels in (source id, declaration order) traversal order."""
        order = sorted(range(len(self.transitions)),
                       key=lambda i: (self.transitions[i].source, i))
        return [self.transitions[i].label for i in order]


def build_graph(spec: ProtocolSpec) -> StateGraph:
    """Materialize a resolved protocol into its pre-compression state graph."""
    assert spec.resolved, "build_graph needs a resolved protocol"
    states: list[State] = []
    transitions: list[Transition] = []
    context: list[ContextVar] = []

    def alloc(is_end: bool) -> int:
        sid = len(states)
        states.append(State(sid, is_end))
        return sid

    # loop_id -> (mu context var | None, loop body state id)
    scope: dict[str, tuple[ContextVar | None, int]] = {}

    def visit(node: GlobalType) -> int:
        if isinstance(node, End):
            return alloc(True)
        if isinstance(node, Mu):
            sid = alloc(False)
            cv = None
            updates: tuple[Update, ...] = ()
            if node.binder_var is not None:
                cv = ContextVar(node.binder_var, "int", ("mu", node.loop_id))
                context.append(cv)
                updates = ((cv, node.init),)
            body_id = len(states)  # the body node allocates next
            scope[node.loop_id] = (cv, body_id)
            transitions.append(Transition(source=sid, target=body_id, kind="eps",
                                          label=RECUR_LABEL, updates=updates))
            visit(node.body)
            return sid
        if isinstance(node, Recur):
            sid = alloc(False)
            cv, body_id = scope[node.loop_id]
            updates = ((cv, node.arg),) if cv is not None else ()
            transitions.append(Transition(source=sid, target=body_id, kind="eps",
                                          label=RECUR_LABEL, updates=updates))
            return sid
        if isinstance(node, Choice):
            sid = alloc(False)
            for b in node.branches:
                updates = []
                for lt in b.lets:
                    base = "int"
                    if isinstance(lt.expr, FieldAccess) and b.binder.schema is not None:
                        f = b.binder.schema.field_by_name(lt.expr.fld)
                        if f is not None:
                            base = f.base_type
                    cv = ContextVar(lt.name, base, ("let", sid))
                    context.append(cv)
                    updates.append((cv, lt.expr))
                target = visit(b.continuation)
                transitions.append(Transition(
                    source=sid, target=target, kind="comm", label=b.label,
                    sender=node.sender, receiver=node.receiver,
                    schema=b.binder.schema, binder_var=b.binder.var,
                    guard=b.binder.refinement, updates=tuple(updates)))
            return sid
        raise TypeError(f"unknown node {node!r}")

    initial = visit(spec.root)
    return StateGraph(states=tuple(states), transitions=tuple(transitions),
                      initial=initial, context=tuple(context))


# -- epsilon compression -------------------------------------------------------

def _eps_successor(g: StateGraph, sid: int) -> Transition | None:
    eps = [t for t in g.transitions if t.source == sid and t.kind == "eps"]
    if not eps:
        return None
    assert len(eps) == 1, f"state {sid} has {len(eps)} epsilon edges"
    return eps[0]


def _fold_chain(g: StateGraph, start: int) -> tuple[int, tuple[Update, ...]]:
    updates: list[Update] = []
    cur = start
    visited = {start}
    while (e := _eps_successor(g, cur)) is not None:
        updates.extend(e.updates)
        cur = e.target
        if cur in visited:
            raise UnguardedLoop(f"epsilon cycle through state {cur}")
        visited.add(cur)
    return cur, tuple(updates)


def compress_epsilon(g: StateGraph) -> StateGraph:
    """Fold epsilon chains into the preceding communication transitions.

    Requires guarded recursion (no epsilon cycles).  States that become
    unreachable are dropped and ids renumbered densely with initial = 0.
    """
    new_initial_old, init_updates = _fold_chain(g, g.initial)
    folded: list[Transition] = []
    for t in g.transitions:
        if t.kind != "comm":
            continue
        target, chain_updates = _fold_chain(g, t.target)
        folded.append(replace(t, target=target, updates=t.updates + chain_updates))

    # reachability over folded communication edges
    reach = {new_initial_old}
    frontier = [new_initial_old]
    by_source: dict[int, list[Transition]] = {}
    for t in folded:
        by_source.setdefault(t.source, []).append(t)
    while frontier:
        s = frontier.pop()
        for t in by_source.get(s, ()):
            if t.target not in reach:
                reach.add(t.target)
                frontier.append(t.target)

    kept = [new_initial_old] + sorted(s for s in reach if s != new_initial_old)
    remap = {old: new for new, old in enumerate(kept)}
    states = tuple(State(remap[s], g.states[s].is_end) for s in kept)
    transitions = tuple(
        replace(t, source=remap[t.source], target=remap[t.target])
        for t in folded if t.source in reach)
    context = tuple(
        replace(cv, origin=("let", remap.get(cv.origin[1], -1)))
        if cv.origin[0] == "let" else cv
        for cv in g.context)
    return StateGraph(states=states, transitions=transitions, initial=0,
                      context=context,
                      initial_updates=g.initial_updates + init_updates)


# -- definite assignment -------------------------------------------------------

def check_definite_assignment(g: StateGraph) -> None:
    """Every context variable read by a guard or update must be assigned on
    all paths reaching that read.  Runs on the compressed graph, where each
    transition knows the full payload scope of its updates."""
    all_names = {cv.name for cv in g.context}

    def payload_names(t: Transition) -> set[str]:
        names = set()
        if t.schema is not None:
            names.update(f.name for f in t.schema.xml_fields)
        if t.binder_var is not None:
            names.add(t.binder_var)
        return names

    for cv, e in g.initial_updates:
        if free_variables(e):
            raise DefiniteAssignmentError(
                f"initializer of {cv.name!r} reads {sorted(free_variables(e))} before any message")

    assigned: dict[int, set[str]] = {s.id: set(all_names) for s in g.states}
    assigned[g.initial] = {cv.name for cv, _ in g.initial_updates}

    changed = True
    while changed:
        changed = False
        for t in g.transitions:
            out = set(assigned[t.source]) | {cv.name for cv, _ in t.updates}
            new = assigned[t.target] & out
            if new != assigned[t.target]:
                assigned[t.target] = new
                changed = True

    for t in g.transitions:
        visible = assigned[t.source] | payload_names(t)
        missing = free_variables(t.guard) - visible
        if missing:
            raise DefiniteAssignmentError(
                f"guard on {t.label!r} ({t.source}->{t.target}) reads unassigned {sorted(missing)}")
        written: set[str] = set()
        for cv, e in t.updates:
            missing = free_variables(e) - visible - written
            if missing:
                raise DefiniteAssignmentError(
                    f"update of {cv.name!r} on {t.label!r} reads unassigned {sorted(missing)}")
            written.add(cv.name)


# -- DOT output ----------------------------------------------------------------

def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def to_dot(g: StateGraph) -> str:
    """Valid DOT digraph; edges show `sender->receiver:LABEL [guard]`."""
    lines = ["digraph protocol {", "  rankdir=LR;"]
    for s in g.states:
        shape = "doublecircle" if s.is_end else "circle"
        mark = " (initial)" if s.id == g.initial else ""
        lines.append(f'  n{s.id} [label="{s.id}{mark}", shape={shape}];')
    for t in g.transitions:
        if t.kind == "comm":
            label = f"{t.sender.name}->{t.receiver.name}:{t.label} [{pretty(t.guard)}]"
        else:
            ups = ", ".join(f"{cv.name} := {pretty(e)}" for cv, e in t.updates)
            label = f"{RECUR_LABEL} [{ups}]" if ups else RECUR_LABEL
        lines.append(f'  n{t.source} -> n{t.target} [label="{_dot_escape(label)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- versioned JSON form ---------------------------------------------------------

def graph_to_json(g: StateGraph) -> dict:
    def update_json(u: Update) -> dict:
        cv, e = u
        return {"var": cv.name, "expr": expr_to_json(e)}

    return {
        "version": GRAPH_FORMAT_VERSION,
        "initial": g.initial,
        "states": [{"id": s.id, "end": s.is_end} for s in g.states],
        "context": [
            {"name": cv.name, "type": cv.base_type,
             "origin": {"kind": cv.origin[0], "ref": cv.origin[1]}}
            for cv in g.context
        ],
        "initial_updates": [update_json(u) for u in g.initial_updates],
        "transitions": [
            {
                "source": t.source, "target": t.target, "kind": t.kind,
                "label": t.label,
                "sender": None if t.sender is None else {"id": t.sender.id, "name": t.sender.name},
                "receiver": None if t.receiver is None else {"id": t.receiver.id, "name": t.receiver.name},
                "schema": None if t.schema is None else t.schema.label,
                "msg_id": None if t.schema is None else t.schema.msg_id,
                "binder": t.binder_var,
                "guard": expr_to_json(t.guard),
                "updates": [update_json(u) for u in t.updates],
            }
            for t in g.transitions
        ],
    }


def graph_from_json(doc: dict, dialect=None) -> StateGraph:
    """Rebuild a graph; schemas rebind through `dialect` when given, else
    minimal stub schemas keep the structural checks runnable."""
    if doc.get("version") != GRAPH_FORMAT_VERSION:
        raise ValueError(f"unsupported graph format version {doc.get('version')!r}")
    context = tuple(
        ContextVar(c["name"], c["type"], (c["origin"]["kind"], c["origin"]["ref"]))
        for c in doc["context"])
    by_name = {cv.name: cv for cv in context}

    def update(d: dict) -> Update:
        return (by_name[d["var"]], expr_from_json(d["expr"]))

    transitions = []
    for t in doc["transitions"]:
        schema = None
        if t["schema"] is not None:
            if dialect is not None:
                schema = dialect.schema(t["schema"])
            if schema is None:
                schema = MessageSchema(msg_id=t["msg_id"] or 0, label=t["schema"], xml_fields=())
        transitions.append(Transition(
            source=t["source"], target=t["target"], kind=t["kind"], label=t["label"],
            sender=None if t["sender"] is None else Participant(**t["sender"]),
            receiver=None if t["receiver"] is None else Participant(**t["receiver"]),
            schema=schema, binder_var=t["binder"],
            guard=expr_from_json(t["guard"]),
            updates=tuple(update(u) for u in t["updates"])))
    return StateGraph(
        states=tuple(State(s["id"], s["end"]) for s in doc["states"]),
        transitions=tuple(transitions),
        initial=doc["initial"],
        context=context,
        initial_updates=tuple(update(u) for u in doc["initial_updates"]))
