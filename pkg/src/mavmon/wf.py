"""The four structural decision procedures gating synthesis.

Each check is a total boolean function over the finite graph (visited sets
bound every traversal).  `check_all` runs all four without short-circuiting
and reports a concrete witness for every failure; synthesis refuses any
graph whose report is not an overall pass.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graph import RECUR_LABEL, StateGraph


def has_duplicates(labels: list[str], seen: list[str]) -> bool:
    """List-accumulator duplicate scan; RECUR is a reserved marker that may
    legitimately appear on many internal edges, so it is exempt."""
    if not labels:
        return False
    hd, tl = labels[0], labels[1:]
    if hd in seen and hd != RECUR_LABEL:
        return True
    return has_duplicates(tl, [hd] + seen)


def check_unique_labels(labels: list[str]) -> bool:
    """True iff no non-RECUR label occurs twice."""
    # iterative twin of has_duplicates (labels can outgrow the recursion limit)
    seen: set[str] = set()
    for lb in labels:
        if lb in seen and lb != RECUR_LABEL:
            return False
        seen.add(lb)
    return True


def duplicate_witness(g: StateGraph, per_choice: bool = False) -> tuple[str, int, int] | None:
    """(label, transition index, transition index) of the first duplicate pair,
    in (source id, declaration order) traversal order."""
    order = sorted(range(len(g.transitions)),
                   key=lambda i: (g.transitions[i].source, i))
    seen: dict[object, int] = {}
    for i in order:
        t = g.transitions[i]
        if t.label == RECUR_LABEL:
            continue
        key = (t.source, t.label) if per_choice else t.label
        if key in seen:
            return (t.label, seen[key], i)
        seen[key] = i
    return None


def epsilon_cycle(g: StateGraph) -> list[int] | None:
    """A state cycle using only epsilon transitions, or None."""
    eps: dict[int, list[int]] = {}
    for t in g.transitions:
        if t.kind == "eps":
            eps.setdefault(t.source, []).append(t.target)
    color: dict[int, int] = {}  # 0 unseen, 1 on stack, 2 done
    parent: dict[int, int] = {}

    def dfs(u: int) -> list[int] | None:
        color[u] = 1
        for v in eps.get(u, ()):
            if color.get(v, 0) == 0:
                parent[v] = u
                cyc = dfs(v)
                if cyc:
                    return cyc
            elif color.get(v) == 1:
                path = [u]
                cur = u
                while cur != v:
                    cur = parent[cur]
                    path.append(cur)
                path.reverse()
                return path
        color[u] = 2
        return None

    for s in g.states:
        if color.get(s.id, 0) == 0:
            cyc = dfs(s.id)
            if cyc:
                return cyc
    return None


def check_guarded_recursion(g: StateGraph) -> bool:
    """True iff no cycle of purely internal (epsilon) transitions exists."""
    return epsilon_cycle(g) is None


def stuck_state(g: StateGraph) -> int | None:
    out_degree = {s.id: 0 for s in g.states}
    for t in g.transitions:
        if t.source in out_degree:
            out_degree[t.source] += 1
    for s in g.states:
        if not s.is_end and out_degree[s.id] == 0:
            return s.id
    return None


def check_progress(g: StateGraph) -> bool:
    """True iff every state is terminal or has an outgoing transition."""
    return stuck_state(g) is None


def dangling_transition(g: StateGraph) -> int | None:
    ids = {s.id for s in g.states}
    for i, t in enumerate(g.transitions):
        if t.target not in ids or t.source not in ids:
            return i
    return None


def check_fidelity(g: StateGraph) -> bool:
    """True iff every transition's source and target state exist."""
    return dangling_transition(g) is None


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    witness: object = None

    def describe(self, what: str) -> str:
        if self.passed:
            return "pass"
        return f"FAIL ({what}: {self.witness})"


@dataclass(frozen=True)
class WfReport:
    unique_labels: CheckResult
    guarded_recursion: CheckResult
    progress: CheckResult
    fidelity: CheckResult

    @property
    def overall(self) -> bool:
        return (self.unique_labels.passed and self.guarded_recursion.passed
                and self.progress.passed and self.fidelity.passed)

    def lines(self) -> list[str]:
        return [
            f"unique-labels      {self.unique_labels.describe('duplicate label, transition pair')}",
            f"guarded-recursion  {self.guarded_recursion.describe('epsilon cycle states')}",
            f"progress           {self.progress.describe('stuck state')}",
            f"fidelity           {self.fidelity.describe('dangling transition index')}",
            f"overall            {'pass' if self.overall else 'FAIL'}",
        ]

    def to_json(self) -> dict:
        def one(r: CheckResult) -> dict:
            return {"pass": r.passed, "witness": r.witness}

        return {
            "unique_labels": one(self.unique_labels),
            "guarded_recursion": one(self.guarded_recursion),
            "progress": one(self.progress),
            "fidelity": one(self.fidelity),
            "overall": self.overall,
        }


def check_all(g_pre: StateGraph, per_choice: bool = False) -> WfReport:
    """Run all four checks on the pre-compression graph; never short-circuits."""
    dup = duplicate_witness(g_pre, per_choice=per_choice)
    cyc = epsilon_cycle(g_pre)
    stuck = stuck_state(g_pre)
    dangling = dangling_transition(g_pre)
    return WfReport(
        unique_labels=CheckResult(dup is None, dup),
        guarded_recursion=CheckResult(cyc is None, cyc),
        progress=CheckResult(stuck is None, stuck),
        fidelity=CheckResult(dangling is None, dangling),
    )
