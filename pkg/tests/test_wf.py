import json
import random
from hypothesis import given, settings, strategies as st

from conftest import FIXTURES
from mavmon.dsl import parse_protocol
from mavmon.graph import State, StateGraph, Transition, build_graph, graph_from_json
from mavmon.resolve import resolve
from mavmon.wf import (
    check_all,
    check_fidelity,
    check_guarded_recursion,
    check_progress,
    check_unique_labels,
    duplicate_witness,
    epsilon_cycle,
    has_duplicates,
)


def naive_has_duplicate(labels):
    """O(n^2) pairwise oracle, RECUR exempt."""
    for i in range(len(labels)):
        for j in range(i + 1, len(labels)):
            if labels[i] == labels[j] and labels[i] != "RECUR":
                return True
    return False


def test_mission_labels_unique(mission):
    labels = mission.pre_graph.ordered_labels()
    assert check_unique_labels(labels)


def test_simple_duplicate():
    assert check_unique_labels(["A", "A"]) is False


def test_recur_label_exempt():
    assert check_unique_labels(["RECUR", "RECUR"]) is True
    assert has_duplicates(["RECUR", "RECUR"], []) is False


labels_strategy = st.lists(st.sampled_from(["A", "B", "C", "RECUR", "MISSION_COUNT", "X"]),
                           max_size=12)


@given(labels_strategy)
@settings(max_examples=500, deadline=None)
def test_unique_labels_equals_recursive_transcription(labels):
    assert check_unique_labels(labels) == (not has_duplicates(labels, []))


@given(labels_strategy)
@settings(max_examples=500, deadline=None)
def test_unique_labels_equals_naive_oracle(labels):
    assert check_unique_labels(labels) == (not naive_has_duplicate(labels))


def test_unique_labels_against_oracle_bulk():
    rng = random.Random(42)
    alphabet = ["A", "B", "C", "D", "E", "RECUR", "MISSION_COUNT", "MISSION_ACK"]
    for _ in range(10_000):
        labels = [rng.choice(alphabet) for _ in range(rng.randrange(0, 14))]
        assert check_unique_labels(labels) == (not naive_has_duplicate(labels))
        assert (not has_duplicates(labels, [])) == (not naive_has_duplicate(labels))


def test_duplicate_witness_indexes_two_distinct_transitions(mission, dialect):
    spec = resolve(parse_protocol(
        (FIXTURES / "mutants" / "duplicate_label.rmpst").read_text()), dialect)
    g = build_graph(spec)
    witness = duplicate_witness(g)
    assert witness is not None
    label, i, j = witness
    assert label == "MISSION_COUNT"
    assert i != j
    assert g.transitions[i].label == g.transitions[j].label == label


def test_per_choice_scope_relaxation(dialect):
    spec = resolve(parse_protocol(
        (FIXTURES / "mutants" / "duplicate_label.rmpst").read_text()), dialect)
    g = build_graph(spec)
    assert duplicate_witness(g, per_choice=False) is not None
    assert duplicate_witness(g, per_choice=True) is None  # duplicates sit in different choices


# -- guarded recursion -----------------------------------------------------------

def test_mission_guarded(mission):
    assert check_guarded_recursion(mission.pre_graph)


def test_unguarded_self_loop(dialect):
    spec = resolve(parse_protocol(
        (FIXTURES / "mutants" / "unguarded_loop.rmpst").read_text()), dialect)
    g = build_graph(spec)
    assert check_guarded_recursion(g) is False
    cyc = epsilon_cycle(g)
    assert cyc is not None and len(cyc) >= 1


def test_nested_recs_crossing_message_are_guarded(dialect):
    text = """protocol p { roles A = 0, B = 1;
      rec S {
        rec T {
          A -> B { HEARTBEAT(h: HEARTBEAT) -> continue S(0) }
        }
      }
    }"""
    g = build_graph(resolve(parse_protocol(text), dialect))
    assert check_guarded_recursion(g) is True


def brute_force_has_eps_cycle(g: StateGraph) -> bool:
    """Enumerate all simple epsilon paths; a cycle exists iff some state can
    reach itself through epsilon edges only.  Exponential; graphs stay <= 8
    states."""
    eps = [(t.source, t.target) for t in g.transitions if t.kind == "eps"]

    def reachable(start):
        seen = set()
        frontier = [start]
        while frontier:
            s = frontier.pop()
            for (a, b) in eps:
                if a == s and b not in seen:
                    seen.add(b)
                    frontier.append(b)
        return seen

    return any(s.id in reachable(s.id) for s in g.states)


def _random_small_graph(rng: random.Random) -> StateGraph:
    n = rng.randrange(1, 8)
    states = tuple(State(i, rng.random() < 0.2) for i in range(n))
    transitions = []
    for _ in range(rng.randrange(0, 10)):
        kind = "eps" if rng.random() < 0.5 else "comm"
        t = Transition(source=rng.randrange(n), target=rng.randrange(n),
                       kind=kind, label="RECUR" if kind == "eps" else f"L{rng.randrange(5)}")
        transitions.append(t)
    return StateGraph(states=states, transitions=tuple(transitions), initial=0, context=())


def test_guarded_recursion_equals_brute_force_on_small_graphs():
    rng = random.Random(7)
    for _ in range(500):
        g = _random_small_graph(rng)
        assert check_guarded_recursion(g) == (not brute_force_has_eps_cycle(g))


# -- progress / fidelity ----------------------------------------------------------

def test_mission_progress_and_fidelity(mission):
    assert check_progress(mission.pre_graph)
    assert check_fidelity(mission.pre_graph)


def test_stuck_state_detected():
    doc = json.loads((FIXTURES / "mutants" / "stuck_state.json").read_text())
    g = graph_from_json(doc)
    assert check_progress(g) is False


def test_single_end_state_progress():
    g = StateGraph(states=(State(0, True),), transitions=(), initial=0, context=())
    assert check_progress(g) is True
    assert check_fidelity(g) is True  # empty transition list


def test_dangling_target_detected():
    doc = json.loads((FIXTURES / "mutants" / "dangling_target.json").read_text())
    g = graph_from_json(doc)
    assert check_fidelity(g) is False


# -- aggregate report --------------------------------------------------------------

def test_mission_report_all_pass(mission):
    report = check_all(mission.pre_graph)
    assert report.overall
    assert all("pass" in line for line in report.lines()[:-1])


def test_each_mutant_fails_exactly_its_check(dialect):
    def report_for(name):
        if name.endswith(".rmpst"):
            spec = resolve(parse_protocol((FIXTURES / "mutants" / name).read_text()), dialect)
            return check_all(build_graph(spec))
        doc = json.loads((FIXTURES / "mutants" / name).read_text())
        return check_all(graph_from_json(doc))

    cases = {
        "duplicate_label.rmpst": "unique_labels",
        "unguarded_loop.rmpst": "guarded_recursion",
        "stuck_state.json": "progress",
        "dangling_target.json": "fidelity",
    }
    for name, target in cases.items():
        report = report_for(name)
        results = {
            "unique_labels": report.unique_labels.passed,
            "guarded_recursion": report.guarded_recursion.passed,
            "progress": report.progress.passed,
            "fidelity": report.fidelity.passed,
        }
        assert results[target] is False, name
        others = {k: v for k, v in results.items() if k != target}
        assert all(others.values()), f"{name} tripped extra checks: {others}"
        assert report.overall is False
        assert report.to_json()[target]["witness"] is not None


def test_end_only_protocol_all_pass(dialect):
    spec = resolve(parse_protocol("protocol p { roles A = 0, B = 1; end }"), dialect)
    assert check_all(build_graph(spec)).overall


def test_report_never_short_circuits():
    # a graph failing everything still reports all four witnesses
    g = StateGraph(
        states=(State(0, False), State(1, False)),
        transitions=(
            Transition(source=0, target=0, kind="eps", label="RECUR"),
            Transition(source=0, target=99, kind="comm", label="A"),
            Transition(source=0, target=99, kind="comm", label="A"),
        ),
        initial=0, context=())
    report = check_all(g)
    assert not report.unique_labels.passed
    assert not report.guarded_recursion.passed
    assert not report.progress.passed
    assert not report.fidelity.passed
