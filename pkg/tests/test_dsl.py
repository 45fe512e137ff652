import pytest

from conftest import MISSION_SPEC, STATUS_SPEC, FIXTURES
from mavmon.dsl import parse_protocol, print_protocol, tokenize
from mavmon.errors import (
    DslSyntaxError,
    DuplicateRoleId,
    EmptyChoice,
    UnboundRecursionVariable,
)
from mavmon.protocol import Choice, End, Mu, Recur
from mavmon.refinement import BoolConst


def test_mission_structure():
    spec = parse_protocol(MISSION_SPEC.read_text())
    assert spec.name == "mission_upload"
    assert [(r.name, r.id) for r in spec.roles] == [("GCS", 0), ("UAV", 1)]
    assert spec.constants == {"LIMIT": 65535}

    root = spec.root
    assert isinstance(root, Choice)
    assert len(root.branches) == 1
    count = root.branches[0]
    assert count.label == "MISSION_COUNT"
    assert count.binder.var == "m"
    assert [lt.name for lt in count.lets] == ["cnt"]

    mu = count.continuation
    assert isinstance(mu, Mu) and mu.loop_id == "T" and mu.binder_var == "curr"

    loop = mu.body
    assert isinstance(loop, Choice)
    assert [b.label for b in loop.branches] == ["MISSION_REQUEST_INT", "MISSION_ACK"]
    assert (loop.sender.name, loop.receiver.name) == ("UAV", "GCS")

    item_choice = loop.branches[0].continuation
    assert isinstance(item_choice, Choice)
    recur = item_choice.branches[0].continuation
    assert isinstance(recur, Recur) and recur.loop_id == "T"
    assert isinstance(loop.branches[1].continuation, End)


def test_trivial_end_protocol():
    spec = parse_protocol("protocol p { roles A = 0, B = 1; end }")
    assert isinstance(spec.root, End)
    assert spec.constants == {}


def test_continue_outside_rec():
    with pytest.raises(UnboundRecursionVariable):
        parse_protocol("protocol p { roles A = 0, B = 1; continue T(1) }")


def test_continue_out_of_scope():
    text = """protocol p { roles A = 0, B = 1;
      A -> B {
        MISSION_ACK(a: MISSION_ACK) -> rec T(v: int := 0) { end },
        MISSION_COUNT(c: MISSION_COUNT) -> continue T(1)
      }
    }"""
    with pytest.raises(UnboundRecursionVariable):
        parse_protocol(text)


def test_duplicate_role_id():
    with pytest.raises(DuplicateRoleId):
        parse_protocol("protocol p { roles A = 0, B = 0; end }")


def test_empty_choice():
    with pytest.raises(EmptyChoice):
        parse_protocol("protocol p { roles A = 0, B = 1; A -> B { } }")


def test_syntax_error_carries_position():
    try:
        parse_protocol("protocol p {\n  roles A = 0, B = 1;\n  A => B { }\n}")
    except DslSyntaxError as exc:
        assert exc.line == 3
        assert exc.col is not None
    else:
        raise AssertionError("expected a syntax error")


def test_unknown_role_in_interaction():
    with pytest.raises(DslSyntaxError):
        parse_protocol("protocol p { roles A = 0, B = 1; A -> C { M(m: M) -> end } }")


def test_spans_on_nodes():
    spec = parse_protocol(MISSION_SPEC.read_text())
    assert spec.root.span is not None
    assert spec.root.branches[0].binder.span is not None
    assert spec.root.branches[0].binder.refinement.span is not None


@pytest.mark.parametrize("path", [MISSION_SPEC, STATUS_SPEC,
                                  FIXTURES / "mutants" / "duplicate_label.rmpst",
                                  FIXTURES / "mutants" / "unguarded_loop.rmpst"])
def test_roundtrip_fixture_specs(path):
    spec = parse_protocol(path.read_text())
    printed = print_protocol(spec)
    again = parse_protocol(printed)
    assert again.root == spec.root
    assert again.roles == spec.roles
    assert again.constants == spec.constants
    # printing is a fixpoint after one pass
    assert print_protocol(again) == printed


def test_unrefined_binder_defaults_true():
    spec = parse_protocol(
        "protocol p { roles A = 0, B = 1; A -> B { HEARTBEAT(h: HEARTBEAT) -> end } }")
    assert spec.root.branches[0].binder.refinement == BoolConst(True)


def test_comments_and_whitespace():
    text = """// leading comment
    protocol p { // roles next
      roles A = 0, B = 1;
      end // done
    }"""
    assert isinstance(parse_protocol(text).root, End)


def test_tokenizer_positions():
    toks = tokenize("ab\n  cd")
    assert (toks[0].line, toks[0].col) == (1, 1)
    assert (toks[1].line, toks[1].col) == (2, 3)


def test_binderless_rec():
    spec = parse_protocol("""protocol p { roles A = 0, B = 1;
      rec S { A -> B { HEARTBEAT(h: HEARTBEAT) -> continue S(0) } } }""")
    mu = spec.root
    assert isinstance(mu, Mu) and mu.binder_var is None
