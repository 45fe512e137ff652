import pytest
from mavmon.dsl import parse_protocol
from mavmon.errors import (
    AmbiguousBranch,
    DuplicateContextVar,
    RefinementInvalid,
    UnknownMessageLabel,
)
from mavmon.refinement import Binary, EnumConst, IntConst
from mavmon.resolve import resolve

HEADER = "protocol p { roles GCS = 0, UAV = 1;\n"


def test_mission_resolves_and_binds_ids(mission):
    spec = mission.spec
    assert spec.resolved
    count_branch = spec.root.branches[0]
    assert count_branch.binder.schema.msg_id == 44
    # LIMIT resolved to an integer literal inside the refinement
    guard = count_branch.binder.refinement
    assert isinstance(guard, Binary) and guard.op == "&&"
    assert guard.right.right == IntConst(65535)


def test_enum_constant_resolved(mission):
    loop = mission.spec.root.branches[0].continuation.body
    ack = loop.branches[1].binder.refinement
    # ack.type == MAV_MISSION_ERROR resolved through the dialect enum table
    assert ack.left.right == EnumConst("MAV_MISSION_ERROR", 1)


def test_unknown_message_label(dialect):
    text = HEADER + 'GCS -> UAV { NOPE(m: NOPE) -> end } }'
    with pytest.raises(UnknownMessageLabel):
        resolve(parse_protocol(text), dialect)


def test_bad_refinement_propagates(dialect):
    text = HEADER + 'GCS -> UAV { MISSION_COUNT(m: MISSION_COUNT where m.bogus > 0) -> end } }'
    with pytest.raises(RefinementInvalid) as err:
        resolve(parse_protocol(text), dialect)
    assert "bogus" in str(err.value)


def test_let_must_be_integer(dialect):
    text = HEADER + ('GCS -> UAV { MISSION_COUNT(m: MISSION_COUNT) -> '
                     'let flag = m.count > 0; end } }')
    with pytest.raises(RefinementInvalid):
        resolve(parse_protocol(text), dialect)


def test_duplicate_context_var(dialect):
    text = HEADER + ('GCS -> UAV { MISSION_COUNT(m: MISSION_COUNT) -> '
                     'let cnt = m.count; rec T(cnt: int := 0) { end } } }')
    with pytest.raises(DuplicateContextVar):
        resolve(parse_protocol(text), dialect)


def test_same_schema_twice_in_one_choice(dialect):
    text = HEADER + ('UAV -> GCS { OK(a: MISSION_ACK where a.type == 0) -> end, '
                     'FAIL(b: MISSION_ACK where b.type == 1) -> end } }')
    with pytest.raises(AmbiguousBranch):
        resolve(parse_protocol(text), dialect)


def test_distinct_labels_same_schema_in_distinct_choices_ok(dialect):
    text = HEADER + ('UAV -> GCS { FIRST(a: MISSION_ACK) -> '
                     'UAV -> GCS { SECOND(b: MISSION_ACK) -> end } } }')
    spec = resolve(parse_protocol(text), dialect)
    assert spec.resolved  # label uniqueness is the wf module's concern


def test_recur_arg_may_read_payload(dialect):
    text = HEADER + ('rec T(v: int := 0) { GCS -> UAV { '
                     'MISSION_COUNT(m: MISSION_COUNT) -> continue T(m.count) } } }')
    spec = resolve(parse_protocol(text), dialect)
    recur = spec.root.body.branches[0].continuation
    assert recur.arg.fld == "count"


def test_root_mu_init_must_be_closed(dialect):
    text = HEADER + 'rec T(v: int := w + 1) { GCS -> UAV { MISSION_COUNT(m: MISSION_COUNT) -> end } } }'
    with pytest.raises(RefinementInvalid):
        resolve(parse_protocol(text), dialect)


def test_mu_refinement_validated_against_context(dialect):
    text = HEADER + ('GCS -> UAV { MISSION_COUNT(m: MISSION_COUNT) -> let cnt = m.count; '
                     'rec T(curr: int where curr <= missing := 0) { end } } }')
    with pytest.raises(RefinementInvalid):
        resolve(parse_protocol(text), dialect)


def test_u64_fields_not_refinable(dialect):
    from mavmon.dialect import parse_dialect

    xml = b"""<mavlink><messages>
      <message id="2" name="SYSTIME"><field type="uint64_t" name="time_usec"/></message>
    </messages></mavlink>"""
    d = parse_dialect(xml)
    text = "protocol p { roles A = 0, B = 1; A -> B { SYSTIME(t: SYSTIME where t.time_usec > 0) -> end } }"
    with pytest.raises(RefinementInvalid):
        resolve(parse_protocol(text), d)
