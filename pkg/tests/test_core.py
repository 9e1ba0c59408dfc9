import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from anonkit.core import (
    BUILTIN_TYPES,
    CPE_STRING,
    ByteOffsets,
    EntityType,
    PolicyConfig,
    RunContext,
    Span,
    policy_violations,
    split_csv_flag,
    validate_policy,
)
from anonkit.errors import InvalidEntityType, MissingSecretKey, PolicyError

labels = st.from_regex(r"[A-Z0-9_]{1,12}", fullmatch=True)
entity_types = st.one_of(st.sampled_from(BUILTIN_TYPES), labels.map(EntityType.custom))


def test_default_policy_is_valid():
    assert validate_policy(PolicyConfig()) == PolicyConfig()


def test_slug_length_zero_rejected():
    with pytest.raises(PolicyError) as exc:
        validate_policy(PolicyConfig(slug_length=0))
    assert [v.code for v in exc.value.violations] == ["SlugLengthOutOfRange"]


def test_preserving_cpe_is_valid():
    policy = PolicyConfig(preserve_entities=frozenset({CPE_STRING}))
    assert validate_policy(policy) is policy


def test_all_violations_reported_together():
    policy = PolicyConfig(
        slug_length=65,
        allow_list=frozenset({""}),
        preserve_entities=frozenset({EntityType.custom("UNDECLARED")}),
        custom_patterns=(("CUSTOM:TICKET", "(unclosed"),),
    )
    codes = sorted(v.code for v in policy_violations(policy))
    assert codes == ["EmptyAllowListEntry", "MalformedCustomPattern",
                     "SlugLengthOutOfRange", "UnknownPreservedEntity"]


def test_custom_pattern_declares_preservable_type():
    policy = PolicyConfig(preserve_entities=frozenset({EntityType.custom("TICKET")}),
                          custom_patterns=(("CUSTOM:TICKET", r"INC-\d+"),))
    assert validate_policy(policy) is policy


def test_custom_pattern_label_must_be_custom():
    codes = [v.code for v in policy_violations(PolicyConfig(custom_patterns=(("HASH", "x"),)))]
    assert codes == ["MalformedCustomPattern"]


@pytest.mark.parametrize("name", ["", "hash", "PERSON", "CUSTOM:", "CUSTOM:lower", "CUSTOM:A-B"])
def test_bad_entity_names(name):
    with pytest.raises(InvalidEntityType):
        EntityType(name)


@given(entity_types, entity_types, entity_types)
def test_entity_type_equality_is_name_equality(a, b, c):
    assert a == a
    assert (a == b) == (a.name == b.name) == (b == a)
    if a == b and b == c:
        assert a == c
    assert (hash(a) == hash(b)) or a != b


def test_builtin_types_pairwise_distinct():
    for a, b in itertools.combinations(BUILTIN_TYPES, 2):
        assert a != b


@given(st.integers(-5, 70), st.sets(st.text(max_size=4), max_size=3))
def test_validate_policy_idempotent(slug_length, allow):
    policy = PolicyConfig(slug_length=slug_length, allow_list=frozenset(allow))
    try:
        once = validate_policy(policy)
    except PolicyError:
        return
    assert validate_policy(once) == once


def test_span_invariants():
    with pytest.raises(ValueError):
        Span(3, 3)
    with pytest.raises(ValueError):
        Span(-1, 2)
    assert Span(0, 4).overlaps(Span(3, 5))
    assert not Span(0, 3).overlaps(Span(3, 5))


def test_byte_offsets_multibyte():
    text = "héllo 10.0.0.1"
    offsets = ByteOffsets(text)
    span = offsets.span(6, 14)
    assert span == Span(7, 15)
    assert text.encode()[span.start:span.end] == b"10.0.0.1"
    assert offsets.slice(span) == "10.0.0.1"
    with pytest.raises(ValueError):
        offsets.to_index(2)  # inside "é"


def test_run_context_requires_key():
    with pytest.raises(MissingSecretKey):
        RunContext(b"")
    with pytest.raises(MissingSecretKey):
        RunContext.from_env(environ={})
    ctx = RunContext.from_env(environ={"SECRET_KEY": "abc", "USER": "ana"})
    assert ctx.secret_key == b"abc" and ctx.audit_actor == "ana"


def test_split_csv_flag_matches_command_line_usage():
    assert split_csv_flag("App,OS,Done,UTC,Default Accounts, Greenbone") == [
        "App", "OS", "Done", "UTC", "Default Accounts", "Greenbone"]
    assert split_csv_flag("") == []
