from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from govkit.dsl.parser import extract_description, parse_policy_source
from govkit.errors import (
    MissingFunctionError,
    PolicySyntaxError,
    UnknownIdentifierError,
)

from conftest import policy_source

SKELETON = """
def filter(action, policy) {{ return true }}
def initialize(action, policy) {{ }}
def check(action, policy) {{ {check} }}
def notify(action, policy) {{ }}
def pass(action, policy) {{ }}
def fail(action, policy) {{ }}
"""


def wrap(check_body: str) -> str:
    return SKELETON.format(check=check_body)


def test_parses_jury_fixture():
    program = parse_policy_source(policy_source("jury.pol"))
    assert set(program.functions) == {"filter", "initialize", "check", "notify", "pass", "fail", "jurors"}
    assert program.helpers == ["jurors"]
    assert "jury" in program.description.lower() or "rename" in program.description.lower()
    assert not program.is_trial


def test_unterminated_header_position():
    with pytest.raises(PolicySyntaxError) as err:
        parse_policy_source("def filter(")
    assert (err.value.line, err.value.col) == (1, 12)


def test_missing_function_lists_names():
    source = "\n".join(
        f"def {name}(action, policy) {{ }}" for name in ("filter", "initialize", "check", "notify", "pass")
    )
    with pytest.raises(MissingFunctionError) as err:
        parse_policy_source(source)
    assert err.value.missing == ["fail"]


def test_unknown_identifier_rejected_at_compile_time():
    with pytest.raises(UnknownIdentifierError) as err:
        parse_policy_source(wrap("return mystery_function()"))
    assert err.value.name == "mystery_function"
    assert err.value.line > 0 and err.value.col > 0


def test_locals_params_and_helpers_resolve():
    source = """
def helper(x) { return x + 1 }
def filter(action, policy) { return true }
def initialize(action, policy) { seen = helper(1) }
def check(action, policy) {
  total = 0
  for item in [1, 2, 3] { total = total + item }
  if total > 2 { return PASSED }
}
def notify(action, policy) { }
def pass(action, policy) { }
def fail(action, policy) { }
"""
    program = parse_policy_source(source)
    assert "helper" in program.functions


def test_attribute_assignment_rejected():
    with pytest.raises(PolicySyntaxError) as err:
        parse_policy_source(wrap("action.data = 5"))
    assert "data.set" in err.value.detail


def test_duplicate_function_rejected():
    source = wrap("") + "\ndef check(action, policy) { }"
    with pytest.raises(PolicySyntaxError):
        parse_policy_source(source)


def test_trial_mode_detection():
    assert parse_policy_source(policy_source("jury_trial.pol")).is_trial
    assert not parse_policy_source(policy_source("jury.pol")).is_trial


def test_description_header():
    assert extract_description("# description: Hello there\ndef x() { }") == "Hello there"
    assert extract_description("# a comment\n# description: later\ndef x() { }") == "later"
    assert extract_description("def x() { }") == ""


def test_keyword_arguments_in_calls():
    program = parse_policy_source(wrap('return proposal.get_yes_votes(users=users.filter(role="ops")) > 0'))
    assert program.functions["check"] is not None


def test_map_and_list_literals():
    parse_policy_source(wrap('x = {"a": 1, "b": [1, 2, 3]}\n  y = x["b"][0]'))


def test_deep_nesting_yields_syntax_error():
    source = wrap("x = " + "(" * 300 + "1" + ")" * 300)
    with pytest.raises(PolicySyntaxError):
        parse_policy_source(source)


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=200))
def test_parser_total_over_fuzz(source):
    # Fuzzed inputs either parse or raise a structured policy error; the
    # parser never crashes with anything else.
    try:
        parse_policy_source(source)
    except (PolicySyntaxError, MissingFunctionError, UnknownIdentifierError):
        pass


@settings(max_examples=100, deadline=None)
@given(
    st.lists(
        st.sampled_from(["def f() {", "}", "return", "1 +", "( )", "if x", "for a in b", '"str"', "=", "#c\n"]),
        max_size=30,
    )
)
def test_parser_total_over_token_soup(parts):
    try:
        parse_policy_source(" ".join(parts))
    except (PolicySyntaxError, MissingFunctionError, UnknownIdentifierError):
        pass
