import pytest

from conftest import CORPUS, manifest
from symtrans.ir import (
    I8,
    I32,
    ParseError,
    SsaError,
    TypeCheckError,
    ValidationError,
    abs_type,
    parse_module,
    print_module,
    split_domain_call,
    validate,
)
from symtrans.ir.types import ArrayType, alpha
from symtrans.transform import transform


@pytest.mark.parametrize("name", sorted(manifest()))
def test_corpus_round_trips_through_printer(name):
    text = (CORPUS / f"{name}.sir").read_text()
    m = parse_module(text)
    again = parse_module(print_module(m))
    assert again == m
    assert print_module(again) == print_module(m)


@pytest.mark.parametrize("name", ["factorial", "accumulate", "calls_clone", "freeze_roundtrip"])
def test_transformed_modules_round_trip(name):
    t = transform(parse_module((CORPUS / f"{name}.sir").read_text()))
    assert parse_module(print_module(t)) == t
    assert validate(t) == []


def test_constants_are_masked_to_operand_type():
    m = parse_module("""
fn @main() -> i32 {
entry:
  %a = add i8 300, -1
  ret i32 0
}
""")
    ins = m.function("main").blocks[0].instrs[0]
    assert [a.value for a in ins.args] == [300 & 0xFF, 0xFF]


def test_types_and_sizes():
    assert ArrayType(I8, 2).size == 2
    assert alpha(I32) == abs_type(32)
    assert str(alpha(I8)) == "a.i8"
    assert split_domain_call("a_add.term") == ("add", "term")
    assert split_domain_call("print.i32") is None


def test_parse_error_has_position():
    with pytest.raises(ParseError) as e:
        parse_module("fn @main() -> i32 {\nentry:\n  %a = frob i8 1, 2\n  ret i32 0\n}\n")
    assert e.value.line == 3


BAD = {
    "ssa.multiple-definitions": (SsaError, """
fn @main() -> i32 {
entry:
  %a = add i8 1, 2
  %a = add i8 1, 2
  ret i32 0
}"""),
    "ssa.not-dominated": (SsaError, """
fn @main(%c: i1) -> i32 {
entry:
  br %c, l, r
l:
  %a = add i32 1, 2
  br j
r:
  br j
j:
  ret i32 %a
}"""),
    "type.mismatch": (TypeCheckError, """
fn @main() -> i32 {
entry:
  %a = add i8 1, 2
  %b = add i32 %a, 1
  ret i32 0
}"""),
    "structure.reserved-name": (ValidationError, """
fn @assert() -> i32 {
entry:
  ret i32 0
}"""),
    "structure.unknown-label": (ValidationError, """
fn @main() -> i32 {
entry:
  br nowhere
}"""),
    "type.abstract-constant": (TypeCheckError, """
fn @main() -> i32 {
entry:
  %a = call a.i8 @a_add.term(a.i8 1, a.i8 2)
  ret i32 0
}"""),
}


@pytest.mark.parametrize("rule", sorted(BAD))
def test_invalid_modules_are_rejected_with_rule(rule):
    exc, text = BAD[rule]
    with pytest.raises(exc) as e:
        parse_module(text)
    assert rule in e.value.rules


def test_validation_errors_share_a_base():
    assert issubclass(SsaError, ValidationError)
    assert issubclass(TypeCheckError, ValidationError)
