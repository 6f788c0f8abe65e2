import dataclasses

import pytest

from conftest import load
from symtrans.domains import get_domain
from symtrans.domains.base import register, unregister
from symtrans.ir import AbsType, parse_module, split_domain_call
from symtrans.transform import (
    POST_REWRITE_HOOKS,
    TransformError,
    propagate_values,
    transform,
)


def domain_calls(f, labels=None):
    return [
        ins.callee for b in f.blocks if labels is None or b.label in labels
        for ins in b.instrs
        if ins.op == "call" and split_domain_call(ins.callee)
    ]


def test_concrete_loop_stays_concrete():
    t = transform(load("factorial"))
    main = t.function("main")
    assert domain_calls(main, {"loop", "body"}) == []
    exit_calls = domain_calls(main, {"exit"})
    assert "a_mul.term" in exit_calls and "a_lower.term" in exit_calls


def test_program_without_inputs_is_returned_unchanged():
    m = parse_module("""
fn @main() -> i32 {
entry:
  %k = call i32 @choose(i32 3)
  %c = icmp ult i32 %k, 2
  call void @assert(i1 %c)
  ret i32 %k
}
""")
    assert transform(m) is m


def test_function_used_both_ways_is_cloned():
    t = transform(load("calls_clone"))
    names = [f.name for f in t.functions]
    assert names == ["inc", "inc.abs", "main"]
    assert domain_calls(t.function("inc")) == []
    assert t.function("inc.abs").params[0][1] == AbsType(t.function("inc").params[0][1])
    callees = [ins.callee for b in t.function("main").blocks for ins in b.instrs if ins.op == "call"]
    assert "inc" in callees and "inc.abs" in callees


def test_abstract_branch_becomes_a_choice_and_two_assumes():
    t = transform(load("neq42"))
    assert "a_assert.term" in domain_calls(t.function("main"))
    t = transform(load("two_branch"))
    main = t.function("main")
    chooses = [ins for b in main.blocks for ins in b.instrs if ins.op == "call" and ins.callee == "choose"]
    assumes = domain_calls(main).count("a_assume.term")
    assert len(chooses) >= 1 and assumes == 2 * len(chooses)


def test_taint_levels_of_a_mixing_phi():
    m = parse_module("""
fn @main(%c: i1) -> i32 {
entry:
  %x = call i8 @sym.i8()
  br %c, a, b
a:
  br j
b:
  br j
j:
  %v = phi i8 [%x, a], [3, b]
  %k = add i8 4, 5
  %z = zext i8 %v to i32
  ret i32 %z
}
""")
    taint = propagate_values(m)
    assert taint.register_level("main", "x") == "abstract"
    assert taint.register_level("main", "v") == "toplevel-sum"
    assert taint.register_level("main", "k") == "concrete"
    assert taint.register_level("main", "z") == "abstract"


def test_memory_holding_inputs_thaws_loads():
    t = transform(load("freeze_roundtrip"))
    calls = domain_calls(t.function("main"))
    assert "a_freeze.term" in calls and "a_thaw.term" in calls


def test_abstract_address_is_rejected():
    m = parse_module("""
fn @main() -> i32 {
entry:
  %arr = alloca [4 x i8]
  %x = call i8 @sym.i8()
  %i = zext i8 %x to i64
  %p = ptradd %arr, %i
  store i8 1, %p
  ret i32 0
}
""")
    with pytest.raises(TransformError, match="address"):
        transform(m)


def test_domain_without_an_operation_is_rejected():
    base = get_domain("term")
    ops = {k: v for k, v in base.ops.items() if k != "mul"}
    register("term-no-mul", lambda: dataclasses.replace(base, name="term-no-mul", ops=ops))
    try:
        with pytest.raises(TransformError, match="mul"):
            transform(load("factorial"), domain="term-no-mul")
        transform(load("neq42"), domain="term-no-mul")
    finally:
        unregister("term-no-mul")


def test_post_rewrite_hooks_see_the_result():
    seen = []
    POST_REWRITE_HOOKS.append(lambda m: seen.append(m) or m)
    try:
        out = transform(load("neq42"))
    finally:
        POST_REWRITE_HOOKS.clear()
    assert seen == [out]


@pytest.mark.parametrize("domain", ["term", "parity"])
def test_domain_name_appears_in_every_abstract_call(domain):
    t = transform(load("abs_diff"), domain=domain)
    assert all(c.endswith("." + domain) for c in domain_calls(t.function("main")))
