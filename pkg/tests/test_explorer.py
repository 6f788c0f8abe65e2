import dataclasses

import pytest

from conftest import load, manifest
from symtrans.explorer import ExploreConfig, Explorer, ReplayError, explore, replay
from symtrans.harness import concrete_paths
from symtrans.ir import parse_module
from symtrans.solver import BruteForceBackend, extract_for_solver
from symtrans.transform import transform


def verify(name, **kw):
    m = load(name)
    return m, explore(transform(m), **kw)


def test_dead_inner_branch_is_pruned():
    _, v = verify("lt10")
    assert v.result == "safe"
    assert v.stats.prunes == 1


def test_single_failing_input_is_found_and_replayed():
    m, v = verify("neq42")
    assert v.result == "violation"
    (x,) = v.violations
    assert x.kind == "assert" and x.model == {0: 42}
    trace = replay(m, v)
    assert trace.inputs == (42,) and trace.outcome.kind == "assert"


def test_failure_without_inputs_has_an_empty_model():
    m, v = verify("concrete_assert")
    assert v.result == "violation"
    assert all(x.model == {} for x in v.violations)
    replay(m, v.violations[0])


def test_replay_of_a_safe_verdict_is_refused():
    m, v = verify("lt10")
    with pytest.raises(ReplayError, match="no counterexample"):
        replay(m, v)


def test_replay_detects_divergence():
    m, v = verify("neq42")
    bad = dataclasses.replace(v.violations[0], model={0: 41})
    with pytest.raises(ReplayError, match="diverged"):
        replay(m, bad)


def test_division_trap_is_reported_and_path_continues():
    m, v = verify("div_zero", record_paths=True)
    assert [x.kind for x in v.violations] == ["trap"]
    assert v.violations[0].model == {0: 0}
    assert ((), "ok") in v.paths
    replay(m, v.violations[0])


@pytest.mark.parametrize("name", ["two_branch", "choose_op", "loop_sym_bound", "calls_clone"])
def test_parallel_and_breadth_first_agree_with_sequential(name):
    base = verify(name, record_paths=True)[1]
    for kw in ({"jobs": 4}, {"strategy": "bfs"}, {"strategy": "bfs", "jobs": 3}):
        v = verify(name, record_paths=True, **kw)[1]
        assert v.result == base.result
        assert v.paths == base.paths
        assert len(v.violations) == len(base.violations)


def test_budgets_give_unknown():
    _, v = verify("loop_sym_bound", depth=3)
    assert v.result == "unknown" and "depth bound reached" in v.reasons
    _, v = verify("loop_sym_bound", max_states=2)
    assert v.result == "unknown" and "state budget exhausted" in v.reasons
    _, v = verify("collatz", fuel=20)
    assert v.result == "unknown" and "step budget exhausted" in v.reasons


def test_stop_at_first_violation():
    _, v = verify("choose_op", stop_at_first=True)
    assert v.result == "violation" and len(v.violations) == 1


def test_bad_configuration_is_rejected():
    with pytest.raises(ValueError):
        ExploreConfig(strategy="random")
    with pytest.raises(ValueError):
        ExploreConfig(dedup="fuzzy")


REPEATED_FLIPS = """
fn @flip() -> void {
entry:
  %k = call i32 @choose(i32 2)
  ret void
}

fn @main() -> i32 {
entry:
  call void @flip()
  call void @flip()
  call void @flip()
  call void @flip()
  ret i32 0
}
"""


def test_syntactic_dedup_merges_identical_states():
    m = parse_module(REPEATED_FLIPS)
    off = explore(m)
    on = explore(m, dedup="syntactic")
    assert off.stats.states_stored == 1 + 2 + 4 + 8
    assert on.stats.states_stored == 4
    assert on.stats.dedup_hits == 1 + 1 + 1
    assert on.result == off.result == "safe"


IMPLIED_CHECK = """
fn @check(%x: i8) -> void {
entry:
  %c = icmp ult i8 %x, 20
  br %c, y, n
y:
  ret void
n:
  ret void
}

fn @maybe(%x: i8) -> void {
entry:
  %k = call i32 @choose(i32 2)
  %b = trunc i32 %k to i1
  br %b, do, skip
do:
  call void @check(i8 %x)
  ret void
skip:
  ret void
}

fn @main() -> i32 {
entry:
  %x = call i8 @sym.i8()
  %c1 = icmp ult i8 %x, 10
  br %c1, a, out
a:
  call void @maybe(i8 %x)
  %j = call i32 @choose(i32 2)
  ret i32 0
out:
  ret i32 1
}
"""


def test_semantic_dedup_merges_equivalent_path_conditions():
    t = transform(parse_module(IMPLIED_CHECK))
    syn = explore(t, dedup="syntactic")
    sem = explore(t, dedup="semantic")
    assert sem.stats.dedup_hits == syn.stats.dedup_hits + 1
    assert sem.stats.states_stored == syn.stats.states_stored - 1
    assert sem.result == syn.result == "safe"


def _image_at_choice(t, trail):
    ex = Explorer(t, ExploreConfig(solver="brute"))
    from symtrans.explorer import _Worker

    w = _Worker(ex)
    st = w.machine.start()
    out = w.machine.run(st)
    for d in trail:
        out = w.machine.run(st, choice=d)
    assert out.kind == "choice"
    return ex, w.machine.snapshot(st)


def test_same_state_uses_model_sets_not_syntax():
    t = transform(parse_module(IMPLIED_CHECK))
    ex_sem, a = _image_at_choice(t, [1, 1, 1])  # took the check: x<10, x<20
    _, b = _image_at_choice(t, [1, 0])  # skipped it: x<10
    assert a.digest() == b.digest()
    pcs = [dict(i.ctx)["term"][0] for i in (a, b)]
    assert pcs[0] != pcs[1]
    assert ex_sem.same_state(a, a)
    syn = Explorer(t, ExploreConfig(solver="brute", dedup="syntactic"))
    sem = Explorer(t, ExploreConfig(solver="brute", dedup="semantic"))
    sem.arena = syn.arena = ex_sem.arena
    assert not syn.same_state(a, b)
    assert sem.same_state(a, b)
    # brute-force model sets agree with the verdict
    arena = ex_sem.arena
    brute = BruteForceBackend()
    sets = [brute.models(extract_for_solver(arena, pc, symbols=[(0, 8)])) for pc in pcs]
    assert sets[0] == sets[1]


@pytest.mark.parametrize("name", sorted(n for n, e in manifest().items() if e["pathset"]))
def test_explored_paths_match_concrete_enumeration(name):
    e = manifest()[name]
    m, v = verify(name, record_paths=True)
    assert v.result == e["verdict"]
    assert v.paths == concrete_paths(m, e["inputs"])
