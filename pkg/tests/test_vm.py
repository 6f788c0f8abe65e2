import pytest

from conftest import load, manifest
from symtrans.domains import register, term, unregister
from symtrans.domains.term import TermStore
from symtrans.ir import parse_module
from symtrans.solver import BruteForceBackend
from symtrans.terms import TermArena
from symtrans.transform import transform
from symtrans.vm import TRAP_EXIT_CODE, Host, Machine, VmError


def run(text_or_module, **kw):
    m = parse_module(text_or_module) if isinstance(text_or_module, str) else text_or_module
    stores = kw.pop("stores", {"term": TermStore(backend=BruteForceBackend())})
    return Machine(m, stores=stores, host=Host(**kw)).execute()


def audit_shadow(st):
    """Frozen values own their bytes: the bytes read as zero and no two
    entries overlap."""
    for seg, entries in st.shadow.items():
        spans = sorted((off, size) for off, (_, size) in entries.items())
        for (o1, s1), (o2, _) in zip(spans, spans[1:]):
            assert o1 + s1 <= o2, "overlapping shadow entries"
        for off, size in spans:
            assert bytes(st.mem[seg][off:off + size]) == bytes(size)


def test_integer_wraparound():
    st, out = run("""
fn @main() -> i32 {
entry:
  %a = add i8 255, 1
  %b = sub i32 0, 1
  call void @print.i8(i8 %a)
  call void @print.i32(i32 %b)
  ret i32 0
}""")
    assert out.kind == "exit" and st.output == ["0", "-1"]


@pytest.mark.parametrize("name,detail", [
    ("oob", "out-of-bounds"),
    ("dead_segment", "dead segment"),
    ("div_zero", "division by zero"),
])
def test_memory_and_arithmetic_faults_trap(name, detail):
    st, out = run(load(name), pins=[0] * 8)
    assert out.kind == "trap" and detail in out.detail
    assert out.exit_code == TRAP_EXIT_CODE


def test_null_dereference_traps():
    st, out = run("""
fn @main() -> i32 {
entry:
  %p = alloca ptr
  %z = load ptr, %p
  %v = load i8, %z
  ret i32 0
}""")
    assert out.kind == "trap" and "null" in out.detail


def test_recursion_and_output():
    st, out = run(load("fib_rec"), pins=[0])
    assert out.kind == "exit" and st.output[0] == "55"


def test_fuel_bound_stops_the_run():
    m = load("collatz")
    st, out = Machine(m, host=Host(pins=[27]), fuel=50).execute()
    assert out.kind == "fuel"


def test_choice_stops_without_a_trail_and_follows_one():
    m = load("choose_op")
    st, out = Machine(m, host=Host(pins=[3, 4])).execute()
    assert out.kind == "choice" and out.arity >= 2
    st2, out2 = Machine(m, host=Host(trail=[1], pins=[3, 4])).execute()
    assert out2.kind in ("exit", "assert", "trap")
    assert [d for _, d, _ in st2.trail] == [1]


def test_unknown_entry_is_an_embedder_error():
    with pytest.raises(VmError):
        Machine(load("neq42")).start("nope")


FROZEN = """
fn @main() -> i32 {
entry:
  %p = alloca [8 x i8]
  %x = call a.i32 @a_sym.term()
  call void @a_freeze.term(ptr %p, a.i32 %x)
  %y = call a.i32 @a_thaw.term(ptr %p)
  BODY
  ret i32 0
}"""


def _steps(m, stores, pins=None):
    mach = Machine(m, stores=stores, host=Host(pins=pins))
    st = mach.start()
    while True:
        out = mach.step(st)
        audit_shadow(st)
        if out is not None:
            return mach, st, out


def test_freeze_then_thaw_returns_the_same_value():
    m = parse_module(FROZEN.replace("BODY", "%q = ptradd %p, 0"))
    stores = {"term": TermStore(backend=BruteForceBackend())}
    mach = Machine(m, stores=stores)
    st = mach.start()
    while "y" not in st.frames[-1].regs:
        assert mach.step(st) is None
        audit_shadow(st)
    regs = st.frames[-1].regs
    assert regs["y"] == regs["x"] and regs["y"].tag == "term"
    assert len(st.shadow_entries()) == 1


def test_concrete_store_over_half_a_frozen_value_evicts_it():
    body = """%q = ptradd %p, 2
  store i8 5, %q
  %z = call a.i32 @a_thaw.term(ptr %p)
  %zc = call i32 @a_lower.term(a.i32 %z)
  call void @print.i32(i32 %zc)"""
    m = parse_module(FROZEN.replace("BODY", body))
    _, st, out = _steps(m, {"term": TermStore(backend=BruteForceBackend())})
    assert out.kind == "exit"
    assert st.shadow_entries() == []
    # the frozen bytes read as zero, the stored byte is the only one set
    assert st.output == [str(5 << 16)]


def test_thaw_with_another_type_traps():
    body = "%w = call a.i16 @a_thaw.term(ptr %p)"
    _, st, out = _steps(parse_module(FROZEN.replace("BODY", body)), {})
    assert out.kind == "trap" and "dynamic type error" in out.detail


def test_thaw_partially_overlapping_traps():
    body = """%q = ptradd %p, 1
  %w = call a.i8 @a_thaw.term(ptr %q)"""
    _, st, out = _steps(parse_module(FROZEN.replace("BODY", body)), {})
    assert out.kind == "trap" and "partially overlaps" in out.detail


@pytest.mark.parametrize("name", ["freeze_roundtrip", "array_sum", "memcopy"])
def test_shadow_stays_coherent_on_every_step(name):
    t = transform(load(name))
    _, st, out = _steps(t, {"term": TermStore(backend=BruteForceBackend())}, pins=[7, 9, 11])
    assert out.kind in ("exit", "choice", "assert", "trap")


def _finish(mach, st, trail):
    out = mach.run(st)
    while out.kind == "choice":
        out = mach.run(st, choice=trail[len(st.trail)])
    return out


def test_snapshot_restore_in_another_worker_gives_the_same_run():
    t = transform(load("accumulate"))
    arena = TermArena()
    trail = [3, 0]  # three inputs keep the queries within brute-force range

    def machine():
        return Machine(t, stores={"term": TermStore(backend=BruteForceBackend(), arena=arena)})

    ref = machine()
    st_ref = ref.start()
    out_ref = _finish(ref, st_ref, trail)

    a = machine()
    st = a.start()
    out = a.run(st)
    assert out.kind == "choice"
    assert a.step(st, choice=trail[0]) is None
    while st.nsyms < 2:  # stop inside the loop of @accumulate
        assert a.step(st) is None
    assert len(st.frames) == 2
    img = a.snapshot(st)
    b = machine()
    st2 = b.restore(img)
    out2 = _finish(b, st2, trail)
    out1 = _finish(a, st, trail)
    for s, o in ((st, out1), (st2, out2)):
        assert o.kind == out_ref.kind == "exit"
        assert s.output == st_ref.output
        assert s.ctx["term"].pc == st_ref.ctx["term"].pc
        assert s.nsyms == st_ref.nsyms == 3


def test_snapshot_is_immutable_and_restorable_twice():
    t = transform(load("two_branch"))
    mach = Machine(t, stores={"term": TermStore(backend=BruteForceBackend())})
    st = mach.start()
    assert mach.run(st).kind == "choice"
    img = mach.snapshot(st)
    runs = []
    for _ in range(2):
        s = mach.restore(img)
        runs.append((mach.run(s, choice=1).kind, tuple(s.output), s.ctx["term"].pc))
    assert runs[0] == runs[1]
    assert mach.snapshot(mach.restore(img)).digest() == img.digest()


@pytest.mark.parametrize("name", sorted(manifest()))
def test_untransformed_programs_run_without_any_domain(name):
    unregister("term")
    try:
        st, out = Machine(load(name), host=Host(trail=[0] * 64, pins=[1] * 64)).execute()
        assert out.kind in ("exit", "trap", "assert", "infeasible")
    finally:
        register(term.NAME, term.make_descriptor)
