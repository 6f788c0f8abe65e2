"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s`` to see the lines as
they are produced; a full pytest run repeats them in the terminal summary.
"""

import dataclasses
import itertools
import random
import time

import pytest

import oracles
from conftest import ACCEPTANCE_LINES, load, manifest, needs_solver
from symtrans import bitops
from symtrans.bitops import DivisionByZero
from symtrans.domains import get_domain
from symtrans.domains import parity as P
from symtrans.domains.term import TermStore
from symtrans.explorer import ExploreConfig, Explorer, ReplayError, _Worker, explore, replay
from symtrans.harness import EquivalenceRunner, concrete_paths
from symtrans.ir import I8, BINOPS, parse_module, split_domain_call
from symtrans.report import build_report, validate_report
from symtrans.solver import BruteForceBackend, ExternalBackend, extract_for_solver, make_backend
from symtrans.terms import TermArena, eval_term
from symtrans.transform import transform
from symtrans.vm import Host, Machine


def verdict(criterion: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} [{criterion}] {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


# 1 -----------------------------------------------------------------------

@pytest.mark.parametrize("domain,pin_mode", [("term", "concrete"), ("parity", "concrete"), ("term", "lift")])
def test_pinned_equivalence_over_the_corpus(domain, pin_mode):
    names = sorted(manifest())
    assert len(names) >= 20
    t0 = time.perf_counter()
    bad = []
    runs = 0
    for name in names:
        m = load(name)
        t = transform(m, domain=domain)
        r = EquivalenceRunner(m, t, pin_mode=pin_mode,
                              stores={"term": TermStore(backend=BruteForceBackend())})
        rng = random.Random(name)
        for k in range(1000):
            pins = [rng.getrandbits(32) for _ in range(16)]
            ok, a, b = r.compare(pins, random.Random(k))
            runs += 1
            if not ok:
                bad.append((name, pins[:2], a, b))
    dt = time.perf_counter() - t0
    verdict(
        f"equivalence/{domain}/{pin_mode}",
        not bad and dt < 60,
        f"{len(names)} programs x 1000 pinnings = {runs} runs, {len(bad)} mismatches, {dt:.1f}s (limit 60s)"
        + (f"; first: {bad[0]}" if bad else ""),
    )


# 2 -----------------------------------------------------------------------

@needs_solver
def test_path_sets_equal_concrete_enumeration():
    names = sorted(n for n, e in manifest().items() if e["pathset"])
    assert len(names) >= 10
    t0 = time.perf_counter()
    wrong = []
    for name in names:
        e = manifest()[name]
        m = load(name)
        v = explore(transform(m), record_paths=True)
        if v.result != e["verdict"] or v.paths != concrete_paths(m, e["inputs"]):
            wrong.append(name)
    dt = time.perf_counter() - t0
    verdict("path-set exactness", not wrong,
            f"{len(names) - len(wrong)}/{len(names)} programs match, {dt:.1f}s" + (f"; differ: {wrong}" if wrong else ""))


# 3 -----------------------------------------------------------------------

def test_factorial_loop_structure():
    t = transform(load("factorial"))
    main = t.function("main")
    in_loop = [ins.callee for b in main.blocks if b.label in ("loop", "body")
               for ins in b.instrs if ins.op == "call" and split_domain_call(ins.callee)]
    store = TermStore(backend=BruteForceBackend())
    mach = Machine(t, stores={"term": store}, host=Host())
    st = mach.start()
    while "r" not in st.frames[-1].regs:
        assert mach.step(st) is None
    r = st.frames[-1].regs["r"]
    arena = store.arena
    op, a, b, w = arena.nodes[r.payload]
    consts = [arena.const_value(x) for x in (a, b) if arena.is_const(x)]
    syms = [x for x in (a, b) if arena.op(x) == "sym"]
    ok = not in_loop and op == "mul" and consts == [5040] and len(syms) == 1
    verdict("factorial structure", ok,
            f"abstract ops in loop: {len(in_loop)}; product term {arena.pretty(r.payload)}")


# 4 -----------------------------------------------------------------------

def test_dead_branch_pruned_once():
    m = load("lt10")
    cfg = ExploreConfig()
    v = explore(transform(m), cfg)
    doc = build_report(v, "lt10", "term", cfg, None)
    validate_report(doc)
    verdict("infeasible-branch pruning", doc["verdict"] == "safe" and doc["prunes"] == 1,
            f"verdict {doc['verdict']}, prunes {doc['prunes']}, trivial prunes {doc.get('trivial-prunes')}")


# 5 -----------------------------------------------------------------------

def _run_trail(t, trail, store):
    mach = Machine(t, stores={"term": store}, host=Host(trail=trail))
    st, out = mach.execute()
    return st, out


@needs_solver
def test_path_condition_growth_in_symbolic_loops():
    store = TermStore(backend=make_backend("auto"))
    loop = transform(load("loop_sym_bound"))
    acc = transform(load("accumulate"))
    rows = []
    ok = True
    for k in range(1, 9):
        st, out = _run_trail(loop, [1] * k + [0], store)
        branches = sum(1 for site, _, _ in st.trail if site)
        pc_len = len(st.ctx["term"].pc)
        st2, out2 = _run_trail(acc, [k, 0], store)
        nsym = len(store.arena.symbols(st2.ctx["term"].pc))
        good = out.kind == "exit" and pc_len == branches == k + 1 and out2.kind == "exit" and st2.nsyms == nsym == k
        ok &= good
        rows.append(f"k={k}: pc={pc_len} branches={branches} inputs={nsym}")
    store.close()
    verdict("loop path conditions", ok, "; ".join(rows))


# 6 -----------------------------------------------------------------------

def test_parity_transfer_soundness_exhaustive():
    d = get_domain("parity")
    ctx = d.new_context(None)
    checked = 0
    failures = []

    def reset():
        ctx.cells.clear()
        ctx.derivation.clear()
        ctx.forked = False

    for op in BINOPS:
        fn = d.ops[op]
        for a, b in itertools.product(range(256), repeat=2):
            try:
                r = bitops.binop(op, a, b, 8)
            except DivisionByZero:
                continue
            h = fn(ctx, 8, ctx.lift(a, I8), ctx.lift(b, I8))
            checked += 1
            if not P.leq(P.of_bits(r), ctx.parity(h)):
                failures.append((op, a, b))
            reset()
    # the (x & 1) == k pattern and its refinement under assume
    for a, k in itertools.product(range(256), range(256)):
        x = ctx.lift(a, I8)
        eq = d.ops["icmp_eq"](ctx, 1, d.ops["and"](ctx, 8, x, ctx.lift(1, I8)), ctx.lift(k, I8))
        checked += 1
        if not P.leq(int((a & 1) == k), ctx.parity(eq)):
            failures.append(("maskeq", a, k))
        reset()
        x = ctx.fresh(I8, 0)
        eq = d.ops["icmp_eq"](ctx, 1, d.ops["and"](ctx, 8, x, ctx.lift(1, I8)), ctx.lift(k, I8))
        holds = int((a & 1) == k)
        if not ctx.assume(eq, holds) or not P.leq(P.of_bits(a), ctx.parity(x)):
            failures.append(("assume", a, k))
        reset()
    verdict("parity soundness", not failures,
            f"{checked} operand pairs at 8 bits, {len(failures)} unsound" + (f"; e.g. {failures[:3]}" if failures else ""))


# 7 -----------------------------------------------------------------------

@needs_solver
def test_backends_agree_on_random_path_conditions():
    rng = random.Random(2024)
    ext, brute = ExternalBackend(), BruteForceBackend()
    disagree = []
    counts = {"sat": 0, "unsat": 0}
    try:
        for i in range(1000):
            a = TermArena()
            pc = oracles.random_pc(a, rng, nsyms=rng.choice((1, 2)))
            q = extract_for_solver(a, pc)
            e, b = ext.check(q), brute.check(q)
            if e.status != b.status:
                disagree.append(i)
                continue
            counts[e.status] = counts.get(e.status, 0) + 1
            if e.sat:
                env = {s: e.model.get(s, 0) for s in range(2)}
                if not all(eval_term(a, t, env) == 1 for t in pc):
                    disagree.append(i)
    finally:
        ext.close()
    verdict("backend agreement", not disagree,
            f"1000 queries ({counts['sat']} sat, {counts['unsat']} unsat), {len(disagree)} disagreements")


# 8 -----------------------------------------------------------------------

@needs_solver
def test_every_violation_replays():
    replayed = 0
    diverged = []
    for domain in ("term", "parity"):
        for name in sorted(manifest()):
            m = load(name)
            v = explore(transform(m, domain=domain))
            for x in v.violations:
                try:
                    replay(m, x)
                    replayed += 1
                except ReplayError as e:
                    diverged.append((domain, name, str(e)))
    verdict("counterexample replay", replayed > 0 and not diverged,
            f"{replayed} violations replayed, {len(diverged)} diverged")


# 9 -----------------------------------------------------------------------

IMPLIED_CHECK = """
fn @main() -> i32 {
entry:
  %x = call i8 @sym.i8()
  %c1 = icmp ult i8 %x, 10
  br %c1, a, out
a:
  %j = call i32 @choose(i32 2)
  ret i32 0
out:
  ret i32 1
}
"""


def _craft(img, pc, x_handle):
    frames = []
    for fname, regs, *rest in img.frames:
        regs = tuple((k, dataclasses.replace(v, payload=x_handle) if k == "x" else v) for k, v in regs)
        frames.append((fname, regs, *rest))
    (name, (_, widths)), = img.ctx
    return dataclasses.replace(img, frames=tuple(frames), ctx=((name, (tuple(pc), widths)),))


def _brute_same(arena, pa, xa, pb, xb):
    def models(pc):
        out = set()
        for x in range(256):
            try:
                if all(eval_term(arena, t, {0: x}) == 1 for t in pc):
                    out.add(x)
            except DivisionByZero:
                pass
        return out

    ma, mb = models(pa), models(pb)
    return ma == mb and all(eval_term(arena, xa, {0: x}) == eval_term(arena, xb, {0: x}) for x in ma)


def test_semantic_dedup_matches_model_sets():
    t = transform(parse_module(IMPLIED_CHECK))
    ex = Explorer(t, ExploreConfig(solver="brute", dedup="semantic"))
    w = _Worker(ex)
    st = w.machine.start()
    assert w.machine.run(st).kind == "choice"
    assert w.machine.run(st, choice=1).kind == "choice"
    base = w.machine.snapshot(st)
    w.close()
    a = ex.arena
    x = a.symbol(0, 8)

    def c(k):
        return a.const(k, 8)

    lt = lambda k: a.apply("ult", (x, c(k)))  # noqa: E731
    pairs = [
        ("x<10 & x<20 vs x<10", [lt(10), lt(20)], x, [lt(10)], x),
        ("x<5 vs x<6", [lt(5)], x, [lt(6)], x),
        ("x<10 vs x<=9", [lt(10)], x, [a.apply("ule", (x, c(9)))], x),
        ("2x vs x+x", [lt(10)], a.apply("mul", (x, c(2))), [lt(10)], a.apply("add", (x, x))),
        ("2x vs 3x", [lt(10)], a.apply("mul", (x, c(2))), [lt(10)], a.apply("mul", (x, c(3)))),
        ("x&127 vs x under x<128", [lt(128)], a.apply("and", (x, c(127))), [lt(128)], x),
        ("x&127 vs x under x<200", [lt(200)], a.apply("and", (x, c(127))), [lt(200)], x),
        ("3x==6 vs x==2", [a.apply("eq", (a.apply("mul", (x, c(3))), c(6)))], x, [a.apply("eq", (x, c(2)))], x),
    ]
    rows, ok = [], True
    for label, pa, xa, pb, xb in pairs:
        ia, ib = _craft(base, pa, xa), _craft(base, pb, xb)
        assert ia.digest() == ib.digest()
        got = ex.same_state(ia, ib)
        want = _brute_same(a, pa, xa, pb, xb)
        ok &= got == want
        rows.append(f"{label}: {'same' if got else 'distinct'}{'' if got == want else ' (WRONG)'}")
    verdict("semantic dedup", ok and len(pairs) >= 5, f"{len(pairs)} colliding pairs; " + "; ".join(rows))


# 10 ----------------------------------------------------------------------

def test_transform_time_per_program():
    times = {}
    for name in sorted(manifest()):
        m = load(name)
        for domain in ("term", "parity"):
            t0 = time.perf_counter()
            transform(m, domain=domain)
            ms = (time.perf_counter() - t0) * 1000
            times[name] = max(times.get(name, 0.0), ms)
    worst = max(times, key=times.get)
    table = ", ".join(f"{n} {ms:.2f}ms" for n, ms in times.items())
    verdict("transform time", times[worst] < 100,
            f"max {times[worst]:.2f}ms ({worst}) over {len(times)} programs (limit 100ms): {table}")
