import random

import pytest

import oracles
from conftest import needs_solver
from symtrans.solver import (
    BruteForceBackend,
    ExternalBackend,
    SolverError,
    check_equiv,
    extract_for_solver,
    make_backend,
)
from symtrans.solver.external import session_preamble
from symtrans.terms import TermArena, eval_term


def _lt(a, x, k):
    return a.apply("ult", (x, a.const(k, 8)))


def test_brute_force_finds_the_smallest_model():
    a = TermArena()
    x = a.symbol(0, 8)
    q = extract_for_solver(a, [_lt(a, x, 10), a.apply("ugt", (x, a.const(7, 8)))])
    ans = BruteForceBackend().check(q)
    assert ans.sat and ans.model == {0: 8}
    assert BruteForceBackend().models(q) == {(8,), (9,)}


def test_brute_force_unsat_and_empty_query():
    a = TermArena()
    x = a.symbol(0, 8)
    b = BruteForceBackend()
    assert b.check(extract_for_solver(a, [_lt(a, x, 0)])).unsat
    assert b.check(extract_for_solver(a, [])).sat


def test_brute_force_refuses_wide_queries():
    a = TermArena()
    x = a.symbol(0, 32)
    q = extract_for_solver(a, [a.apply("ult", (x, a.const(3, 32)))])
    with pytest.raises(SolverError):
        BruteForceBackend().check(q)


def test_divisors_get_a_nonzero_guard():
    a = TermArena()
    x, y = a.symbol(0, 8), a.symbol(1, 8)
    q = extract_for_solver(a, [a.apply("eq", (a.apply("udiv", (x, y)), a.const(0, 8)))])
    assert "distinct" in q.to_smtlib()
    for model in BruteForceBackend().models(q):
        assert model[1] != 0


def test_models_cover_requested_symbols():
    a = TermArena()
    x = a.symbol(0, 8)
    q = extract_for_solver(a, [_lt(a, x, 3)], symbols=[(0, 8), (4, 16)])
    assert q.symbols == ((0, 8), (4, 16))
    assert set(BruteForceBackend().check(q).model) == {0, 4}


def test_equivalence_examples():
    a = TermArena()
    x = a.symbol(0, 8)
    b = BruteForceBackend()
    assert check_equiv(a, [_lt(a, x, 10), _lt(a, x, 20)], [_lt(a, x, 10)], [], b).verdict == "yes"
    res = check_equiv(a, [_lt(a, x, 5)], [_lt(a, x, 6)], [], b)
    assert res.verdict == "no" and res.witness == {0: 5}
    two_x = a.apply("mul", (x, a.const(2, 8)))
    x_plus_x = a.apply("add", (x, x))
    assert check_equiv(a, [], [], [(two_x, x_plus_x)], b)
    low = a.apply("and", (x, a.const(0x7F, 8)))
    assert check_equiv(a, [_lt(a, x, 128)], [_lt(a, x, 128)], [(low, x)], b)
    assert not check_equiv(a, [_lt(a, x, 200)], [_lt(a, x, 200)], [(low, x)], b)


def test_transcript_is_replayable_text():
    b = make_backend("brute", record=True)
    a = TermArena()
    b.check(extract_for_solver(a, [_lt(a, a.symbol(0, 8), 9)]))
    text = "".join(b.transcript)
    assert text.startswith(session_preamble(30.0))
    assert "(push 1)" in text and "(pop 1)" in text and "(check-sat)" in text


@needs_solver
def test_external_solver_session():
    a = TermArena()
    x = a.symbol(0, 8)
    b = ExternalBackend()
    try:
        ans = b.check(extract_for_solver(a, [a.apply("eq", (x, a.const(42, 8)))]))
        assert ans.sat and ans.model == {0: 42}
        assert b.check(extract_for_solver(a, [_lt(a, x, 0)])).unsat
        # the session survives many push/pop rounds
        for k in range(1, 30):
            assert b.check(extract_for_solver(a, [_lt(a, x, k)])).sat
    finally:
        b.close()


def test_missing_solver_binary_is_an_error():
    with pytest.raises(SolverError):
        ExternalBackend(path="/nonexistent/solver")


@needs_solver
@pytest.mark.parametrize("seed", range(8))
def test_backends_agree_on_random_queries(seed):
    rng = random.Random(seed)
    ext, brute = ExternalBackend(), BruteForceBackend()
    try:
        for _ in range(25):
            a = TermArena()
            pc = oracles.random_pc(a, rng)
            q = extract_for_solver(a, pc)
            e, b = ext.check(q), brute.check(q)
            assert e.status == b.status
            if e.sat:
                env = {i: e.model.get(i, 0) for i in range(2)}
                assert all(eval_term(a, t, env) == 1 for t in pc)
    finally:
        ext.close()


def _fake_solver(tmp_path, body):
    exe = tmp_path / "fake-solver"
    exe.write_text("#!/bin/sh\n" + body)
    exe.chmod(0o755)
    return str(exe)


def _one_query():
    a = TermArena()
    return extract_for_solver(a, [_lt(a, a.symbol(0, 8), 3)])


def test_solver_unknown_reply_is_passed_through(tmp_path):
    b = ExternalBackend(path=_fake_solver(tmp_path, 'while read l; do case "$l" in "(check-sat)") echo unknown;; "(get-value"*) echo \'(error "no model")\';; esac; done\n'))
    try:
        ans = b.check(_one_query())
        assert ans.status == "unknown"
    finally:
        b.close()


def test_solver_error_reply_raises(tmp_path):
    b = ExternalBackend(path=_fake_solver(tmp_path, 'read l; echo \'(error "bad input")\'\n'))
    with pytest.raises(SolverError):
        b.check(_one_query())


def test_solver_crash_raises(tmp_path):
    b = ExternalBackend(path=_fake_solver(tmp_path, "exit 1\n"))
    with pytest.raises(SolverError):
        b.check(_one_query())
