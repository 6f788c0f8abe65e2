"""
Brute-force kernel benchmark: numba vs pure numpy.

Builds a 24-bit query over three i8 symbols and times a full model
scan (sat_mask) plus a worst-case first-model search (find_first on an
unsatisfiable query). JIT compilation is timed separately.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import time

from symtrans import kernels
from symtrans.kernels import numpy_impl
from symtrans.solver import extract_for_solver
from symtrans.terms import TermArena


def build(unsat: bool):
    arena = TermArena()
    x, y, z = (arena.symbol(i, 8) for i in range(3))
    c = lambda v: arena.const(v, 8)  # noqa: E731
    s = arena.apply("add", (arena.apply("mul", (x, c(3))), y))
    pc = [
        arena.apply("ult", (arena.apply("xor", (s, z)), c(200))),
        arena.apply("ne", (arena.apply("urem", (x, arena.apply("or", (y, c(1))))), c(0))),
    ]
    if unsat:
        pc.append(arena.apply("eq", (arena.apply("and", (z, c(1))), c(2))))
    q = extract_for_solver(arena, pc, symbols=[(0, 8), (1, 8), (2, 8)])
    return kernels.compile_nodes(q.nodes, q.assertions, q.symbols)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    n = 1 << 24
    sat, unsat = build(False), build(True)
    impls = {"numpy": numpy_impl}
    if kernels.numba_impl is not None:
        jit = kernels.numba_impl
        t0 = time.perf_counter()
        jit.sat_mask(sat, 0, 256)
        jit.find_first(unsat, 0, 256)
        print(f"numba warmup (JIT compile): {time.perf_counter() - t0:.2f}s")
        impls["numba"] = jit
    else:
        print("numba kernels disabled; timing numpy only")

    results = {}
    for name, impl in impls.items():
        ts = best_of(lambda: impl.sat_mask(sat, 0, n), args.repeat)
        tf = best_of(lambda: impl.find_first(unsat, 0, n), args.repeat)
        results[name] = (ts, tf)
        print(f"{name:6s} sat_mask {ts * 1e3:8.1f} ms   find_first(unsat) {tf * 1e3:8.1f} ms")

    if "numba" in results:
        (ns, nf), (js, jf) = results["numpy"], results["numba"]
        print(f"speedup  sat_mask x{ns / js:.1f}   find_first x{nf / jf:.1f}")
    models = int(impls["numpy"].sat_mask(sat, 0, n).sum())
    print(f"models of the satisfiable query: {models} / {n}")


if __name__ == "__main__":
    main()
