"""Exhaustive-enumeration backend for small queries."""

from __future__ import annotations

from .. import kernels
from .query import SolverAnswer, SolverError, SolverQuery

MAX_BITS = 24


class BruteForceBackend:
    name = "brute"

    def __init__(self, max_bits: int = MAX_BITS):
        self.max_bits = max_bits
        self.calls = 0

    def check(self, q: SolverQuery) -> SolverAnswer:
        bits = q.total_bits
        if bits > self.max_bits:
            raise SolverError(
                f"brute-force backend limited to {self.max_bits} symbol bits, query has {bits}"
            )
        self.calls += 1
        prog = kernels.compile_nodes(q.nodes, q.assertions, q.symbols)
        hit = kernels.find_first(prog, 0, 1 << bits)
        if hit < 0:
            return SolverAnswer("unsat")
        return SolverAnswer("sat", decode(q.symbols, hit))

    def models(self, q: SolverQuery) -> set[tuple[int, ...]]:
        """Every satisfying assignment, as tuples ordered like ``q.symbols``."""
        bits = q.total_bits
        if bits > self.max_bits:
            raise SolverError(f"{bits} symbol bits exceed the enumeration bound")
        prog = kernels.compile_nodes(q.nodes, q.assertions, q.symbols)
        mask = kernels.sat_mask(prog, 0, 1 << bits)
        out = set()
        for i in mask.nonzero()[0]:
            m = decode(q.symbols, int(i))
            out.add(tuple(m[idx] for idx, _ in q.symbols))
        return out

    def close(self) -> None:
        pass


def decode(symbols, index: int) -> dict[int, int]:
    model = {}
    shift = 0
    for idx, w in symbols:
        model[idx] = (index >> shift) & ((1 << w) - 1)
        shift += w
    return model
