"""Solver queries over the quantifier-free bitvector theory.

A :class:`SolverQuery` is a self-contained copy of the relevant term DAG, so
it can be serialized, hashed, shipped to another worker or fed to the
brute-force kernel without touching the arena it came from.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ..ir.nodes import CASTS, DIVOPS, PREDICATES
from ..terms import TermArena


class SolverError(RuntimeError):
    """Backend failure: spawn/IO problems, protocol errors, bound exceeded."""


@dataclass(frozen=True)
class SolverAnswer:
    status: str  # "sat" | "unsat" | "unknown"
    model: dict = field(default_factory=dict)  # symbol index -> bits
    reason: str = ""

    @property
    def sat(self) -> bool:
        return self.status == "sat"

    @property
    def unsat(self) -> bool:
        return self.status == "unsat"


@dataclass(frozen=True)
class SolverQuery:
    """Symbols as (index, width) in creation order; ``nodes`` in the export
    format of :meth:`TermArena.export`; ``assertions`` are node positions of
    width-1 terms that must equal 1."""

    symbols: tuple[tuple[int, int], ...]
    nodes: tuple[tuple, ...]
    assertions: tuple[int, ...]
    kind: str = "check-sat-and-model"

    @property
    def total_bits(self) -> int:
        return sum(w for _, w in self.symbols)

    def to_smtlib(self, get_model: bool = True) -> str:
        return to_smtlib(self, get_model)


def extract_for_solver(
    arena: TermArena,
    pc: Sequence[int],
    extra: Iterable[int] = (),
    symbols: Iterable[tuple[int, int]] | None = None,
    kind: str = "check-sat-and-model",
) -> SolverQuery:
    """Conjunction of ``pc`` and ``extra``, plus a ``d != 0`` guard for every
    non-constant divisor reachable from them.

    ``symbols`` adds declarations beyond the ones the terms mention, so a
    model can be made total over every input a state has read.
    """
    roots = list(pc) + list(extra)
    for d in arena.divisors(roots):
        roots.append(arena.apply("ne", (d, arena.const(0, arena.width(d)))))
    seen: set[int] = set()
    uniq = []
    for r in roots:
        if r not in seen and not (arena.is_const(r) and arena.const_value(r) == 1):
            seen.add(r)
            uniq.append(r)
    nodes, pos = arena.export(uniq)
    syms = dict(arena.symbols(uniq))
    for idx, w in symbols or ():
        syms.setdefault(idx, w)
    return SolverQuery(
        symbols=tuple(sorted(syms.items())),
        nodes=nodes,
        assertions=tuple(pos[r] for r in uniq),
        kind=kind,
    )


_SMT_BINOP = {
    "add": "bvadd", "sub": "bvsub", "mul": "bvmul",
    "udiv": "bvudiv", "sdiv": "bvsdiv", "urem": "bvurem", "srem": "bvsrem",
    "and": "bvand", "or": "bvor", "xor": "bvxor",
    "shl": "bvshl", "lshr": "bvlshr", "ashr": "bvashr",
}
_SMT_PRED = {
    "eq": "=", "ne": "distinct",
    "ult": "bvult", "ule": "bvule", "ugt": "bvugt", "uge": "bvuge",
    "slt": "bvslt", "sle": "bvsle", "sgt": "bvsgt", "sge": "bvsge",
}


def bv_literal(bits: int, width: int) -> str:
    if width % 4 == 0:
        return f"#x{bits:0{width // 4}x}"
    return f"#b{bits:0{width}b}"


def parse_bv_literal(text: str) -> int:
    text = text.strip()
    if text.startswith("#x"):
        return int(text[2:], 16)
    if text.startswith("#b"):
        return int(text[2:], 2)
    if text.startswith("(_ bv"):
        return int(text[5:].split()[0])
    raise SolverError(f"cannot parse bitvector literal {text!r}")


def symbol_name(index: int) -> str:
    return f"s{index}"


def to_smtlib(q: SolverQuery, get_model: bool = True) -> str:
    """Deterministic script body: declarations, one ``define-fun`` per
    compound node in post-order, assertions, check-sat, and optionally a
    get-value over every declared symbol."""
    lines = []
    for idx, w in q.symbols:
        lines.append(f"(declare-fun {symbol_name(idx)} () (_ BitVec {w}))")
    ref: list[str] = []
    for k, (op, a, b, w) in enumerate(q.nodes):
        if op == "const":
            ref.append(bv_literal(a, w))
            continue
        if op == "sym":
            ref.append(symbol_name(a))
            continue
        if op in CASTS:
            src_w = q.nodes[a][3]
            if op == "trunc":
                body = f"((_ extract {w - 1} 0) {ref[a]})"
            else:
                fn = "zero_extend" if op == "zext" else "sign_extend"
                body = f"((_ {fn} {w - src_w}) {ref[a]})"
        elif op in PREDICATES:
            body = f"(ite ({_SMT_PRED[op]} {ref[a]} {ref[b]}) #b1 #b0)"
        else:
            body = f"({_SMT_BINOP[op]} {ref[a]} {ref[b]})"
        name = f"t{k}"
        lines.append(f"(define-fun {name} () (_ BitVec {w}) {body})")
        ref.append(name)
    for p in q.assertions:
        lines.append(f"(assert (= {ref[p]} #b1))")
    lines.append("(check-sat)")
    if get_model and q.symbols:
        names = " ".join(symbol_name(i) for i, _ in q.symbols)
        lines.append(f"(get-value ({names}))")
    return "\n".join(lines) + "\n"


def has_division(q: SolverQuery) -> bool:
    return any(n[0] in DIVOPS for n in q.nodes)
