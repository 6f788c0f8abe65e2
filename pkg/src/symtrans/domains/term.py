"""Term domain: values are hash-consed terms over input symbols, branch
decisions accumulate into a path condition."""

from __future__ import annotations

from typing import Callable, Sequence

from ..ir.nodes import BINOPS, CASTS, PREDICATES
from ..ir.types import IntType, PTR
from ..solver import SolverError, check_equiv, extract_for_solver, make_backend
from ..terms import TermArena, eval_term
from .base import DomainContext, DomainDescriptor, Infeasible, LowerRefused

NAME = "term"


class TermStore:
    """Per-worker state shared by every path the worker explores: the term
    arena, a solver connection and the feasibility memo."""

    def __init__(self, backend=None, backend_factory: Callable | None = None,
                 arena: TermArena | None = None):
        self.arena = arena if arena is not None else TermArena()
        self._backend = backend
        self._factory = backend_factory or (lambda: make_backend("auto"))
        self.memo: dict[tuple, str] = {}
        self.solver_calls = 0
        self.memo_hits = 0

    @property
    def backend(self):
        if self._backend is None:
            self._backend = self._factory()
        return self._backend

    def check(self, conj: Sequence[int], symbols=None):
        self.solver_calls += 1
        return self.backend.check(extract_for_solver(self.arena, conj, symbols=symbols))

    def close(self) -> None:
        if self._backend is not None:
            self._backend.close()


class TermContext(DomainContext):
    name = NAME

    def __init__(self, store: TermStore | None = None):
        self.store = store if store is not None else TermStore()
        self.arena = self.store.arena
        self.pc: tuple[int, ...] = ()
        self.sym_widths: tuple[int, ...] = ()

    def snapshot(self):
        return self.pc, self.sym_widths

    def restore(self, image) -> None:
        self.pc, self.sym_widths = image

    def handles(self) -> tuple[int, ...]:
        return self.pc

    def remap(self, mapping: dict[int, int]) -> None:
        self.pc = tuple(mapping[t] for t in self.pc)

    def _pad(self, index: int) -> None:
        # inputs are numbered by creation order; a pinned input keeps its
        # slot with width 0 so it is never declared to the solver
        if index > len(self.sym_widths):
            self.sym_widths = self.sym_widths + (0,) * (index - len(self.sym_widths))

    # -- value hooks --
    def fresh(self, t: IntType, index: int) -> int:
        self._pad(index)
        self.sym_widths = self.sym_widths + (t.width,)
        return self.arena.symbol(index, t.width)

    def skip_symbol(self, t: IntType, index: int) -> None:
        self._pad(index)
        self.sym_widths = self.sym_widths + (0,)

    def lift(self, bits: int, t: IntType) -> int:
        return self.arena.const(bits, t.width)

    def lower(self, h: int, t: IntType) -> int:
        a = self.arena
        if a.is_const(h):
            return a.const_value(h)
        syms = sorted(set(self._live_symbols()) | set(a.symbols([h])))
        try:
            ans = self.store.check(self.pc, symbols=syms)
        except SolverError as e:
            raise LowerRefused(str(e)) from e
        if ans.unsat:
            raise Infeasible("path condition has no model")
        if not ans.sat:
            raise LowerRefused(ans.reason or "solver unknown")
        model = dict(ans.model)
        for idx, _ in a.symbols([h]):
            model.setdefault(idx, 0)
        v = eval_term(a, h, model)
        self._append(a.apply("eq", (h, a.const(v, t.width))))
        return v

    def freeze(self, h: int, t: IntType):
        return h, t

    def thaw(self, record, t: IntType) -> int:
        return record[0]

    def _append(self, c: int) -> None:
        if not (self.arena.is_const(c) and self.arena.const_value(c) == 1):
            self.pc = self.pc + (c,)

    def assume(self, h: int, direction: int) -> bool:
        a = self.arena
        c = h if direction else a.not_(h)
        if a.is_const(c):
            return a.const_value(c) == 1
        self.pc = self.pc + (c,)
        return True

    # -- solver-backed hooks --
    def feasible(self) -> str:
        pc = self.pc
        if not pc:
            return "sat"
        memo = self.store.memo
        hit = memo.get(pc)
        if hit is not None:
            self.store.memo_hits += 1
            return hit
        try:
            status = self.store.check(pc).status
        except SolverError:
            status = "unknown"
        if status != "unknown":
            memo[pc] = status
        return status

    def _query(self, extra: Sequence[int]) -> tuple[str, dict]:
        try:
            ans = self.store.check(list(self.pc) + list(extra), symbols=self._live_symbols())
        except SolverError:
            return "unknown", {}
        return ans.status, ans.model

    def _live_symbols(self):
        return [(i, w) for i, w in enumerate(self.sym_widths) if w]

    def check_assert(self, h: int) -> tuple[str, dict]:
        a = self.arena
        if a.is_const(h):
            return ("holds", {}) if a.const_value(h) else ("fails", self.model() or {})
        status, model = self._query([a.not_(h)])
        if status == "sat":
            return "fails", model
        if status == "unsat":
            return "holds", {}
        return "unknown", {}

    def division(self, h: int) -> tuple[str, dict]:
        a = self.arena
        if a.is_const(h):
            return ("safe", {}) if a.const_value(h) else ("may-trap", self.model() or {})
        status, model = self._query([a.apply("eq", (h, a.const(0, a.width(h))))])
        if status == "sat":
            return "may-trap", model
        if status == "unsat":
            return "safe", {}
        return "unknown", {}

    def guard_nonzero(self, h: int) -> bool:
        a = self.arena
        return self.assume(a.apply("ne", (h, a.const(0, a.width(h)))), 1)

    def model(self) -> dict | None:
        status, model = self._query([])
        if status != "sat":
            return None
        return model

    def exact(self) -> bool:
        # every extension of the path condition was checked satisfiable
        return True

    def constraint_count(self) -> int:
        return len(self.pc)

    # -- state comparison --
    def syntactic_key(self, handles) -> tuple:
        # symbols are already numbered by creation order, so raw ids are a
        # canonical naming within one arena
        return tuple(handles), self.pc

    def equivalent(self, handles, other: "TermContext", other_handles) -> str:
        if self.syntactic_key(handles) == other.syntactic_key(other_handles):
            return "yes"
        pairs = list(zip(handles, other_handles))
        syms = sorted(set(self._live_symbols()) | set(other._live_symbols()))
        try:
            res = check_equiv(self.arena, self.pc, other.pc, pairs, self.store.backend, symbols=syms)
        except SolverError:
            return "unknown"
        self.store.solver_calls += 1
        return res.verdict


def _binop(op):
    def f(ctx: TermContext, width: int, a: int, b: int) -> int:
        return ctx.arena.apply(op, (a, b))

    f.__name__ = f"term_{op}"
    return f


def _cast(op):
    def f(ctx: TermContext, width: int, a: int) -> int:
        return ctx.arena.apply(op, (a,), width)

    f.__name__ = f"term_{op}"
    return f


def make_descriptor() -> DomainDescriptor:
    ops = {op: _binop(op) for op in BINOPS}
    ops.update({f"icmp_{p}": _binop(p) for p in PREDICATES})
    ops.update({c: _cast(c) for c in CASTS})
    return DomainDescriptor(
        name=NAME,
        ops=ops,
        new_context=TermContext,
        lift=TermContext.lift,
        lower=TermContext.lower,
        freeze=TermContext.freeze,
        thaw=TermContext.thaw,
        assume=TermContext.assume,
        forks=True,
        rho=lambda t: PTR,
    )
