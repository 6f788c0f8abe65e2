"""Parity domain: each abstract integer is even, odd or undef.

Handles index cells in a per-state table so that refining a value through
``assume`` is seen by every register holding it. For width-1 values parity
is exact: even is 0 and odd is 1.
"""

from __future__ import annotations

from ..ir.nodes import BINOPS, CASTS, PREDICATES
from ..ir.types import I8, IntType
from .base import DomainContext, DomainDescriptor, LowerRefused

NAME = "parity"

EVEN, ODD, UNDEF = 0, 1, 2
NAMES = ("even", "odd", "undef")


def of_bits(bits: int) -> int:
    return bits & 1


def join(a: int, b: int) -> int:
    return a if a == b else UNDEF


def leq(a: int, b: int) -> bool:
    """Lattice order: even, odd below undef."""
    return a == b or b == UNDEF


def transfer(op: str, a: int, b: int) -> int:
    """Abstract result of ``op`` on two parities (no pattern knowledge)."""
    if a == UNDEF or b == UNDEF:
        return UNDEF
    if op in ("add", "sub"):
        return a ^ b
    if op == "mul":
        return a & b
    return UNDEF


class ParityContext(DomainContext):
    name = NAME

    def __init__(self, store=None):
        self.cells: list[int] = []
        # handle -> ("const", bits) | ("mask", x) | ("maskeq", x, k)
        self.derivation: dict[int, tuple] = {}
        self.forked = False

    def snapshot(self):
        return tuple(self.cells), dict(self.derivation), self.forked

    def restore(self, image) -> None:
        cells, der, self.forked = image
        self.cells = list(cells)
        self.derivation = dict(der)

    def handles(self) -> tuple[int, ...]:
        return ()

    def remap(self, mapping) -> None:
        pass

    def _new(self, p: int, derivation: tuple | None = None) -> int:
        self.cells.append(p)
        h = len(self.cells) - 1
        if derivation is not None:
            self.derivation[h] = derivation
        return h

    def parity(self, h: int) -> int:
        return self.cells[h]

    # -- hooks --
    def fresh(self, t: IntType, index: int) -> int:
        return self._new(UNDEF)

    def skip_symbol(self, t: IntType, index: int) -> None:
        pass

    def lift(self, bits: int, t: IntType) -> int:
        return self._new(of_bits(bits), ("const", bits))

    def lower(self, h: int, t: IntType) -> int:
        p = self.cells[h]
        if t.width == 1 and p != UNDEF:
            return p
        raise LowerRefused(f"parity {NAMES[p]} is not a single value")

    def freeze(self, h: int, t: IntType):
        return h, t

    def thaw(self, record, t: IntType) -> int:
        return record[0]

    def _const(self, h: int):
        d = self.derivation.get(h)
        return d[1] if d is not None and d[0] == "const" else None

    def assume(self, h: int, direction: int) -> bool:
        p = self.cells[h]
        if p != UNDEF:
            return p == direction
        self.forked = True
        d = self.derivation.get(h)
        if d is not None and d[0] == "maskeq":
            _, x, k = d
            if direction == 1:
                if k > 1:
                    return False
                want = k
            else:
                want = 1 - k if k <= 1 else None
            if want is not None:
                if self.cells[x] == UNDEF:
                    self.cells[x] = want
                elif self.cells[x] != want:
                    return False
        self.cells[h] = direction
        return True

    def check_assert(self, h: int) -> tuple[str, dict]:
        p = self.cells[h]
        if p == ODD:
            return "holds", {}
        if p == EVEN and not self.forked:
            # control never depended on an abstract value, so every input
            # reaches this assert and fails it
            return "fails", {}
        return "unknown", {}

    def division(self, h: int) -> tuple[str, dict]:
        return ("safe", {}) if self.cells[h] == ODD else ("unknown", {})

    def model(self) -> dict | None:
        return {} if not self.forked else None

    def exact(self) -> bool:
        return not self.forked

    def syntactic_key(self, handles) -> tuple:
        return tuple(self.cells[h] for h in handles)

    def equivalent(self, handles, other, other_handles) -> str:
        same = self.syntactic_key(handles) == other.syntactic_key(other_handles)
        return "yes" if same else "no"


def _arith(op):
    def f(ctx: ParityContext, width: int, a: int, b: int) -> int:
        return ctx._new(transfer(op, ctx.cells[a], ctx.cells[b]))

    return f


def _and(ctx: ParityContext, width: int, a: int, b: int) -> int:
    # (x & 1) keeps x's parity; any other mask is undef
    if ctx._const(b) == 1:
        return ctx._new(ctx.cells[a], ("mask", a))
    if ctx._const(a) == 1:
        return ctx._new(ctx.cells[b], ("mask", b))
    return ctx._new(UNDEF)


def _icmp_eq(ctx: ParityContext, width: int, a: int, b: int) -> int:
    for m, c in ((a, b), (b, a)):
        d = ctx.derivation.get(m)
        k = ctx._const(c)
        if d is not None and d[0] == "mask" and k is not None:
            x = d[1]
            px = ctx.cells[x]
            p = UNDEF if px == UNDEF else int(px == k)
            return ctx._new(p, ("maskeq", x, k))
    return ctx._new(UNDEF)


def _undef(ctx: ParityContext, width: int, *handles: int) -> int:
    return ctx._new(UNDEF)


def make_descriptor() -> DomainDescriptor:
    ops = {op: _undef for op in BINOPS}
    ops.update({op: _arith(op) for op in ("add", "sub", "mul")})
    ops["and"] = _and
    ops.update({f"icmp_{p}": _undef for p in PREDICATES})
    ops["icmp_eq"] = _icmp_eq
    ops.update({c: _undef for c in CASTS})
    return DomainDescriptor(
        name=NAME,
        ops=ops,
        new_context=ParityContext,
        lift=ParityContext.lift,
        lower=ParityContext.lower,
        freeze=ParityContext.freeze,
        thaw=ParityContext.thaw,
        assume=ParityContext.assume,
        forks=True,
        rho=lambda t: I8,
    )
