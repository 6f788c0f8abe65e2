"""Hash-consed bitvector terms.

A :class:`TermArena` is an append-only store of term nodes. Every node is a
4-tuple ``(op, a, b, width)``:

* ``("const", bits, 0, w)`` -- constant
* ``("sym", index, 0, w)`` -- nullary input symbol, numbered by creation order
* ``(cast, child, 0, w)`` -- zext/sext/trunc to width ``w``
* ``(op, left, right, w)`` -- binary operation or comparison (``w == 1``)

Structurally equal nodes share one id and children always have smaller ids
than their parents. :meth:`TermArena.apply` folds constants, orders the
operands of commutative operations by id and applies the identity rules
``x+0, x|0, x^0, x*1, x<<0 -> x``; it does nothing cleverer.
"""

from __future__ import annotations

import threading
from typing import Iterable, Mapping, Sequence

from . import bitops
from .bitops import DivisionByZero
from .ir.nodes import BINOPS, CASTS, DIVOPS, PREDICATES

COMMUTATIVE_TERMS = frozenset(("add", "mul", "and", "or", "xor", "eq", "ne"))
_IDENTITY_ZERO = frozenset(("add", "or", "xor"))
BINARY_TERMS = frozenset(BINOPS) | frozenset(PREDICATES)


class TermError(ValueError):
    """Width or operator misuse while building a term."""


class TermArena:
    def __init__(self):
        self.nodes: list[tuple] = []
        self._index: dict[tuple, int] = {}
        # only taken on a miss; lookups of existing nodes stay lock-free
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def high_water(self) -> int:
        return len(self.nodes)

    def _intern(self, node: tuple) -> int:
        i = self._index.get(node)
        if i is None:
            with self._lock:
                i = self._index.get(node)
                if i is None:
                    i = len(self.nodes)
                    self.nodes.append(node)
                    self._index[node] = i
        return i

    # -- construction --
    def const(self, bits: int, width: int) -> int:
        return self._intern(("const", bits & bitops.mask(width), 0, width))

    def symbol(self, index: int, width: int) -> int:
        return self._intern(("sym", index, 0, width))

    def width(self, t: int) -> int:
        return self.nodes[t][3]

    def op(self, t: int) -> str:
        return self.nodes[t][0]

    def is_const(self, t: int) -> bool:
        return self.nodes[t][0] == "const"

    def const_value(self, t: int) -> int:
        n = self.nodes[t]
        if n[0] != "const":
            raise TermError(f"term {t} is not a constant")
        return n[1]

    def apply(self, op: str, operands: Sequence[int], width: int | None = None) -> int:
        """Build ``op(operands)``; ``width`` is the target width of a cast."""
        if op in CASTS:
            (x,) = operands
            return self._cast(op, x, width)
        if op not in BINARY_TERMS:
            raise TermError(f"unknown term operator {op!r}")
        a, b = operands
        wa, wb = self.nodes[a][3], self.nodes[b][3]
        if wa != wb:
            raise TermError(f"{op}: operand widths {wa} and {wb} differ")
        na, nb = self.nodes[a], self.nodes[b]
        if na[0] == "const" and nb[0] == "const":
            if op in PREDICATES:
                return self.const(bitops.icmp(op, na[1], nb[1], wa), 1)
            return self.const(bitops.binop(op, na[1], nb[1], wa), wa)
        if op in DIVOPS and nb[0] == "const" and nb[1] == 0:
            raise DivisionByZero(op)
        if op in COMMUTATIVE_TERMS and b < a:
            a, b = b, a
            na, nb = nb, na
        if op in _IDENTITY_ZERO:
            if nb[0] == "const" and nb[1] == 0:
                return a
            if na[0] == "const" and na[1] == 0:
                return b
        elif op == "mul":
            if nb[0] == "const" and nb[1] == 1:
                return a
            if na[0] == "const" and na[1] == 1:
                return b
        elif op == "shl" and nb[0] == "const" and nb[1] == 0:
            return a
        rw = 1 if op in PREDICATES else wa
        return self._intern((op, a, b, rw))

    def _cast(self, op: str, x: int, width: int | None) -> int:
        if width is None:
            raise TermError(f"{op} needs a target width")
        w = self.nodes[x][3]
        if op == "trunc" and not width < w:
            raise TermError(f"trunc from {w} to {width}")
        if op in ("zext", "sext") and not width > w:
            raise TermError(f"{op} from {w} to {width}")
        n = self.nodes[x]
        if n[0] == "const":
            return self.const(bitops.cast(op, n[1], w, width), width)
        return self._intern((op, x, 0, width))

    def not_(self, t: int) -> int:
        if self.nodes[t][3] != 1:
            raise TermError("not() needs a width-1 term")
        return self.apply("xor", (t, self.const(1, 1)))

    def and_all(self, ts: Iterable[int]) -> int:
        acc = self.const(1, 1)
        for t in ts:
            acc = self.apply("and", (acc, t))
        return acc

    # -- inspection --
    def children(self, t: int) -> tuple[int, ...]:
        op, a, b, _ = self.nodes[t]
        if op in ("const", "sym"):
            return ()
        if op in CASTS:
            return (a,)
        return (a, b)

    def postorder(self, roots: Iterable[int]) -> list[int]:
        """Reachable nodes, children before parents, first-visit order."""
        out: list[int] = []
        seen: set[int] = set()
        for r in roots:
            if r in seen:
                continue
            stack = [(r, False)]
            while stack:
                t, done = stack.pop()
                if done:
                    out.append(t)
                    continue
                if t in seen:
                    continue
                seen.add(t)
                stack.append((t, True))
                for c in reversed(self.children(t)):
                    if c not in seen:
                        stack.append((c, False))
        return out

    def symbols(self, roots: Iterable[int]) -> list[tuple[int, int]]:
        """(index, width) of every symbol reachable from ``roots``, sorted."""
        syms = {
            (self.nodes[t][1], self.nodes[t][3])
            for t in self.postorder(roots)
            if self.nodes[t][0] == "sym"
        }
        return sorted(syms)

    def depth(self, t: int) -> int:
        d: dict[int, int] = {}
        for n in self.postorder([t]):
            cs = self.children(n)
            d[n] = 1 + max((d[c] for c in cs), default=-1)
        return d[t]

    def divisors(self, roots: Iterable[int]) -> list[int]:
        """Divisor terms of every division reachable from ``roots``."""
        out = []
        for t in self.postorder(roots):
            op, a, b, _ = self.nodes[t]
            if op in DIVOPS and self.nodes[b][0] != "const":
                out.append(b)
        return out

    def pretty(self, t: int) -> str:
        memo: dict[int, str] = {}
        for n in self.postorder([t]):
            op, a, b, w = self.nodes[n]
            if op == "const":
                memo[n] = f"{a}:{w}"
            elif op == "sym":
                memo[n] = f"s{a}:{w}"
            elif op in CASTS:
                memo[n] = f"({op}{w} {memo[a]})"
            else:
                memo[n] = f"({op} {memo[a]} {memo[b]})"
        return memo[t]

    # -- transfer between arenas --
    def export(self, roots: Sequence[int]) -> tuple[tuple, dict[int, int]]:
        """Portable copy of the DAG under ``roots``: a tuple of nodes whose
        child fields refer to positions in the tuple, plus id -> position."""
        pos: dict[int, int] = {}
        out = []
        for t in self.postorder(roots):
            op, a, b, w = self.nodes[t]
            if op in ("const", "sym"):
                out.append((op, a, b, w))
            elif op in CASTS:
                out.append((op, pos[a], 0, w))
            else:
                out.append((op, pos[a], pos[b], w))
            pos[t] = len(out) - 1
        return tuple(out), pos

    def import_nodes(self, nodes: Sequence[tuple]) -> list[int]:
        """Inverse of :meth:`export`: intern nodes, returning their new ids."""
        ids: list[int] = []
        for op, a, b, w in nodes:
            if op in ("const", "sym"):
                ids.append(self._intern((op, a, b, w)))
            elif op in CASTS:
                ids.append(self._intern((op, ids[a], 0, w)))
            else:
                x, y = ids[a], ids[b]
                if op in COMMUTATIVE_TERMS and y < x:
                    x, y = y, x
                ids.append(self._intern((op, x, y, w)))
        return ids


def eval_term(arena: TermArena, t: int, assignment: Mapping[int, int]) -> int:
    """Value of ``t`` when symbol ``i`` takes ``assignment[i]``.

    Raises :class:`DivisionByZero` if any reachable division has a zero
    divisor, mirroring the VM trap.
    """
    vals: dict[int, int] = {}
    nodes = arena.nodes
    for n in arena.postorder([t]):
        op, a, b, w = nodes[n]
        if op == "const":
            vals[n] = a
        elif op == "sym":
            vals[n] = assignment[a] & bitops.mask(w)
        elif op in CASTS:
            vals[n] = bitops.cast(op, vals[a], nodes[a][3], w)
        elif op in PREDICATES:
            vals[n] = bitops.icmp(op, vals[a], vals[b], nodes[a][3])
        else:
            vals[n] = bitops.binop(op, vals[a], vals[b], w)
    return vals[t]


__all__ = ["TermArena", "TermError", "eval_term", "DivisionByZero", "COMMUTATIVE_TERMS"]
