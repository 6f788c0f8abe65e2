"""Semantic equivalence of two symbolic states sharing one term arena."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from ..terms import TermArena
from .query import extract_for_solver


@dataclass(frozen=True)
class Equivalence:
    verdict: str  # "yes" | "no" | "unknown"
    witness: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.verdict == "yes"


def check_equiv(
    arena: TermArena,
    pc_a: Sequence[int],
    pc_b: Sequence[int],
    pairs: Sequence[tuple[int, int]],
    backend,
    symbols=None,
) -> Equivalence:
    """``yes`` iff the path conditions have the same models and every pair
    of terms agrees on all of them. Symbols correspond by creation index
    because both states draw them from the same arena."""
    a = arena.and_all(pc_a)
    b = arena.and_all(pc_b)
    queries = [
        [a, arena.not_(b)],
        [b, arena.not_(a)],
    ]
    both = [a, b]
    for ta, tb in pairs:
        if ta != tb:
            queries.append(both + [arena.apply("ne", (ta, tb))])
    unknown = False
    for conj in queries:
        ans = backend.check(extract_for_solver(arena, conj, symbols=symbols, kind="check-entailment"))
        if ans.sat:
            return Equivalence("no", ans.model)
        if ans.status == "unknown":
            unknown = True
    return Equivalence("unknown" if unknown else "yes")
