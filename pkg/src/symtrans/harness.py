"""Concrete reference runs used to check the pipeline end to end.

* :func:`concrete_paths` enumerates every input vector and every
  ``@choose`` resolution of an untransformed program and collects
  ``(decisions, outcome)`` pairs.
* :class:`EquivalenceRunner` runs an original and a transformed module
  side by side on pinned inputs.
"""

from __future__ import annotations

import itertools
import random
from typing import Sequence

from .ir.nodes import Module
from .vm import DEFAULT_FUEL, Host, Machine, Outcome, VmError

OUTCOME_KIND = {"exit": "ok", "assert": "assert", "trap": "trap"}


class _PinHost(Host):
    """Inputs from a mutable vector, choices from a mutable trail."""

    def __init__(self):
        super().__init__(trail=[], pins=[])

    def set(self, pins, trail):
        self.pins = list(pins)
        self.trail = list(trail)


def concrete_paths(
    original: Module,
    widths: Sequence[int],
    entry: str = "main",
    fuel: int = DEFAULT_FUEL,
) -> set:
    """All ``(decisions, kind)`` pairs over every assignment to inputs of
    the given widths (in creation order) and every choice sequence."""
    host = _PinHost()
    m = Machine(original, host=host, fuel=fuel)
    out: set = set()
    ranges = [range(1 << w) for w in widths]
    for pins in itertools.product(*ranges):
        stack = [[]]
        while stack:
            trail = stack.pop()
            host.set(pins, trail)
            st, res = m.execute(entry)
            if res.kind == "choice":
                stack.extend(trail + [d] for d in range(res.arity))
                continue
            if res.kind == "infeasible":
                continue  # a false @assume: no such execution
            kind = OUTCOME_KIND.get(res.kind)
            if kind is None:
                raise VmError(f"concrete run ended with {res.kind}: {res.detail}")
            out.add((tuple(st.decisions), kind))
    return out


class _RecordingHost(Host):
    def __init__(self, rng: random.Random):
        super().__init__(pins=[])
        self.rng = rng
        self.picked: list[int] = []

    def choose(self, st, site, arity, generated):
        v = self.rng.randrange(arity)
        self.picked.append(v)
        return v


class _FollowingHost(Host):
    """Answers user-level choices from a list; generated ones stop the run
    so the caller can find the feasible direction."""

    def __init__(self, pin_mode: str):
        super().__init__(pins=[], pin_mode=pin_mode)
        self.answers: list[int] = []
        self.used = 0

    def choose(self, st, site, arity, generated):
        if generated:
            return None
        if self.used >= len(self.answers):
            return None
        v = self.answers[self.used]
        self.used += 1
        return v


class EquivalenceRunner:
    """Original vs. transformed on the same pinned inputs.

    ``pin_mode`` is how pinned inputs enter the transformed program:
    ``concrete`` (concrete-tagged values, the fast path) or ``lift``
    (lifted into the domain).
    """

    def __init__(self, original: Module, transformed: Module, pin_mode: str = "concrete",
                 stores=None, entry: str = "main", fuel: int = DEFAULT_FUEL):
        self.entry = entry
        self.rec = _RecordingHost(random.Random(0))
        self.orig = Machine(original, host=self.rec, fuel=fuel)
        self.follow = _FollowingHost(pin_mode)
        self.trans = Machine(transformed, stores=stores, host=self.follow, fuel=fuel)

    def run_original(self, pins, rng: random.Random) -> tuple[tuple, int, list[int]]:
        self.rec.pins = list(pins)
        self.rec.rng = rng
        self.rec.picked = []
        st, out = self.orig.execute(self.entry)
        return tuple(st.output), _code(out), list(self.rec.picked)

    def run_transformed(self, pins, answers) -> tuple[tuple, int]:
        h = self.follow
        h.pins = list(pins)
        h.answers = list(answers)
        h.used = 0
        m = self.trans
        st = m.start(self.entry)
        out = m.run(st)
        while out.kind == "choice":
            img = m.snapshot(st)
            used = h.used
            out = m.run(st, choice=1)
            if out.kind == "infeasible":
                st = m.restore(img)
                h.used = used
                out = m.run(st, choice=0)
        return tuple(st.output), _code(out)

    def compare(self, pins, rng: random.Random) -> tuple[bool, tuple, tuple]:
        o_out, o_code, picked = self.run_original(pins, rng)
        t_out, t_code = self.run_transformed(pins, picked)
        return (o_out, o_code) == (t_out, t_code), (o_out, o_code), (t_out, t_code)


def _code(out: Outcome) -> int:
    # "infeasible" here means a source-level @assume was false
    if out.kind not in ("exit", "trap", "assert", "infeasible"):
        raise VmError(f"run ended with {out.kind}: {out.detail}")
    return out.exit_code
