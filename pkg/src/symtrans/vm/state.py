"""Machine state, state images and run outcomes."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any, Optional

SEG_SHIFT = 32
OFF_MASK = (1 << SEG_SHIFT) - 1
GLOBAL_SEGMENT = 1  # reserved; the IR has no globals yet
FIRST_SEGMENT = 2

TRAP_EXIT_CODE = 101


class VmError(RuntimeError):
    """Embedder misuse (not a program fault)."""


class Halt(Exception):
    """Raised inside instruction closures to stop the run loop.

    ``kind`` is one of trap, assert, infeasible, unknown, choice, fuel.
    """

    def __init__(self, kind: str, detail: str = "", **data):
        super().__init__(f"{kind}: {detail}")
        self.kind = kind
        self.detail = detail
        self.data = data


@dataclass
class Outcome:
    """How a run ended.

    ``exit`` carries ``value``; ``choice`` carries ``site`` and ``arity``;
    ``trap``/``assert``/``infeasible``/``unknown``/``fuel`` carry ``detail``.
    """

    kind: str
    value: Optional[int] = None
    detail: str = ""
    site: str = ""
    arity: int = 0
    data: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        if self.kind == "exit":
            return (self.value or 0) & 0xFF
        if self.kind in ("trap", "assert"):
            return TRAP_EXIT_CODE
        return 3


class Frame:
    __slots__ = ("fn", "regs", "block", "code", "ip", "ret_key", "segs")

    def __init__(self, fn, regs, block, code, ip=0, ret_key=None, segs=None):
        self.fn = fn
        self.regs = regs
        self.block = block
        self.code = code
        self.ip = ip
        self.ret_key = ret_key
        self.segs = segs if segs is not None else []


class MachineState:
    """Mutable state of one execution path. Confined to one worker."""

    def __init__(self):
        self.frames: list[Frame] = []
        self.mem: dict[int, bytearray] = {}
        # segment -> {offset: (AbstractValue, size)}
        self.shadow: dict[int, dict[int, tuple]] = {}
        self.next_seg = FIRST_SEGMENT
        self.output: list[str] = []
        self.trail: list[tuple[str, int, int]] = []
        self.decisions: list[tuple] = []
        self.nsyms = 0
        self.ctx: dict[str, Any] = {}
        self.pending: Optional[int] = None
        self.steps = 0
        self.result: Optional[Outcome] = None

    @property
    def finished(self) -> bool:
        return self.result is not None and self.result.kind != "choice"

    def shadow_entries(self) -> list[tuple[int, int, Any, int]]:
        return [
            (seg, off, v, size)
            for seg, entries in sorted(self.shadow.items())
            for off, (v, size) in sorted(entries.items())
        ]


@dataclass(frozen=True)
class StateImage:
    """Immutable snapshot; restore it with :meth:`Machine.restore`.

    ``owner`` identifies the domain stores the handles inside belong to, so
    a different worker can import them.
    """

    frames: tuple
    mem: tuple
    shadow: tuple
    next_seg: int
    output: tuple
    trail: tuple
    decisions: tuple
    nsyms: int
    ctx: tuple
    steps: int
    result: Optional[Outcome]
    owner: Any = None

    def digest(self) -> bytes:
        """Hash of the concrete part: control, concrete register values,
        memory bytes and shadow static types. Abstract handles and
        constraints are left out on purpose."""
        h = hashlib.blake2b(digest_size=20)
        for fname, regs, block, ip, ret_key, segs in self.frames:
            h.update(repr((fname, block, ip, ret_key, segs)).encode())
            h.update(repr(concrete_view(regs)).encode())
        h.update(repr(self.mem).encode())
        h.update(repr(tuple(
            (seg, tuple((off, v.tag, v.payload if v.tag == "concrete" else None, str(v.stype), size)
                        for off, (v, size) in entries))
            for seg, entries in self.shadow
        )).encode())
        h.update(repr((self.next_seg, self.nsyms)).encode())
        return h.digest()

    def abstract_handles(self) -> list[tuple[str, int]]:
        """(domain, handle) of every abstract value in a fixed traversal order."""
        out = []
        for _, regs, *_ in self.frames:
            for _, v in regs:
                tag = getattr(v, "tag", None)
                if tag is not None and tag != "concrete":
                    out.append((tag, v.payload))
        for _, entries in self.shadow:
            for _, (v, _) in entries:
                if v.tag != "concrete":
                    out.append((v.tag, v.payload))
        return out


def concrete_view(regs) -> tuple:
    out = []
    for k, v in regs:
        tag = getattr(v, "tag", None)
        if tag is None:
            out.append((k, v))
        elif tag == "concrete":
            out.append((k, "c", v.payload, str(v.stype)))
        else:
            out.append((k, tag, str(v.stype)))
    return tuple(out)
