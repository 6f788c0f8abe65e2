"""IR data structures: operands, instructions, blocks, functions, modules."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Union

from .types import I1, I32, PTR, VOID, AbsType, IrType, IntType, int_type

BINOPS = (
    "add", "sub", "mul", "udiv", "sdiv", "urem", "srem",
    "and", "or", "xor", "shl", "lshr", "ashr",
)
DIVOPS = ("udiv", "sdiv", "urem", "srem")
COMMUTATIVE = ("add", "mul", "and", "or", "xor")
PREDICATES = ("eq", "ne", "ult", "ule", "ugt", "uge", "slt", "sle", "sgt", "sge")
CASTS = ("zext", "sext", "trunc")
TERMINATORS = ("br", "ret")
OPCODES = BINOPS + ("icmp",) + CASTS + (
    "alloca", "load", "store", "ptradd", "br", "phi", "call", "ret",
)


@dataclass(frozen=True)
class Reg:
    name: str

    def __str__(self) -> str:
        return f"%{self.name}"


@dataclass(frozen=True)
class Const:
    value: int

    def __str__(self) -> str:
        return str(self.value)


Value = Union[Reg, Const]


@dataclass(frozen=True)
class Instruction:
    """One three-address instruction.

    The meaning of ``ty`` depends on the opcode: operand type for binops,
    icmp and casts (source side), allocated type for alloca, value type for
    load/store/phi/ret, and return type for call.
    """

    op: str
    result: Optional[str] = None
    ty: Optional[IrType] = None
    args: tuple = ()
    pred: Optional[str] = None
    to_ty: Optional[IntType] = None
    callee: Optional[str] = None
    arg_types: tuple = ()
    labels: tuple = ()

    @property
    def is_terminator(self) -> bool:
        return self.op in TERMINATORS

    @property
    def result_type(self) -> Optional[IrType]:
        if self.result is None:
            return None
        op = self.op
        if op == "icmp":
            return _icmp_result(self.ty)
        if op in CASTS:
            return _cast_result(self.ty, self.to_ty)
        if op in ("alloca", "ptradd"):
            return PTR
        return self.ty

    def uses(self) -> Iterator[str]:
        for a in self.args:
            if isinstance(a, Reg):
                yield a.name

    def replace(self, **kw) -> "Instruction":
        return replace(self, **kw)


def _icmp_result(operand_ty):
    return AbsType(I1) if isinstance(operand_ty, AbsType) else I1


def _cast_result(src, dst):
    return AbsType(dst) if isinstance(src, AbsType) else dst


@dataclass(frozen=True)
class Block:
    label: str
    instrs: tuple[Instruction, ...]

    @property
    def terminator(self) -> Optional[Instruction]:
        if self.instrs and self.instrs[-1].is_terminator:
            return self.instrs[-1]
        return None

    def successors(self) -> tuple[str, ...]:
        t = self.terminator
        if t is None or t.op != "br":
            return ()
        return t.labels

    def phis(self) -> Iterator[Instruction]:
        for ins in self.instrs:
            if ins.op != "phi":
                break
            yield ins


@dataclass(frozen=True)
class Function:
    name: str
    params: tuple[tuple[str, IrType], ...]
    ret_ty: IrType
    blocks: tuple[Block, ...]

    @property
    def entry(self) -> Block:
        return self.blocks[0]

    def block(self, label: str) -> Block:
        for b in self.blocks:
            if b.label == label:
                return b
        raise KeyError(label)

    def block_map(self) -> dict[str, Block]:
        return {b.label: b for b in self.blocks}

    def predecessors(self) -> dict[str, list[str]]:
        preds: dict[str, list[str]] = {b.label: [] for b in self.blocks}
        for b in self.blocks:
            for s in b.successors():
                if s in preds and b.label not in preds[s]:
                    preds[s].append(b.label)
        return preds

    def instructions(self) -> Iterator[tuple[Block, int, Instruction]]:
        for b in self.blocks:
            for i, ins in enumerate(b.instrs):
                yield b, i, ins


@dataclass(frozen=True)
class Module:
    functions: tuple[Function, ...] = ()

    def function(self, name: str) -> Function:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    def function_map(self) -> dict[str, Function]:
        return {f.name: f for f in self.functions}

    def has_function(self, name: str) -> bool:
        return any(f.name == name for f in self.functions)


# -- intrinsics ---------------------------------------------------------------
#
# Source-level intrinsics are @sym.iN, @choose, @assume, @assert, @lower.iN and
# @print.iN. The abstraction pass emits domain calls named a_<op>.<domain>.


def intrinsic_signature(name: str):
    """Return (param types, return type) for a source intrinsic, or None."""
    if name == "choose":
        return (I32,), I32
    if name in ("assume", "assert"):
        return (I1,), VOID
    head, _, suffix = name.partition(".")
    if head in ("sym", "lower", "print") and suffix.startswith("i"):
        try:
            t = int_type(int(suffix[1:]))
        except ValueError:
            return None
        if head == "sym":
            return (), t
        if head == "lower":
            return (t,), t
        return (t,), VOID
    return None


def is_intrinsic(name: str) -> bool:
    return intrinsic_signature(name) is not None


def split_domain_call(name: str) -> Optional[tuple[str, str]]:
    """``a_add.term`` -> ("add", "term"); None for non-domain callees."""
    if not name.startswith("a_"):
        return None
    op, dot, dom = name[2:].rpartition(".")
    if not dot or not op or not dom:
        return None
    return op, dom


# op name -> arity, for domain calls; icmp predicates appear as icmp_<pred>
DOMAIN_OPS = {op: 2 for op in BINOPS}
DOMAIN_OPS.update({f"icmp_{p}": 2 for p in PREDICATES})
DOMAIN_OPS.update({c: 1 for c in CASTS})
DOMAIN_OPS.update(
    {"lift": 1, "lower": 1, "sym": 0, "freeze": 2, "thaw": 1, "assume": 2, "assert": 1}
)
