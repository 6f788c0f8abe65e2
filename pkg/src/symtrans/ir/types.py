"""Type system of the mini-IR.

Scalars are fixed-width integers and an 8-byte pointer. Aggregates use a
packed layout (no padding). ``AbsType`` is the abstract counterpart of an
integer scalar; at run time it holds an ``AbstractValue`` and has no memory
footprint of its own (memory only ever sees the original concrete layout).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

INT_WIDTHS = (1, 8, 16, 32, 64)
POINTER_SIZE = 8


class IrType:
    """Base for all IR types."""

    __slots__ = ()

    @property
    def size(self) -> int:
        raise TypeError(f"type {self} has no memory size")

    @property
    def is_scalar(self) -> bool:
        return False


@dataclass(frozen=True)
class IntType(IrType):
    width: int

    def __post_init__(self):
        if self.width not in INT_WIDTHS:
            raise ValueError(f"unsupported integer width {self.width}")

    @property
    def size(self) -> int:
        return 1 if self.width == 1 else self.width // 8

    @property
    def mask(self) -> int:
        return (1 << self.width) - 1

    @property
    def is_scalar(self) -> bool:
        return True

    def __str__(self) -> str:
        return f"i{self.width}"


@dataclass(frozen=True)
class PtrType(IrType):
    @property
    def size(self) -> int:
        return POINTER_SIZE

    @property
    def is_scalar(self) -> bool:
        return True

    def __str__(self) -> str:
        return "ptr"


@dataclass(frozen=True)
class VoidType(IrType):
    def __str__(self) -> str:
        return "void"


@dataclass(frozen=True)
class AbsType(IrType):
    """alpha(base): abstract scalar type for a concrete integer type."""

    base: IntType

    @property
    def width(self) -> int:
        return self.base.width

    def __str__(self) -> str:
        return f"a.{self.base}"


@dataclass(frozen=True)
class ArrayType(IrType):
    elem: IrType
    count: int

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("array count must be non-negative")

    @property
    def size(self) -> int:
        return self.elem.size * self.count

    def offset_of(self, index: int) -> int:
        return self.elem.size * index

    def __str__(self) -> str:
        return f"[{self.count} x {self.elem}]"


@dataclass(frozen=True)
class RecordType(IrType):
    fields: tuple[IrType, ...]

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        out, pos = [], 0
        for f in self.fields:
            out.append(pos)
            pos += f.size
        return tuple(out)

    @property
    def size(self) -> int:
        return sum(f.size for f in self.fields)

    def offset_of(self, index: int) -> int:
        return self.offsets[index]

    def __str__(self) -> str:
        return "{" + ", ".join(str(f) for f in self.fields) + "}"


I1, I8, I16, I32, I64 = (IntType(w) for w in INT_WIDTHS)
PTR = PtrType()
VOID = VoidType()

_INTS = {w: IntType(w) for w in INT_WIDTHS}


def int_type(width: int) -> IntType:
    try:
        return _INTS[width]
    except KeyError:
        raise ValueError(f"unsupported integer width {width}") from None


def abs_type(width: int) -> AbsType:
    return AbsType(int_type(width))


def is_int(t: IrType) -> bool:
    return isinstance(t, IntType)


def is_abs(t: IrType) -> bool:
    return isinstance(t, AbsType)


def alpha(t: IrType) -> IrType:
    """Abstract counterpart of a concrete scalar; identity on everything else."""
    if isinstance(t, IntType):
        return AbsType(t)
    return t


def alpha_inv(t: IrType) -> IrType:
    if isinstance(t, AbsType):
        return t.base
    return t
