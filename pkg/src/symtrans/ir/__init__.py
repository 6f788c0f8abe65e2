"""The explicit-SSA mini-IR: types, instructions, text format, validation."""

from .nodes import (
    BINOPS,
    CASTS,
    COMMUTATIVE,
    DIVOPS,
    PREDICATES,
    Block,
    Const,
    Function,
    Instruction,
    Module,
    Reg,
    intrinsic_signature,
    split_domain_call,
)
from .parser import (
    IrError,
    ParseError,
    SsaError,
    TypeCheckError,
    ValidationError,
    parse_module,
    parse_module_unchecked,
)
from .printer import format_instruction, print_module
from .types import (
    I1,
    I8,
    I16,
    I32,
    I64,
    PTR,
    VOID,
    AbsType,
    ArrayType,
    IntType,
    IrType,
    PtrType,
    RecordType,
    abs_type,
    int_type,
)
from .validate import Diagnostic, dominators, validate

__all__ = [name for name in dir() if not name.startswith("_")]
