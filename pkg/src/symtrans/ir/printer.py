"""Canonical text form of a module (inverse of the parser)."""

from __future__ import annotations

from .nodes import BINOPS, CASTS, Instruction, Module
from .types import VOID

HEADER = "; symtrans module\n"


def format_instruction(ins: Instruction) -> str:
    op = ins.op
    lhs = f"%{ins.result} = " if ins.result is not None else ""
    a = ins.args
    if op in BINOPS:
        return f"{lhs}{op} {ins.ty} {a[0]}, {a[1]}"
    if op == "icmp":
        return f"{lhs}icmp {ins.pred} {ins.ty} {a[0]}, {a[1]}"
    if op in CASTS:
        return f"{lhs}{op} {ins.ty} {a[0]} to {ins.to_ty}"
    if op == "alloca":
        return f"{lhs}alloca {ins.ty}"
    if op == "load":
        return f"{lhs}load {ins.ty}, {a[0]}"
    if op == "store":
        return f"store {ins.ty} {a[0]}, {a[1]}"
    if op == "ptradd":
        return f"{lhs}ptradd {a[0]}, {a[1]}"
    if op == "phi":
        inc = ", ".join(f"[{v}, {l}]" for v, l in zip(a, ins.labels))
        return f"{lhs}phi {ins.ty} {inc}"
    if op == "call":
        args = ", ".join(f"{t} {v}" for t, v in zip(ins.arg_types, a))
        return f"{lhs}call {ins.ty} @{ins.callee}({args})"
    if op == "br":
        if a:
            return f"br {a[0]}, {ins.labels[0]}, {ins.labels[1]}"
        return f"br {ins.labels[0]}"
    if op == "ret":
        if ins.ty == VOID or ins.ty is None:
            return "ret void"
        return f"ret {ins.ty} {a[0]}"
    raise ValueError(f"cannot print opcode {op!r}")


def print_module(m: Module) -> str:
    out = [HEADER]
    for f in m.functions:
        params = ", ".join(f"%{n}: {t}" for n, t in f.params)
        out.append(f"\nfn @{f.name}({params}) -> {f.ret_ty} {{\n")
        for b in f.blocks:
            out.append(f"{b.label}:\n")
            for ins in b.instrs:
                out.append(f"  {format_instruction(ins)}\n")
        out.append("}\n")
    return "".join(out)
