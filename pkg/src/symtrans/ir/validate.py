"""Structural, type and SSA checks for modules."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .nodes import (
    BINOPS,
    CASTS,
    PREDICATES,
    Const,
    Function,
    Instruction,
    Module,
    Reg,
    intrinsic_signature,
    split_domain_call,
)
from .types import (
    I1,
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
)


@dataclass(frozen=True)
class Diagnostic:
    function: str
    block: Optional[str]
    index: Optional[int]
    rule: str
    message: str

    def __str__(self) -> str:
        where = f"@{self.function}"
        if self.block is not None:
            where += f"/{self.block}"
            if self.index is not None:
                where += f"#{self.index}"
        return f"{where}: {self.rule}: {self.message}"


def dominators(f: Function) -> dict[str, set[str]]:
    """Dominator sets of the blocks reachable from the entry block."""
    succ = {b.label: [s for s in b.successors()] for b in f.blocks}
    entry = f.entry.label
    order, seen, stack = [], {entry}, [entry]
    while stack:
        n = stack.pop()
        order.append(n)
        for s in succ.get(n, ()):
            if s in succ and s not in seen:
                seen.add(s)
                stack.append(s)
    preds: dict[str, list[str]] = {n: [] for n in order}
    for n in order:
        for s in succ[n]:
            if s in preds:
                preds[s].append(n)
    dom = {n: set(order) for n in order}
    dom[entry] = {entry}
    changed = True
    while changed:
        changed = False
        for n in order:
            if n == entry:
                continue
            ps = [dom[p] for p in preds[n]]
            new = set.intersection(*ps) if ps else set()
            new = new | {n}
            if new != dom[n]:
                dom[n] = new
                changed = True
    return dom


def _sized(t: IrType) -> bool:
    if isinstance(t, (IntType, PtrType)):
        return True
    if isinstance(t, ArrayType):
        return _sized(t.elem)
    if isinstance(t, RecordType):
        return all(_sized(x) for x in t.fields)
    return False


class _FunctionChecker:
    def __init__(self, module: Module, f: Function, out: list[Diagnostic]):
        self.m = module
        self.funcs = module.function_map()
        self.f = f
        self.out = out
        self.reg_types: dict[str, IrType] = {}
        self.defs: dict[str, tuple[str, int]] = {}

    def diag(self, block, index, rule, msg):
        self.out.append(Diagnostic(self.f.name, block, index, rule, msg))

    def run(self):
        f = self.f
        if not f.blocks:
            self.diag(None, None, "structure.empty-function", "function has no blocks")
            return
        labels = [b.label for b in f.blocks]
        if len(set(labels)) != len(labels):
            self.diag(None, None, "structure.duplicate-label", "duplicate block label")
        label_set = set(labels)

        for name, t in f.params:
            if name in self.defs:
                self.diag(None, None, "ssa.multiple-definitions", f"%{name} defined twice")
            self.defs[name] = (f.entry.label, -1)
            self.reg_types[name] = t
            if t == VOID or not (t.is_scalar or isinstance(t, AbsType)):
                self.diag(None, None, "type.param", f"parameter %{name} has non-scalar type {t}")

        for b in f.blocks:
            if not b.instrs:
                self.diag(b.label, None, "structure.missing-terminator", "empty block")
                continue
            if not b.instrs[-1].is_terminator:
                self.diag(b.label, len(b.instrs) - 1, "structure.missing-terminator",
                          "missing terminator")
            seen_non_phi = False
            for i, ins in enumerate(b.instrs):
                if ins.is_terminator and i != len(b.instrs) - 1:
                    self.diag(b.label, i, "structure.terminator-mid-block",
                              f"{ins.op} in the middle of a block")
                if ins.op == "phi":
                    if seen_non_phi:
                        self.diag(b.label, i, "structure.phi-not-at-head",
                                  "phi after a non-phi instruction")
                else:
                    seen_non_phi = True
                if ins.result is not None:
                    if ins.result in self.defs:
                        self.diag(b.label, i, "ssa.multiple-definitions",
                                  f"%{ins.result} defined more than once")
                    else:
                        self.defs[ins.result] = (b.label, i)
                        rt = ins.result_type
                        if rt is not None:
                            self.reg_types[ins.result] = rt
                for l in ins.labels if ins.op == "br" else ():
                    if l not in label_set:
                        self.diag(b.label, i, "structure.unknown-label", f"unknown label {l!r}")

        preds = f.predecessors()
        if preds.get(f.entry.label):
            self.diag(f.entry.label, None, "structure.entry-has-predecessors",
                      "entry block must not be a branch target")

        for b in f.blocks:
            for i, ins in enumerate(b.instrs):
                self.check_types(b.label, i, ins)
                if ins.op == "phi":
                    want = sorted(preds.get(b.label, []))
                    got = sorted(ins.labels)
                    if want != got:
                        self.diag(b.label, i, "structure.phi-incoming",
                                  f"phi incoming {got} does not match predecessors {want}")

        self.check_dominance(preds)

    # -- types --
    def operand(self, blk, i, v, want: IrType, what="operand"):
        if isinstance(v, Const):
            if isinstance(want, AbsType):
                self.diag(blk, i, "type.abstract-constant",
                          f"{what}: constant where {want} is required")
            elif not (isinstance(want, IntType) or want == PTR):
                self.diag(blk, i, "type.mismatch", f"{what}: constant of type {want}")
            return
        if v.name not in self.reg_types:
            if v.name not in self.defs:
                self.diag(blk, i, "ssa.undefined", f"use of undefined register %{v.name}")
            return
        got = self.reg_types[v.name]
        if got != want:
            self.diag(blk, i, "type.mismatch",
                      f"{what} %{v.name} has type {got}, expected {want}")

    def check_types(self, blk, i, ins: Instruction):
        op, a = ins.op, ins.args
        if op in BINOPS or op == "icmp":
            ok_ty = isinstance(ins.ty, IntType) or (op == "icmp" and ins.ty == PTR)
            if not ok_ty:
                self.diag(blk, i, "type.signature", f"{op} requires integer operands, got {ins.ty}")
                return
            if op == "icmp" and ins.pred not in PREDICATES:
                self.diag(blk, i, "type.signature", f"bad predicate {ins.pred}")
            for v in a:
                self.operand(blk, i, v, ins.ty)
        elif op in CASTS:
            if not isinstance(ins.ty, IntType) or not isinstance(ins.to_ty, IntType):
                self.diag(blk, i, "type.signature", f"{op} requires integer types")
                return
            grow = ins.to_ty.width > ins.ty.width
            if (op == "trunc") == grow or ins.to_ty.width == ins.ty.width:
                self.diag(blk, i, "type.signature",
                          f"{op} from {ins.ty} to {ins.to_ty} has wrong direction")
            self.operand(blk, i, a[0], ins.ty)
        elif op == "alloca":
            if not _sized(ins.ty):
                self.diag(blk, i, "type.signature", f"alloca of unsized type {ins.ty}")
        elif op == "load":
            if not (isinstance(ins.ty, IntType) or ins.ty == PTR):
                self.diag(blk, i, "type.signature", f"load of non-scalar type {ins.ty}")
            self.operand(blk, i, a[0], PTR, "address")
        elif op == "store":
            if not (isinstance(ins.ty, IntType) or ins.ty == PTR):
                self.diag(blk, i, "type.signature", f"store of non-scalar type {ins.ty}")
                return
            self.operand(blk, i, a[0], ins.ty, "stored value")
            self.operand(blk, i, a[1], PTR, "address")
        elif op == "ptradd":
            self.operand(blk, i, a[0], PTR, "base")
            self.operand(blk, i, a[1], I64, "offset")
        elif op == "phi":
            if ins.ty in (None, VOID):
                self.diag(blk, i, "type.signature", "phi of void type")
                return
            for v in a:
                self.operand(blk, i, v, ins.ty, "incoming value")
        elif op == "br":
            if a:
                self.operand(blk, i, a[0], I1, "branch condition")
        elif op == "ret":
            want = self.f.ret_ty
            if want == VOID:
                if a:
                    self.diag(blk, i, "type.signature", "value returned from void function")
            elif not a:
                self.diag(blk, i, "type.signature", "missing return value")
            else:
                if ins.ty != want:
                    self.diag(blk, i, "type.mismatch", f"ret {ins.ty} in function returning {want}")
                self.operand(blk, i, a[0], want, "return value")
        elif op == "call":
            self.check_call(blk, i, ins)
        if ins.result is not None and ins.result_type in (None, VOID):
            self.diag(blk, i, "type.signature", "void value assigned to a register")

    def check_call(self, blk, i, ins: Instruction):
        name = ins.callee
        if len(ins.args) != len(ins.arg_types):
            self.diag(blk, i, "type.signature", "argument/type count mismatch")
            return
        dom = split_domain_call(name)
        if dom is not None:
            params, ret = _domain_signature(dom[0], ins)
            if params is None:
                self.diag(blk, i, "type.signature", f"bad domain call @{name}: {ret}")
                return
        else:
            sig = intrinsic_signature(name)
            if sig is None:
                callee = self.funcs.get(name)
                if callee is None:
                    self.diag(blk, i, "structure.unknown-function", f"call to unknown @{name}")
                    return
                sig = (tuple(t for _, t in callee.params), callee.ret_ty)
            params, ret = sig
        if len(params) != len(ins.args):
            self.diag(blk, i, "type.signature",
                      f"@{name} expects {len(params)} arguments, got {len(ins.args)}")
            return
        for k, (want, got_t, v) in enumerate(zip(params, ins.arg_types, ins.args)):
            if got_t != want:
                self.diag(blk, i, "type.mismatch",
                          f"argument {k} of @{name}: declared {got_t}, expected {want}")
            self.operand(blk, i, v, want, f"argument {k}")
        if ins.ty != ret:
            self.diag(blk, i, "type.mismatch", f"@{name} returns {ret}, call declares {ins.ty}")

    # -- SSA dominance --
    def check_dominance(self, preds):
        dom = dominators(self.f)

        def dominates(d, u_blk, u_idx):
            db, di = d
            if u_blk not in dom:
                return True  # unreachable use
            if db == u_blk:
                return di < u_idx
            return db in dom[u_blk]

        for b in self.f.blocks:
            for i, ins in enumerate(b.instrs):
                if ins.op == "phi":
                    for v, l in zip(ins.args, ins.labels):
                        if isinstance(v, Reg):
                            d = self.defs.get(v.name)
                            if d is not None and l in dom and not dominates(d, l, len(self.f.block(l).instrs)):
                                self.diag(b.label, i, "ssa.not-dominated",
                                          f"%{v.name} does not dominate edge from {l}")
                    continue
                for name in ins.uses():
                    d = self.defs.get(name)
                    if d is None:
                        # reported by the type pass if it looked at the operand
                        if not any(x.rule == "ssa.undefined" and x.block == b.label and x.index == i
                                   for x in self.out):
                            self.diag(b.label, i, "ssa.undefined",
                                      f"use of undefined register %{name}")
                    elif not dominates(d, b.label, i):
                        self.diag(b.label, i, "ssa.not-dominated",
                                  f"definition of %{name} does not dominate this use")


def _domain_signature(op: str, ins: Instruction):
    """(param types, return type) of a domain call, derived from its declared
    types; returns (None, reason) on malformed calls."""
    ats, ret = ins.arg_types, ins.ty
    if op in BINOPS:
        if len(ats) != 2 or not isinstance(ats[0], AbsType):
            return None, "expects two abstract operands"
        return (ats[0], ats[0]), ats[0]
    if op.startswith("icmp_"):
        if op[5:] not in PREDICATES:
            return None, "unknown predicate"
        if len(ats) != 2 or not isinstance(ats[0], AbsType):
            return None, "expects two abstract operands"
        return (ats[0], ats[0]), AbsType(I1)
    if op in CASTS:
        if len(ats) != 1 or not isinstance(ats[0], AbsType) or not isinstance(ret, AbsType):
            return None, "expects an abstract operand and result"
        grow = ret.width > ats[0].width
        if (op == "trunc") == grow or ret.width == ats[0].width:
            return None, "cast has wrong direction"
        return (ats[0],), ret
    if op == "lift":
        if len(ats) != 1 or not isinstance(ats[0], IntType):
            return None, "lifts one integer"
        return (ats[0],), AbsType(ats[0])
    if op == "lower":
        if len(ats) != 1 or not isinstance(ats[0], AbsType):
            return None, "lowers one abstract value"
        return (ats[0],), ats[0].base
    if op == "sym":
        if not isinstance(ret, AbsType):
            return None, "must produce an abstract integer"
        return (), ret
    if op == "freeze":
        if len(ats) != 2 or not isinstance(ats[1], AbsType):
            return None, "expects (ptr, abstract value)"
        return (PTR, ats[1]), VOID
    if op == "thaw":
        if not isinstance(ret, AbsType):
            return None, "must produce an abstract integer"
        return (PTR,), ret
    if op == "assume":
        return (AbsType(I1), I32), VOID
    if op == "assert":
        return (AbsType(I1),), VOID
    return None, f"unknown domain operation {op!r}"


def validate(m: Module) -> list[Diagnostic]:
    """Empty list iff the module is well formed."""
    out: list[Diagnostic] = []
    names = [f.name for f in m.functions]
    for n in set(names):
        if names.count(n) > 1:
            out.append(Diagnostic(n, None, None, "structure.duplicate-function",
                                  "function defined more than once"))
    for f in m.functions:
        if split_domain_call(f.name) is not None or intrinsic_signature(f.name) is not None:
            out.append(Diagnostic(f.name, None, None, "structure.reserved-name",
                                  "function name is reserved for intrinsics"))
        _FunctionChecker(m, f, out).run()
    return out
