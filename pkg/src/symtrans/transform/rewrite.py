"""Rewrite a module according to a :class:`TaintMap`.

Abstract instructions become calls ``a_<op>.<domain>`` over ``a.iN``
operands; the domain library supplies their meaning at run time.
"""

from __future__ import annotations

from ..domains.base import get_domain
from ..ir.nodes import (
    BINOPS,
    CASTS,
    Block,
    Const,
    Function,
    Instruction,
    Module,
    Reg,
    split_domain_call,
)
from ..ir.types import I1, I32, PTR, VOID, AbsType, IntType, PtrType, alpha
from .propagate import ABS, C, TaintMap, TransformError

DIR_PREFIX = "__dir"


class _FunctionRewriter:
    def __init__(self, t: TaintMap, vname: str, domain: str, is_entry: bool, fn_types):
        self.t = t
        self.var = t.variants[vname]
        self.vn = vname
        self.f = self.var.source
        self.dom = domain
        self.is_entry = is_entry
        self.fn_types = fn_types  # variant name -> (param types, ret type)
        self.counter = 0
        self.desc = get_domain(domain)
        self.changed = vname != self.f.name
        # extra instructions to place before the terminator of a block
        self.tail: dict[str, list[Instruction]] = {}
        # (pred, succ) -> label of the edge block that now carries the edge
        self.edge_label: dict[tuple[str, str], list[str]] = {}

    # -- helpers --
    def fresh(self, stem: str) -> str:
        self.counter += 1
        return f"__{stem}{self.counter}"

    def level(self, v) -> int:
        return self.t.of(self.vn, v)

    def reg_type(self, name: str, ty):
        if isinstance(ty, IntType) and self.t.level.get((self.vn, name), C) != C:
            return alpha(ty)
        return ty

    def dcall(self, op: str, result, ty, args, arg_types) -> Instruction:
        return Instruction(
            "call", result=result, ty=ty, args=tuple(args),
            callee=f"a_{op}.{self.dom}", arg_types=tuple(arg_types),
        )

    def need(self, op: str) -> None:
        if not self.desc.supports(op):
            raise TransformError(f"domain {self.dom} does not support {op}", self.vn)

    def as_abstract(self, v, ty: IntType, out: list) -> Reg:
        """Operand ``v`` of concrete type ``ty`` as an ``a.iN`` value."""
        if self.level(v) != C:
            return v
        r = self.fresh("lift")
        out.append(self.dcall("lift", r, alpha(ty), [v], [ty]))
        return Reg(r)

    def as_concrete(self, v, ty: IntType, out: list):
        if self.level(v) == C:
            return v
        r = self.fresh("low")
        out.append(self.dcall("lower", r, ty, [v], [alpha(ty)]))
        return Reg(r)

    # -- driver --
    def rewrite(self) -> Function:
        f = self.f
        params = tuple(
            (p, alpha(ty) if lv != C and isinstance(ty, IntType) else ty)
            for (p, ty), lv in zip(f.params, self.var.params)
        )
        if params != f.params:
            self.changed = True
        ret_ty = self.fn_types[self.vn][1]
        if ret_ty != f.ret_ty:
            self.changed = True
        bodies: dict[str, list[Instruction]] = {}
        extra_blocks: dict[str, list[Block]] = {}
        for b in f.blocks:
            out: list[Instruction] = []
            for i, ins in enumerate(b.instrs):
                if ins.is_terminator:
                    term, blocks = self.terminator(b, ins, ret_ty)
                    bodies[b.label] = (out, term)
                    extra_blocks[b.label] = blocks
                else:
                    self.instruction(b.label, i, ins, out)
        blocks = []
        for b in f.blocks:
            out, term = bodies[b.label]
            instrs = [self.fix_phi(ins, b.label) if ins.op == "phi" else ins for ins in out]
            instrs += self.tail.get(b.label, [])
            instrs += term
            blocks.append(Block(b.label, tuple(instrs)))
            blocks.extend(extra_blocks[b.label])
        if not self.changed:
            return f
        return Function(self.vn, params, ret_ty, tuple(blocks))

    def fix_phi(self, ins: Instruction, label: str) -> Instruction:
        args, labels = [], []
        for v, pred in zip(ins.args, ins.labels):
            edges = self.edge_label.get((pred, label))
            if edges:
                for e in edges:
                    args.append(v)
                    labels.append(e)
            else:
                args.append(v)
                labels.append(pred)
        if labels == list(ins.labels):
            return ins
        self.changed = True
        return ins.replace(args=tuple(args), labels=tuple(labels))

    def instruction(self, label: str, index: int, ins: Instruction, out: list) -> None:
        op = ins.op
        res = ins.result
        lv = [self.level(a) for a in ins.args]
        vn = self.vn
        if op in BINOPS or op == "icmp" or op in CASTS:
            if isinstance(ins.ty, AbsType) or not any(lv):
                out.append(ins)
                return
            self.changed = True
            ty = ins.ty
            dop = f"icmp_{ins.pred}" if op == "icmp" else op
            self.need(dop)
            args = [self.as_abstract(a, ty, out) for a in ins.args]
            if op == "icmp":
                rty = alpha(I1)
            elif op in CASTS:
                rty = alpha(ins.to_ty)
            else:
                rty = alpha(ty)
            out.append(self.dcall(dop, res, rty, args, [alpha(ty)] * len(args)))
            return
        if op == "load":
            if (vn, label, index) in self.t.thaw_loads and isinstance(ins.ty, IntType):
                self.changed = True
                out.append(self.dcall("thaw", res, alpha(ins.ty), ins.args, [PTR]))
                return
            out.append(ins)
            return
        if op == "store":
            if isinstance(ins.ty, IntType) and lv[0]:
                self.changed = True
                v, p = ins.args
                out.append(Instruction(
                    "call", ty=VOID, args=(p, v), callee=f"a_freeze.{self.dom}",
                    arg_types=(PTR, alpha(ins.ty)),
                ))
                return
            out.append(ins)
            return
        if op == "phi":
            ty = ins.ty
            if isinstance(ty, IntType) and self.level(Reg(res)) != C:
                self.changed = True
                args = []
                for v, pred in zip(ins.args, ins.labels):
                    if self.level(v) == C:
                        tail = self.tail.setdefault(pred, [])
                        args.append(self.as_abstract(v, ty, tail))
                    else:
                        args.append(v)
                out.append(ins.replace(ty=alpha(ty), args=tuple(args)))
                return
            out.append(ins)
            return
        if op == "call":
            self.call(label, index, ins, lv, out)
            return
        out.append(ins)

    def call(self, label: str, index: int, ins: Instruction, lv: list[int], out: list) -> None:
        callee = ins.callee
        res = ins.result
        if split_domain_call(callee) is not None:
            out.append(ins)
            return
        target = self.t.calls.get((self.vn, label, index))
        if target is not None:
            ptys, rty = self.fn_types[target]
            args = []
            for a, pt, at in zip(ins.args, ptys, ins.arg_types):
                if isinstance(pt, AbsType) and not isinstance(at, AbsType):
                    args.append(self.as_abstract(a, at, out))
                else:
                    args.append(a)
            new = ins.replace(callee=target, ty=rty, args=tuple(args), arg_types=tuple(ptys))
            if new != ins:
                self.changed = True
            out.append(new)
            return
        head, _, _ = callee.partition(".")
        if head == "sym":
            self.changed = True
            out.append(self.dcall("sym", res, alpha(ins.ty), [], []))
            return
        if not any(lv):
            out.append(ins)
            return
        self.changed = True
        if head == "lower":
            (a,) = ins.args
            out.append(self.dcall("lower", res, ins.ty, [a], [alpha(ins.ty)]))
            return
        if head == "print":
            (a,) = ins.args
            low = self.as_concrete(a, ins.arg_types[0], out)
            out.append(ins.replace(args=(low,)))
            return
        if callee == "assert":
            out.append(self.dcall("assert", None, VOID, ins.args, [alpha(I1)]))
            return
        if callee == "assume":
            out.append(self.dcall("assume", None, VOID, [ins.args[0], Const(1)], [alpha(I1), I32]))
            return
        if callee == "choose":
            n = self.as_concrete(ins.args[0], I32, out)
            out.append(ins.replace(args=(n,)))
            return
        raise TransformError(f"cannot rewrite call to @{callee}", self.vn, label)

    def terminator(self, b: Block, ins: Instruction, ret_ty):
        """(terminator instructions, new edge blocks)."""
        if ins.op == "ret":
            if not ins.args:
                return [ins], []
            (v,) = ins.args
            lv = self.level(v)
            pre: list[Instruction] = []
            if isinstance(ret_ty, AbsType):
                if lv == C:
                    v = self.as_abstract(v, ret_ty.base, pre)
                    self.changed = True
                return pre + [ins.replace(ty=ret_ty, args=(v,))], []
            if lv != C:
                self.changed = True
                v = self.as_concrete(v, ins.ty, pre)
                return pre + [ins.replace(args=(v,))], []
            return [ins], []
        # br
        if len(ins.labels) == 1 or self.level(ins.args[0]) == C:
            return [ins], []
        self.changed = True
        c = ins.args[0]
        n = self.counter = self.counter + 1
        d = f"{DIR_PREFIX}{n}"
        dc = f"{DIR_PREFIX}c{n}"
        lt, lf = f"__{b.label}.t", f"__{b.label}.f"
        pre = [
            Instruction("call", result=d, ty=I32, args=(Const(2),), callee="choose", arg_types=(I32,)),
            Instruction("trunc", result=dc, ty=I32, args=(Reg(d),), to_ty=I1),
            Instruction("br", args=(Reg(dc),), labels=(lt, lf)),
        ]
        blocks = []
        for lbl, direction, target in ((lt, 1, ins.labels[0]), (lf, 0, ins.labels[1])):
            blocks.append(Block(lbl, (
                self.dcall("assume", None, VOID, [c, Const(direction)], [alpha(I1), I32]),
                Instruction("br", labels=(target,)),
            )))
            self.edge_label.setdefault((b.label, target), []).append(lbl)
        return pre, blocks


def _variant_types(t: TaintMap, entry: str):
    out = {}
    for name, var in t.variants.items():
        f = var.source
        ptys = tuple(
            alpha(ty) if lv != C and isinstance(ty, IntType) else ty
            for (_, ty), lv in zip(f.params, var.params)
        )
        rty = f.ret_ty
        if var.ret != C and isinstance(rty, IntType) and name != entry:
            rty = alpha(rty)
        out[name] = (ptys, rty)
    return out


def rewrite(m: Module, t: TaintMap, domain: str, entry: str = "main") -> Module:
    fn_types = _variant_types(t, entry)
    out = []
    changed = False
    order = {f.name: i for i, f in enumerate(m.functions)}
    for f in m.functions:
        names = [f.name]
        clone = f.name + ".abs"
        if clone in t.variants and t.variants[clone].source is f:
            names.append(clone)
        for vn in names:
            if vn not in t.variants:
                out.append(f)
                continue
            rw = _FunctionRewriter(t, vn, domain, vn == entry, fn_types)
            nf = rw.rewrite()
            changed |= nf is not f
            out.append(nf)
    if not changed:
        return m
    return Module(tuple(out))
