"""Value propagation: which registers must hold abstract values.

The analysis runs per *variant*: every function is analysed once with
concrete parameters (under its own name) and, when some call site passes a
non-concrete argument, once more as the clone ``<name>.abs`` whose
parameter taints join over all such call sites. Memory is tracked per
alloca site with a flow-insensitive points-to set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..ir.nodes import CASTS, BINOPS, Const, Function, Instruction, Module, Reg, split_domain_call
from ..ir.types import AbsType, IntType, PtrType

C, SUM, ABS = 0, 1, 2
LEVEL_NAMES = ("concrete", "toplevel-sum", "abstract")
TOP = None  # points-to set of a pointer we know nothing about
CLONE_SUFFIX = ".abs"


class TransformError(Exception):
    def __init__(self, message: str, function: str | None = None, block: str | None = None):
        where = "/".join(x for x in (function, block) if x)
        super().__init__(f"{where}: {message}" if where else message)
        self.function = function
        self.block = block


@dataclass
class Variant:
    name: str
    source: Function
    params: list[int]
    param_pts: list
    ret: int = C
    ret_pts: Optional[frozenset] = frozenset()


@dataclass
class TaintMap:
    """Fixpoint of the propagation.

    ``level`` maps (variant, register) to C, SUM or ABS; ``may_hold`` holds
    the alloca sites (variant, register) that may contain frozen abstract
    values; ``thaw_loads`` the (variant, block, index) of loads to rewrite;
    ``calls`` maps a call site to the variant it must call.
    """

    variants: dict[str, Variant] = field(default_factory=dict)
    level: dict[tuple[str, str], int] = field(default_factory=dict)
    pts: dict[tuple[str, str], Optional[frozenset]] = field(default_factory=dict)
    may_hold: set = field(default_factory=set)
    all_hold: bool = False
    thaw_loads: set = field(default_factory=set)
    calls: dict[tuple[str, str, int], str] = field(default_factory=dict)

    def of(self, variant: str, v) -> int:
        if isinstance(v, Const):
            return C
        return self.level.get((variant, v.name), C)

    def register_level(self, variant: str, reg: str) -> str:
        return LEVEL_NAMES[self.level.get((variant, reg), C)]

    def abstract_registers(self, variant: str) -> set[str]:
        return {r for (v, r), lv in self.level.items() if v == variant and lv != C}


def _union(a, b):
    if a is TOP or b is TOP:
        return TOP
    return a | b


def _phi_level(levels: list[int]) -> int:
    if all(lv == C for lv in levels):
        return C
    if all(lv == ABS for lv in levels):
        return ABS
    return SUM


def _has_abstract_params(f: Function) -> bool:
    return any(isinstance(t, AbsType) for _, t in f.params)


class _Analysis:
    def __init__(self, m: Module, entry: str):
        self.m = m
        self.fns = m.function_map()
        self.t = TaintMap()
        self.changed = True
        self.entry = entry

    def variant(self, fname: str, abstract: bool) -> Variant:
        name = fname + CLONE_SUFFIX if abstract else fname
        v = self.t.variants.get(name)
        if v is None:
            if abstract and name in self.fns:
                raise TransformError(f"clone name @{name} already defined")
            f = self.fns[fname]
            params = [ABS if isinstance(ty, AbsType) else C for _, ty in f.params]
            v = Variant(name, f, params, [frozenset() for _ in f.params])
            self.t.variants[name] = v
            self.changed = True
        return v

    def raise_level(self, vname: str, reg: str, lv: int) -> None:
        key = (vname, reg)
        if lv > self.t.level.get(key, C):
            self.t.level[key] = lv
            self.changed = True

    def raise_pts(self, vname: str, reg: str, p) -> None:
        key = (vname, reg)
        old = self.t.pts.get(key, frozenset())
        new = _union(old, p)
        if new != old:
            self.t.pts[key] = new
            self.changed = True

    def pts(self, vname: str, v):
        if isinstance(v, Const):
            return frozenset()
        return self.t.pts.get((vname, v.name), frozenset())

    def run(self) -> TaintMap:
        if self.entry in self.fns:
            self.variant(self.entry, False)
        for f in self.m.functions:
            # every function keeps its concrete variant
            self.variant(f.name, False)
        while self.changed:
            self.changed = False
            for v in list(self.t.variants.values()):
                self.visit(v)
        return self.t

    def visit(self, var: Variant) -> None:
        f = var.source
        vn = var.name
        for (p, ty), lv, pp in zip(f.params, var.params, var.param_pts):
            self.raise_level(vn, p, lv)
            if isinstance(ty, PtrType):
                self.raise_pts(vn, p, pp)
        for b in f.blocks:
            for i, ins in enumerate(b.instrs):
                self.transfer(var, b.label, i, ins)

    def transfer(self, var: Variant, label: str, index: int, ins: Instruction) -> None:
        vn = var.name
        t = self.t
        op = ins.op
        res = ins.result
        lv = [t.of(vn, a) for a in ins.args]
        if op in BINOPS or op in CASTS or op == "icmp":
            if op == "icmp" and isinstance(ins.ty, PtrType):
                if any(lv):
                    raise TransformError("abstract pointer comparison", vn, label)
                return
            self.raise_level(vn, res, ABS if any(lv) else C)
        elif op == "alloca":
            self.raise_pts(vn, res, frozenset({(vn, res)}))
        elif op == "ptradd":
            if any(lv):
                raise TransformError("abstract value used in address arithmetic", vn, label)
            self.raise_pts(vn, res, self.pts(vn, ins.args[0]))
        elif op == "load":
            if lv[0]:
                raise TransformError("abstract value used as an address", vn, label)
            p = self.pts(vn, ins.args[0])
            if isinstance(ins.ty, PtrType):
                self.raise_pts(vn, res, TOP)
                return
            if isinstance(ins.ty, AbsType):
                self.raise_level(vn, res, ABS)
                return
            holds = t.all_hold or (
                bool(t.may_hold) if p is TOP else bool(p & t.may_hold)
            )
            if holds:
                if (vn, label, index) not in t.thaw_loads:
                    t.thaw_loads.add((vn, label, index))
                    self.changed = True
                self.raise_level(vn, res, SUM)
        elif op == "store":
            if lv[1]:
                raise TransformError("abstract value used as an address", vn, label)
            if lv[0]:
                self._mark_hold(self.pts(vn, ins.args[1]))
        elif op == "phi":
            if isinstance(ins.ty, PtrType):
                p = frozenset()
                for a in ins.args:
                    p = _union(p, self.pts(vn, a))
                self.raise_pts(vn, res, p)
            elif isinstance(ins.ty, AbsType):
                self.raise_level(vn, res, ABS)
            else:
                self.raise_level(vn, res, _phi_level(lv))
        elif op == "call":
            self.transfer_call(var, label, index, ins, lv)
        elif op == "ret":
            if ins.args:
                if lv[0] > var.ret:
                    var.ret = max(var.ret, lv[0])
                    self.changed = True
                if isinstance(ins.ty, PtrType):
                    new = _union(var.ret_pts, self.pts(vn, ins.args[0]))
                    if new != var.ret_pts:
                        var.ret_pts = new
                        self.changed = True

    def _mark_hold(self, p) -> None:
        t = self.t
        if p is TOP:
            if not t.all_hold:
                t.all_hold = True
                self.changed = True
        elif not p <= t.may_hold:
            t.may_hold |= p
            self.changed = True

    def transfer_call(self, var, label, index, ins: Instruction, lv: list[int]) -> None:
        vn = var.name
        callee = ins.callee
        res = ins.result
        sd = split_domain_call(callee)
        if sd is not None:
            op = sd[0]
            if op == "freeze":
                self._mark_hold(self.pts(vn, ins.args[0]))
            if res is not None:
                self.raise_level(vn, res, ABS if isinstance(ins.ty, AbsType) else C)
            return
        if callee in self.fns:
            f = self.fns[callee]
            abstract = any(lv) and not _has_abstract_params(f)
            target = self.variant(callee, abstract)
            key = (vn, label, index)
            if self.t.calls.get(key) != target.name:
                self.t.calls[key] = target.name
                self.changed = True
            for k, ((_, pty), a) in enumerate(zip(f.params, ins.args)):
                if lv[k] > target.params[k]:
                    target.params[k] = lv[k]
                    self.changed = True
                if isinstance(pty, PtrType):
                    new = _union(target.param_pts[k], self.pts(vn, a))
                    if new != target.param_pts[k]:
                        target.param_pts[k] = new
                        self.changed = True
            if res is not None:
                if isinstance(ins.ty, PtrType):
                    self.raise_pts(vn, res, target.ret_pts)
                else:
                    self.raise_level(vn, res, ABS if target.ret else C)
            return
        head = callee.partition(".")[0]
        if head == "sym":
            self.raise_level(vn, res, ABS)
        # choose, lower, print, assume, assert produce concrete results (or none)


def propagate_values(m: Module, entry: str = "main") -> TaintMap:
    """Least fixpoint of the abstractness facts for ``m``."""
    return _Analysis(m, entry).run()
