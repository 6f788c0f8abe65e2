"""Closure-compiled interpreter for the mini-IR.

Each block is compiled once into a list of closures ``op(state, frame)``.
A closure returns ``None`` to fall through to the next instruction or one
of the control markers below after changing frames/blocks itself. Stops,
traps and infeasible paths are raised as :class:`Halt`.

The core knows nothing about particular domains: ``a_<op>.<domain>`` calls
are bound to the registered :class:`DomainDescriptor` at compile time and
all solver interaction goes through the :class:`Host`.
"""

from __future__ import annotations

from typing import Any, Callable, Optional

from .. import bitops
from ..bitops import DivisionByZero
from ..domains.base import (
    CONCRETE,
    AbstractValue,
    DomainError,
    Infeasible,
    LowerRefused,
    get_domain,
    synthesize_lifter,
)
from ..ir.nodes import (
    BINOPS,
    CASTS,
    DIVOPS,
    Const,
    Function,
    Instruction,
    Module,
    Reg,
    split_domain_call,
)
from ..ir.types import AbsType, IntType, PtrType, int_type
from .state import (
    OFF_MASK,
    SEG_SHIFT,
    Frame,
    Halt,
    MachineState,
    Outcome,
    StateImage,
    VmError,
)

JUMP = 1
CALL = 2
RET = 3

DEFAULT_FUEL = 1_000_000
CLONE_SUFFIX = ".abs"


def base_name(fname: str) -> str:
    return fname[: -len(CLONE_SUFFIX)] if fname.endswith(CLONE_SUFFIX) else fname


def is_generated_choice(result: Optional[str]) -> bool:
    return result is not None and result.startswith("__dir")


class Host:
    """Embedder callbacks. The defaults run a single path: chooses follow
    ``trail`` (stopping when it runs out), inputs come from ``pins`` or
    become fresh symbols, and assumes/asserts are decided through the
    domain context."""

    pin_mode = "lift"  # or "concrete"

    def __init__(self, trail=None, pins=None, pin_mode: str | None = None):
        self.trail = list(trail) if trail is not None else None
        self.pins = pins
        if pin_mode is not None:
            self.pin_mode = pin_mode

    def choose(self, st: MachineState, site: str, arity: int, generated: bool) -> Optional[int]:
        if self.trail is None:
            return None
        k = len(st.trail)
        if k >= len(self.trail):
            return None
        return self.trail[k]

    def sym(self, st: MachineState, index: int, t: IntType) -> Optional[int]:
        if self.pins is None:
            return None
        if callable(self.pins):
            return self.pins(index, t)
        if index < len(self.pins):
            return self.pins[index] & t.mask
        return None

    def on_assume(self, st: MachineState, dom: str) -> Optional[bool]:
        status = st.ctx[dom].feasible()
        if status == "unknown":
            return None
        return status == "sat"

    def on_assert(self, st: MachineState, dom: str, h: int) -> str:
        """"holds" when the assertion cannot fail; "continue" to carry on
        under the assumption that it held (after recording a failure)."""
        status, model = st.ctx[dom].check_assert(h)
        if status == "fails":
            raise Halt("assert", "assertion may fail", model=model)
        if status == "unknown":
            raise Halt("unknown", "assertion undecided")
        return "holds"

    def on_division(self, st: MachineState, dom: str, h: int) -> str:
        """Same protocol as :meth:`on_assert` for a possibly-zero divisor."""
        status, model = st.ctx[dom].division(h)
        if status == "may-trap":
            raise Halt("trap", "division by zero", model=model)
        if status == "unknown":
            raise Halt("unknown", "divisor undecided")
        return "holds"


class CompiledFunction:
    def __init__(self, fn: Function):
        self.fn = fn
        self.name = fn.name
        self.base = base_name(fn.name)
        self.code: dict[str, list] = {}
        self.edges: dict[tuple[str, str], tuple] = {}
        self.consts: dict[int, int] = {}
        self.registers: list[str] = [p for p, _ in fn.params]
        self.entry = fn.blocks[0].label


class Machine:
    """Executes one module. ``stores`` maps domain names to the per-worker
    store each new domain context is created against."""

    def __init__(
        self,
        module: Module,
        stores: dict[str, Any] | None = None,
        host: Host | None = None,
        fuel: int = DEFAULT_FUEL,
    ):
        self.module = module
        self.stores = dict(stores or {})
        self.host = host or Host()
        self.fuel = fuel
        self.funcs: dict[str, CompiledFunction] = {}
        self.fn_defs = module.function_map()
        self.domains: dict[str, Any] = {}
        for f in module.functions:
            for _, _, ins in f.instructions():
                if ins.op == "call":
                    sd = split_domain_call(ins.callee)
                    if sd and sd[1] not in self.domains:
                        self.domains[sd[1]] = get_domain(sd[1])
        for f in module.functions:
            self.funcs[f.name] = self._compile(f)

    # -- state management --
    def start(self, entry: str = "main", args: tuple = ()) -> MachineState:
        st = MachineState()
        for name, d in self.domains.items():
            st.ctx[name] = d.new_context(self.stores.get(name))
        cf = self.funcs.get(entry)
        if cf is None:
            raise VmError(f"no function @{entry}")
        if len(args) != len(cf.fn.params):
            raise VmError(f"@{entry} expects {len(cf.fn.params)} arguments")
        regs = dict(cf.consts)
        for (p, _), v in zip(cf.fn.params, args):
            regs[p] = v
        st.frames.append(Frame(cf, regs, cf.entry, cf.code[cf.entry]))
        return st

    def snapshot(self, st: MachineState) -> StateImage:
        frames = []
        for fr in st.frames:
            regs = fr.regs
            frames.append((
                fr.fn.name,
                tuple((r, regs[r]) for r in fr.fn.registers if r in regs),
                fr.block,
                fr.ip,
                fr.ret_key,
                tuple(fr.segs),
            ))
        return StateImage(
            frames=tuple(frames),
            mem=tuple((s, bytes(b)) for s, b in sorted(st.mem.items())),
            shadow=tuple((s, tuple(sorted(e.items()))) for s, e in sorted(st.shadow.items()) if e),
            next_seg=st.next_seg,
            output=tuple(st.output),
            trail=tuple(st.trail),
            decisions=tuple(st.decisions),
            nsyms=st.nsyms,
            ctx=tuple((name, c.snapshot()) for name, c in sorted(st.ctx.items())),
            steps=st.steps,
            result=st.result,
            owner=id(self.stores) if self.stores else None,
        )

    def restore(self, img: StateImage) -> MachineState:
        st = MachineState()
        for fname, regs, block, ip, ret_key, segs in img.frames:
            cf = self.funcs[fname]
            r = dict(cf.consts)
            r.update(regs)
            st.frames.append(Frame(cf, r, block, cf.code[block], ip, ret_key, list(segs)))
        st.mem = {s: bytearray(b) for s, b in img.mem}
        st.shadow = {s: dict(e) for s, e in img.shadow}
        st.next_seg = img.next_seg
        st.output = list(img.output)
        st.trail = list(img.trail)
        st.decisions = list(img.decisions)
        st.nsyms = img.nsyms
        for name, cimg in img.ctx:
            c = self.domains[name].new_context(self.stores.get(name))
            c.restore(cimg)
            st.ctx[name] = c
        st.steps = img.steps
        st.result = img.result
        return st

    # -- execution --
    def run(self, st: MachineState, choice: Optional[int] = None) -> Outcome:
        """Run until exit, a stop or a fault. ``choice`` answers the pending
        ``@choose`` when resuming from a choice stop."""
        if st.finished:
            return st.result
        st.pending = choice
        st.result = None
        frames = st.frames
        while True:
            fr = frames[-1]
            code = fr.code
            ip = fr.ip
            try:
                while True:
                    r = code[ip](st, fr)
                    if r is None:
                        ip += 1
                        continue
                    if r == CALL:
                        fr.ip = ip + 1
                    break
            except Halt as h:
                fr.ip = ip
                st.result = _outcome(h)
                return st.result
            except DivisionByZero:
                fr.ip = ip
                st.result = Outcome("trap", detail="division by zero")
                return st.result
            if r == RET and not frames:
                return st.result

    def step(self, st: MachineState, choice: Optional[int] = None) -> Optional[Outcome]:
        """Execute exactly one instruction. Returns the outcome once the run
        has stopped, ``None`` while it can continue."""
        if st.finished:
            return st.result
        if choice is not None:
            st.pending = choice
        st.result = None
        fr = st.frames[-1]
        try:
            r = fr.code[fr.ip](st, fr)
        except Halt as h:
            st.result = _outcome(h)
            return st.result
        except DivisionByZero:
            st.result = Outcome("trap", detail="division by zero")
            return st.result
        if r is None or r == CALL:
            fr.ip += 1
        if r == RET and not st.frames:
            return st.result
        return None

    def execute(self, entry: str = "main", args: tuple = ()) -> tuple[MachineState, Outcome]:
        st = self.start(entry, args)
        return st, self.run(st)

    # -- compilation --
    def _compile(self, f: Function) -> CompiledFunction:
        cf = CompiledFunction(f)
        seen = set(cf.registers)
        for b in f.blocks:
            for ins in b.instrs:
                if ins.result is not None and ins.result not in seen:
                    seen.add(ins.result)
                    cf.registers.append(ins.result)
                for a in ins.args:
                    if isinstance(a, Const):
                        cf.consts[a.value] = a.value
        for b in f.blocks:
            for succ in b.successors():
                moves = []
                for phi in f.block(succ).phis():
                    for (v, lbl) in zip(phi.args, phi.labels):
                        if lbl == b.label:
                            moves.append((phi.result, _key(v)))
                            break
                cf.edges[(b.label, succ)] = tuple(moves)
        for b in f.blocks:
            code = []
            for i, ins in enumerate(b.instrs):
                if ins.op == "phi":
                    continue
                code.append(self._compile_ins(cf, b.label, i, ins))
            cf.code[b.label] = code
        return cf

    def _jump(self, cf: CompiledFunction, src: str, dst: str) -> Callable:
        moves = cf.edges.get((src, dst), ())
        fuel = self.fuel
        code_of = cf.code

        if not moves:
            def jump(st, fr):
                st.steps += 1
                if st.steps > fuel:
                    raise Halt("fuel", "step budget exhausted")
                fr.block = dst
                fr.code = code_of[dst]
                fr.ip = 0
                return JUMP
        else:
            dsts = tuple(d for d, _ in moves)
            srcs = tuple(s for _, s in moves)

            def jump(st, fr):
                st.steps += 1
                if st.steps > fuel:
                    raise Halt("fuel", "step budget exhausted")
                regs = fr.regs
                vals = [regs[s] for s in srcs]
                for d, v in zip(dsts, vals):
                    regs[d] = v
                fr.block = dst
                fr.code = code_of[dst]
                fr.ip = 0
                return JUMP
        return jump

    def _compile_ins(self, cf: CompiledFunction, label: str, index: int, ins: Instruction) -> Callable:
        op = ins.op
        res = ins.result
        if op in BINOPS:
            w = ins.ty.width
            f2 = bitops.make_binop(op, w)
            ka, kb = _key(ins.args[0]), _key(ins.args[1])

            def binop(st, fr):
                regs = fr.regs
                regs[res] = f2(regs[ka], regs[kb])
            return binop
        if op == "icmp":
            ka, kb = _key(ins.args[0]), _key(ins.args[1])
            w = 64 if isinstance(ins.ty, PtrType) else ins.ty.width
            fc = bitops.make_icmp(ins.pred, w)

            def icmp(st, fr):
                regs = fr.regs
                regs[res] = fc(regs[ka], regs[kb])
            return icmp
        if op in CASTS:
            ka = _key(ins.args[0])
            fc = bitops.make_cast(op, ins.ty.width, ins.to_ty.width)

            def cast(st, fr):
                regs = fr.regs
                regs[res] = fc(regs[ka])
            return cast
        if op == "alloca":
            size = ins.ty.size

            def alloca(st, fr):
                seg = st.next_seg
                st.next_seg += 1
                st.mem[seg] = bytearray(size)
                fr.segs.append(seg)
                fr.regs[res] = seg << SEG_SHIFT
            return alloca
        if op == "load":
            kp = _key(ins.args[0])
            size = ins.ty.size

            def load(st, fr):
                buf, seg, off = _access(st, fr.regs[kp], size)
                sh = st.shadow.get(seg)
                if sh and _overlapping(sh, off, size):
                    raise Halt("trap", "plain load of a frozen abstract value")
                fr.regs[res] = int.from_bytes(buf[off:off + size], "little")
            return load
        if op == "store":
            kv, kp = _key(ins.args[0]), _key(ins.args[1])
            size = ins.ty.size

            def store(st, fr):
                regs = fr.regs
                buf, seg, off = _access(st, regs[kp], size)
                sh = st.shadow.get(seg)
                if sh:
                    _evict(sh, off, size)
                buf[off:off + size] = regs[kv].to_bytes(size, "little")
            return store
        if op == "ptradd":
            kp, ko = _key(ins.args[0]), _key(ins.args[1])
            m64 = (1 << 64) - 1

            def ptradd(st, fr):
                regs = fr.regs
                regs[res] = (regs[kp] + regs[ko]) & m64
            return ptradd
        if op == "br":
            if len(ins.labels) == 1:
                return self._jump(cf, label, ins.labels[0])
            kc = _key(ins.args[0])
            jt = self._jump(cf, label, ins.labels[0])
            jf = self._jump(cf, label, ins.labels[1])
            site_t = (cf.base, label, 1)
            site_f = (cf.base, label, 0)

            def cbr(st, fr):
                if fr.regs[kc]:
                    st.decisions.append(site_t)
                    return jt(st, fr)
                st.decisions.append(site_f)
                return jf(st, fr)
            return cbr
        if op == "ret":
            kv = _key(ins.args[0]) if ins.args else None

            def ret(st, fr):
                value = fr.regs[kv] if kv is not None else None
                st.frames.pop()
                for seg in fr.segs:
                    st.mem.pop(seg, None)
                    st.shadow.pop(seg, None)
                if not st.frames:
                    if isinstance(value, AbstractValue):
                        if value.tag != CONCRETE:
                            raise Halt("trap", "abstract value returned from the entry function")
                        value = value.payload
                    st.result = Outcome("exit", value=value if value is not None else 0)
                    return RET
                caller = st.frames[-1]
                if fr.ret_key is not None:
                    caller.regs[fr.ret_key] = value
                return RET
            return ret
        if op == "call":
            return self._compile_call(cf, label, index, ins)
        raise VmError(f"cannot execute opcode {op}")

    def _compile_call(self, cf: CompiledFunction, label: str, index: int, ins: Instruction) -> Callable:
        callee = ins.callee
        res = ins.result
        keys = tuple(_key(a) for a in ins.args)
        sd = split_domain_call(callee)
        if sd is not None:
            return self._compile_domain_call(cf, label, index, ins, sd[0], sd[1], keys)
        host = self.host
        if callee == "choose":
            (kn,) = keys
            site = f"{cf.name}:{label}:{index}"
            generated = is_generated_choice(res)
            base = cf.base

            def choose(st, fr):
                n = fr.regs[kn]
                v = st.pending
                if v is not None:
                    st.pending = None
                else:
                    v = host.choose(st, site, n, generated)
                    if v is None:
                        raise Halt("choice", site, site=site, arity=n)
                if not 0 <= v < n:
                    raise Halt("trap", f"choice {v} outside 0..{n - 1}")
                st.trail.append((site, v, n))
                if not generated:
                    st.decisions.append((base, label, "choose", v))
                if res is not None:
                    fr.regs[res] = v
            return choose
        if callee == "assume":
            (kc,) = keys

            def assume(st, fr):
                if not fr.regs[kc]:
                    raise Halt("infeasible", "assumption is false", trivial=True)
            return assume
        if callee == "assert":
            (kc,) = keys

            def assert_(st, fr):
                if not fr.regs[kc]:
                    raise Halt("assert", "assertion failed")
            return assert_
        head, _, suffix = callee.partition(".")
        if head == "lower":
            (ka,) = keys

            def lower_id(st, fr):
                fr.regs[res] = fr.regs[ka]
            return lower_id
        if head == "print":
            (ka,) = keys
            w = int(suffix[1:])

            def print_(st, fr):
                st.output.append(str(bitops.to_signed(fr.regs[ka], w)))
            return print_
        if head == "sym":
            t = int_type(int(suffix[1:]))

            def sym_concrete(st, fr):
                idx = st.nsyms
                st.nsyms += 1
                v = host.sym(st, idx, t)
                if v is None:
                    raise VmError(f"input {idx} has no value in a concrete run")
                fr.regs[res] = v & t.mask
            return sym_concrete
        # user function
        if callee not in self.fn_defs:
            raise VmError(f"call to unknown function @{callee}")
        funcs = self.funcs

        def call(st, fr):
            target = funcs[callee]
            regs = dict(target.consts)
            caller = fr.regs
            for (p, _), k in zip(target.fn.params, keys):
                regs[p] = caller[k]
            st.frames.append(Frame(target, regs, target.entry, target.code[target.entry], 0, res))
            return CALL
        return call

    def _compile_domain_call(self, cf, label, index, ins, op, dom, keys) -> Callable:
        d = self.domains[dom]
        host = self.host
        res = ins.result
        if op in BINOPS or op.startswith("icmp_"):
            at = ins.arg_types[0]
            lifter = synthesize_lifter(op, at.width, d).dispatch
            ka, kb = keys
            if op in DIVOPS:
                def dom_div(st, fr):
                    regs = fr.regs
                    y = regs[kb]
                    if y.tag != CONCRETE:
                        ctx = st.ctx[dom]
                        if host.on_division(st, dom, y.payload) != "holds":
                            if not ctx.guard_nonzero(y.payload):
                                raise Halt("infeasible", "divisor is always zero", trivial=True, where="division")
                            _recheck(host, st, dom, "division")
                    regs[res] = lifter(st.ctx[dom], regs[ka], y)
                return dom_div

            def dom_bin(st, fr):
                regs = fr.regs
                regs[res] = lifter(st.ctx[dom], regs[ka], regs[kb])
            return dom_bin
        if op in CASTS:
            lifter = synthesize_lifter(op, ins.arg_types[0].width, d, ins.ty.width).dispatch
            (ka,) = keys

            def dom_cast(st, fr):
                regs = fr.regs
                regs[res] = lifter(st.ctx[dom], regs[ka])
            return dom_cast
        if op == "lift":
            t = ins.arg_types[0]
            (ka,) = keys

            def dom_lift(st, fr):
                regs = fr.regs
                regs[res] = AbstractValue(CONCRETE, regs[ka], t)
            return dom_lift
        if op == "lower":
            (ka,) = keys
            lower = d.lower

            def dom_lower(st, fr):
                regs = fr.regs
                v = regs[ka]
                if v.tag == CONCRETE:
                    regs[res] = v.payload
                    return
                try:
                    regs[res] = lower(st.ctx[dom], v.payload, v.stype)
                except Infeasible as e:
                    raise Halt("infeasible", str(e)) from None
                except LowerRefused as e:
                    raise Halt("unknown", f"lower refused: {e}") from None
            return dom_lower
        if op == "sym":
            t = ins.ty.base
            lift_h = d.lift

            def dom_sym(st, fr):
                idx = st.nsyms
                st.nsyms += 1
                ctx = st.ctx[dom]
                pin = host.sym(st, idx, t)
                if pin is None:
                    fr.regs[res] = AbstractValue(dom, ctx.fresh(t, idx), t)
                    return
                ctx.skip_symbol(t, idx)
                if host.pin_mode == "concrete":
                    fr.regs[res] = AbstractValue(CONCRETE, pin & t.mask, t)
                else:
                    fr.regs[res] = AbstractValue(dom, lift_h(ctx, pin & t.mask, t), t)
            return dom_sym
        if op == "freeze":
            kp, kv = keys
            t = ins.arg_types[1].base
            size = t.size
            freeze = d.freeze

            def dom_freeze(st, fr):
                regs = fr.regs
                v = regs[kv]
                buf, seg, off = _access(st, regs[kp], size)
                sh = st.shadow.get(seg)
                if sh:
                    _evict(sh, off, size)
                if v.tag == CONCRETE:
                    buf[off:off + size] = v.payload.to_bytes(size, "little")
                    return
                if v.stype != t:
                    raise Halt("trap", f"freeze of {v.stype} as {t}")
                buf[off:off + size] = bytes(size)
                rec = freeze(st.ctx[dom], v.payload, v.stype)
                st.shadow.setdefault(seg, {})[off] = (AbstractValue(v.tag, rec[0], rec[1]), size)
            return dom_freeze
        if op == "thaw":
            (kp,) = keys
            t = ins.ty.base
            size = t.size

            def dom_thaw(st, fr):
                regs = fr.regs
                buf, seg, off = _access(st, regs[kp], size)
                sh = st.shadow.get(seg)
                if sh:
                    hit = sh.get(off)
                    if hit is not None:
                        v, esize = hit
                        if v.stype != t:
                            raise Halt("trap", f"dynamic type error: thaw {t} over frozen {v.stype}")
                        regs[res] = v
                        return
                    if _overlapping(sh, off, size):
                        raise Halt("trap", "thaw partially overlaps a frozen value")
                regs[res] = AbstractValue(CONCRETE, int.from_bytes(buf[off:off + size], "little"), t)
            return dom_thaw
        if op == "assume":
            kc, kd = keys
            assume = d.assume

            def dom_assume(st, fr):
                regs = fr.regs
                c = regs[kc]
                direction = regs[kd]
                if c.tag == CONCRETE:
                    if c.payload != direction:
                        raise Halt("infeasible", "branch condition is concrete", trivial=True, where="assume")
                    return
                if not assume(st.ctx[dom], c.payload, direction):
                    raise Halt("infeasible", "constraint is trivially false", trivial=True, where="assume")
                ok = host.on_assume(st, dom)
                if ok is None:
                    raise Halt("unknown", "feasibility undecided")
                if not ok:
                    raise Halt("infeasible", "path condition unsatisfiable", trivial=False, where="assume")
            return dom_assume
        if op == "assert":
            (kc,) = keys
            assume = d.assume

            def dom_assert(st, fr):
                c = fr.regs[kc]
                if c.tag == CONCRETE:
                    if not c.payload:
                        raise Halt("assert", "assertion failed")
                    return
                if host.on_assert(st, dom, c.payload) == "holds":
                    return
                if not assume(st.ctx[dom], c.payload, 1):
                    raise Halt("infeasible", "assertion never holds", trivial=True, where="assert")
                _recheck(host, st, dom, "assert")
            return dom_assert
        raise DomainError(f"unknown domain operation a_{op}.{dom}")


def _recheck(host, st, dom: str, where: str) -> None:
    ok = host.on_assume(st, dom)
    if ok is None:
        raise Halt("unknown", "feasibility undecided")
    if not ok:
        raise Halt("infeasible", f"no state passes the {where}", trivial=False, where=where)


def _key(v):
    if isinstance(v, Reg):
        return v.name
    if isinstance(v, Const):
        return v.value
    raise VmError(f"bad operand {v!r}")


def _access(st: MachineState, p: int, size: int):
    seg = p >> SEG_SHIFT
    off = p & OFF_MASK
    buf = st.mem.get(seg)
    if buf is None:
        raise Halt("trap", "null pointer dereference" if seg == 0 else "access to a dead segment")
    if off + size > len(buf):
        raise Halt("trap", "out-of-bounds access")
    return buf, seg, off


def _overlapping(sh: dict, off: int, size: int) -> bool:
    end = off + size
    for eo, (_, es) in sh.items():
        if eo < end and off < eo + es:
            return True
    return False


def _evict(sh: dict, off: int, size: int) -> None:
    end = off + size
    for eo in [eo for eo, (_, es) in sh.items() if eo < end and off < eo + es]:
        del sh[eo]


def _outcome(h: Halt) -> Outcome:
    if h.kind == "choice":
        return Outcome("choice", site=h.data["site"], arity=h.data["arity"])
    return Outcome(h.kind, detail=h.detail, data=dict(h.data))
