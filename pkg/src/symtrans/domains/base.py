"""The toplevel sum domain, domain descriptors and lifter synthesis.

Abstract-typed registers at run time hold :class:`AbstractValue` objects.
A value is either concrete-tagged (raw bits) or tagged with a domain name
and carrying an opaque handle into that domain's per-state context.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from .. import bitops
from ..bitops import DivisionByZero
from ..ir.nodes import BINOPS, CASTS, DIVOPS, PREDICATES
from ..ir.types import AbsType, IntType, IrType, alpha, int_type

CONCRETE = "concrete"


class DomainError(RuntimeError):
    pass


class UnsupportedOp(DomainError):
    pass


class LowerRefused(DomainError):
    """The domain cannot produce a single concrete value."""


class Infeasible(DomainError):
    """The current constraints admit no concrete state."""


@dataclass(frozen=True, slots=True)
class AbstractValue:
    tag: str
    payload: int
    stype: IntType

    @property
    def is_concrete(self) -> bool:
        return self.tag == CONCRETE

    def __repr__(self) -> str:
        if self.tag == CONCRETE:
            return f"C({self.payload}:{self.stype})"
        return f"{self.tag}#{self.payload}:{self.stype}"


def concrete(bits: int, t: IntType) -> AbstractValue:
    return AbstractValue(CONCRETE, bits, t)


class DomainContext:
    """Per-state mutable part of a domain (path condition, cells, ...).

    Subclasses implement the hooks; the defaults describe a domain with no
    constraints and no solver.
    """

    name = "?"

    def snapshot(self) -> Any:
        raise NotImplementedError

    def restore(self, image: Any) -> None:
        raise NotImplementedError

    def fresh(self, t: IntType, index: int) -> int:
        raise NotImplementedError

    def feasible(self) -> str:
        return "sat"

    def check_assert(self, h: int) -> tuple[str, dict]:
        """("holds" | "fails" | "unknown", model)."""
        return "unknown", {}

    def division(self, h: int) -> tuple[str, dict]:
        """Can divisor ``h`` be zero? ("safe" | "may-trap" | "unknown", model)."""
        return "unknown", {}

    def guard_nonzero(self, h: int) -> bool:
        return True

    def model(self) -> dict | None:
        return {}

    def exact(self) -> bool:
        """True when some concrete execution is known to follow this path,
        so a failure reached on it is a real one."""
        return False

    def constraint_count(self) -> int:
        return 0

    def syntactic_key(self, handles) -> Any:
        return tuple(handles)

    def equivalent(self, handles, other: "DomainContext", other_handles) -> str:
        return "yes" if self.syntactic_key(handles) == other.syntactic_key(other_handles) else "no"


@dataclass(frozen=True)
class DomainDescriptor:
    """A pluggable abstract domain.

    ``ops`` maps an operation name (``add``, ``icmp_ult``, ``zext``, ...) to a
    routine ``(ctx, width, *handles) -> handle``; for casts ``width`` is the
    target width. The remaining hooks take the per-state context first.
    """

    name: str
    ops: Mapping[str, Callable]
    new_context: Callable[..., DomainContext]
    lift: Callable[[DomainContext, int, IntType], int]
    lower: Callable[[DomainContext, int, IntType], int]
    freeze: Callable[[DomainContext, int, IntType], Any]
    thaw: Callable[[DomainContext, Any, IntType], int]
    assume: Callable[[DomainContext, int, int], bool]
    forks: bool = True
    rho: Callable[[AbsType], IrType] = field(default=lambda t: t.base)

    def alpha(self, t: IntType) -> AbsType:
        return alpha(t)

    def supports(self, op: str) -> bool:
        return op in self.ops


@dataclass(frozen=True)
class Lifter:
    op: str
    width: int
    dispatch: Callable


def synthesize_lifter(op: str, width: int, d: DomainDescriptor, to_width: int | None = None) -> Lifter:
    """Build the dispatch routine over operand tags for one operation.

    Two concrete operands never reach the domain; a concrete operand next to
    an abstract one is lifted first. Division by a concrete zero raises
    :class:`DivisionByZero` whatever the other operand is.
    """
    if op not in d.ops:
        raise UnsupportedOp(f"domain {d.name} has no {op}")
    fn = d.ops[op]
    lift = d.lift
    dom = d.name
    t = int_type(width)

    if op in BINOPS:
        conc = bitops.make_binop(op, width)
        is_div = op in DIVOPS

        def dispatch(ctx, x: AbstractValue, y: AbstractValue) -> AbstractValue:
            if x.tag == CONCRETE:
                if y.tag == CONCRETE:
                    return AbstractValue(CONCRETE, conc(x.payload, y.payload), t)
                return AbstractValue(dom, fn(ctx, width, lift(ctx, x.payload, t), y.payload), t)
            if y.tag == CONCRETE:
                if is_div and y.payload == 0:
                    raise DivisionByZero(op)
                return AbstractValue(dom, fn(ctx, width, x.payload, lift(ctx, y.payload, t)), t)
            return AbstractValue(dom, fn(ctx, width, x.payload, y.payload), t)

    elif op.startswith("icmp_"):
        pred = op[5:]
        if pred not in PREDICATES:
            raise UnsupportedOp(op)
        conc = bitops.make_icmp(pred, width)
        b1 = int_type(1)

        def dispatch(ctx, x: AbstractValue, y: AbstractValue) -> AbstractValue:
            if x.tag == CONCRETE:
                if y.tag == CONCRETE:
                    return AbstractValue(CONCRETE, conc(x.payload, y.payload), b1)
                return AbstractValue(dom, fn(ctx, width, lift(ctx, x.payload, t), y.payload), b1)
            if y.tag == CONCRETE:
                return AbstractValue(dom, fn(ctx, width, x.payload, lift(ctx, y.payload, t)), b1)
            return AbstractValue(dom, fn(ctx, width, x.payload, y.payload), b1)

    elif op in CASTS:
        if to_width is None:
            raise UnsupportedOp(f"{op} lifter needs a target width")
        conc = bitops.make_cast(op, width, to_width)
        rt = int_type(to_width)

        def dispatch(ctx, x: AbstractValue) -> AbstractValue:
            if x.tag == CONCRETE:
                return AbstractValue(CONCRETE, conc(x.payload), rt)
            return AbstractValue(dom, fn(ctx, to_width, x.payload), rt)

    else:
        raise UnsupportedOp(f"no lifter shape for {op}")
    return Lifter(op, width, dispatch)


def lift(d: DomainDescriptor, ctx: DomainContext, bits: int, t: IntType) -> AbstractValue:
    """Abstract-tagged image of a concrete value."""
    return AbstractValue(d.name, d.lift(ctx, bits & t.mask, t), t)


def lower(d: DomainDescriptor, ctx: DomainContext, v: AbstractValue) -> int:
    if v.tag == CONCRETE:
        return v.payload
    if v.tag != d.name:
        raise DomainError(f"value from domain {v.tag} lowered through {d.name}")
    return d.lower(ctx, v.payload, v.stype)


_REGISTRY: dict[str, Callable[[], DomainDescriptor]] = {}
_CACHE: dict[str, DomainDescriptor] = {}


def register(name: str, factory: Callable[[], DomainDescriptor]) -> None:
    _REGISTRY[name] = factory
    _CACHE.pop(name, None)


def unregister(name: str) -> None:
    _REGISTRY.pop(name, None)
    _CACHE.pop(name, None)


def get_domain(name: str) -> DomainDescriptor:
    if name not in _CACHE:
        try:
            _CACHE[name] = _REGISTRY[name]()
        except KeyError:
            raise DomainError(f"unknown domain {name!r}") from None
    return _CACHE[name]


def domain_names() -> list[str]:
    return sorted(_REGISTRY)
