"""Two's-complement bitvector arithmetic on Python ints.

Values are kept as unsigned integers in ``[0, 2**width)``. Shift amounts at
or beyond the width saturate (0 for shl/lshr, sign fill for ashr); signed
division truncates toward zero and ``INT_MIN / -1`` wraps. Division by zero
raises :class:`DivisionByZero` -- callers turn it into a trap.
"""

from __future__ import annotations

from typing import Callable


class DivisionByZero(ArithmeticError):
    pass


def mask(width: int) -> int:
    return (1 << width) - 1


def to_signed(v: int, width: int) -> int:
    if v >> (width - 1):
        return v - (1 << width)
    return v


def _sdiv(a: int, b: int, w: int) -> int:
    sa, sb = to_signed(a, w), to_signed(b, w)
    q = abs(sa) // abs(sb)
    if (sa < 0) != (sb < 0):
        q = -q
    return q & mask(w)


def _srem(a: int, b: int, w: int) -> int:
    sa, sb = to_signed(a, w), to_signed(b, w)
    r = abs(sa) % abs(sb)
    if sa < 0:
        r = -r
    return r & mask(w)


def _ashr(a: int, b: int, w: int) -> int:
    if b >= w:
        return mask(w) if a >> (w - 1) else 0
    return (to_signed(a, w) >> b) & mask(w)


def make_binop(op: str, width: int) -> Callable[[int, int], int]:
    """Specialised two-operand function for one opcode at one width."""
    m = mask(width)
    w = width
    if op == "add":
        return lambda a, b: (a + b) & m
    if op == "sub":
        return lambda a, b: (a - b) & m
    if op == "mul":
        return lambda a, b: (a * b) & m
    if op == "and":
        return lambda a, b: a & b
    if op == "or":
        return lambda a, b: a | b
    if op == "xor":
        return lambda a, b: a ^ b
    if op == "shl":
        return lambda a, b: (a << b) & m if b < w else 0
    if op == "lshr":
        return lambda a, b: a >> b if b < w else 0
    if op == "ashr":
        return lambda a, b: _ashr(a, b, w)

    def guard(f):
        def div(a, b):
            if b == 0:
                raise DivisionByZero(op)
            return f(a, b)

        return div

    if op == "udiv":
        return guard(lambda a, b: a // b)
    if op == "urem":
        return guard(lambda a, b: a % b)
    if op == "sdiv":
        return guard(lambda a, b: _sdiv(a, b, w))
    if op == "srem":
        return guard(lambda a, b: _srem(a, b, w))
    raise ValueError(f"unknown binary op {op!r}")


def make_icmp(pred: str, width: int) -> Callable[[int, int], int]:
    w = width
    if pred == "eq":
        return lambda a, b: int(a == b)
    if pred == "ne":
        return lambda a, b: int(a != b)
    if pred == "ult":
        return lambda a, b: int(a < b)
    if pred == "ule":
        return lambda a, b: int(a <= b)
    if pred == "ugt":
        return lambda a, b: int(a > b)
    if pred == "uge":
        return lambda a, b: int(a >= b)
    s = to_signed
    if pred == "slt":
        return lambda a, b: int(s(a, w) < s(b, w))
    if pred == "sle":
        return lambda a, b: int(s(a, w) <= s(b, w))
    if pred == "sgt":
        return lambda a, b: int(s(a, w) > s(b, w))
    if pred == "sge":
        return lambda a, b: int(s(a, w) >= s(b, w))
    raise ValueError(f"unknown predicate {pred!r}")


def make_cast(op: str, from_w: int, to_w: int) -> Callable[[int], int]:
    if op == "zext":
        return lambda v: v
    if op == "trunc":
        m = mask(to_w)
        return lambda v: v & m
    if op == "sext":
        m = mask(to_w)
        return lambda v: to_signed(v, from_w) & m
    raise ValueError(f"unknown cast {op!r}")


_BIN_CACHE: dict = {}
_CMP_CACHE: dict = {}
_CAST_CACHE: dict = {}


def binop(op: str, a: int, b: int, width: int) -> int:
    key = (op, width)
    f = _BIN_CACHE.get(key)
    if f is None:
        f = _BIN_CACHE[key] = make_binop(op, width)
    return f(a, b)


def icmp(pred: str, a: int, b: int, width: int) -> int:
    key = (pred, width)
    f = _CMP_CACHE.get(key)
    if f is None:
        f = _CMP_CACHE[key] = make_icmp(pred, width)
    return f(a, b)


def cast(op: str, v: int, from_w: int, to_w: int) -> int:
    key = (op, from_w, to_w)
    f = _CAST_CACHE.get(key)
    if f is None:
        f = _CAST_CACHE[key] = make_cast(op, from_w, to_w)
    return f(v)
