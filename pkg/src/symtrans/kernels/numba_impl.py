"""JIT path: assignments are evaluated in fixed-size blocks, node by node,
with early exit on the first block holding a model. All arithmetic stays in uint64 -- mixing signed and
unsigned operands would make numba promote to float64."""

from __future__ import annotations

import numpy as np
from numba import njit

from .program import MASKS, OPCODE, OP_CONST, OP_SYM, TermProgram

_ADD, _SUB, _MUL = OPCODE["add"], OPCODE["sub"], OPCODE["mul"]
_UDIV, _SDIV, _UREM, _SREM = OPCODE["udiv"], OPCODE["sdiv"], OPCODE["urem"], OPCODE["srem"]
_AND, _OR, _XOR = OPCODE["and"], OPCODE["or"], OPCODE["xor"]
_SHL, _LSHR, _ASHR = OPCODE["shl"], OPCODE["lshr"], OPCODE["ashr"]
_EQ, _NE, _ULT, _ULE = OPCODE["eq"], OPCODE["ne"], OPCODE["ult"], OPCODE["ule"]
_UGT, _UGE, _SLT, _SLE = OPCODE["ugt"], OPCODE["uge"], OPCODE["slt"], OPCODE["sle"]
_SGT, _SGE = OPCODE["sgt"], OPCODE["sge"]
_ZEXT, _SEXT, _TRUNC = OPCODE["zext"], OPCODE["sext"], OPCODE["trunc"]


@njit(cache=True)
def _neg(v, m):
    return (~v + np.uint64(1)) & m


@njit(cache=True)
def _sext(v, from_w, masks):
    # sign-extend a from_w-bit value to 64 bits
    if from_w == 64:
        return v
    if (v >> np.uint64(from_w - 1)) & np.uint64(1):
        return v | ~masks[from_w]
    return v


@njit(cache=True)
def _slt(x, y, w, masks):
    sx = _sext(x, w, masks) ^ np.uint64(0x8000000000000000)
    sy = _sext(y, w, masks) ^ np.uint64(0x8000000000000000)
    return sx < sy


BLOCK = 1024


@njit(cache=True)
def _eval_block(op, a, b, w, ow, val, slots, n, scratch, trap, masks):
    """Evaluate every node over columns [0, n) of ``slots`` (one row per
    slot). Dispatch happens once per node; the inner loops are branch-light.
    Rows hitting a zero divisor are flagged in ``trap``."""
    zero = np.uint64(0)
    one = np.uint64(1)
    for j in range(n):
        trap[j] = False
    for k in range(op.shape[0]):
        c = op[k]
        out = scratch[k]
        if c == OP_CONST:
            v = val[k]
            for j in range(n):
                out[j] = v
            continue
        if c == OP_SYM:
            src = slots[a[k]]
            for j in range(n):
                out[j] = src[j]
            continue
        xs = scratch[a[k]]
        if c == _ZEXT:
            for j in range(n):
                out[j] = xs[j]
            continue
        if c == _TRUNC:
            m = masks[w[k]]
            for j in range(n):
                out[j] = xs[j] & m
            continue
        if c == _SEXT:
            m = masks[w[k]]
            fw = b[k]
            for j in range(n):
                out[j] = _sext(xs[j], fw, masks) & m
            continue
        ys = scratch[b[k]]
        width = ow[k]
        m = masks[width]
        uw = np.uint64(width)
        if c == _ADD:
            for j in range(n):
                out[j] = (xs[j] + ys[j]) & m
        elif c == _SUB:
            for j in range(n):
                out[j] = (xs[j] - ys[j]) & m
        elif c == _MUL:
            for j in range(n):
                out[j] = (xs[j] * ys[j]) & m
        elif c == _AND:
            for j in range(n):
                out[j] = xs[j] & ys[j]
        elif c == _OR:
            for j in range(n):
                out[j] = xs[j] | ys[j]
        elif c == _XOR:
            for j in range(n):
                out[j] = xs[j] ^ ys[j]
        elif c == _SHL:
            for j in range(n):
                y = ys[j]
                out[j] = (xs[j] << y) & m if y < uw else zero
        elif c == _LSHR:
            for j in range(n):
                y = ys[j]
                out[j] = xs[j] >> y if y < uw else zero
        elif c == _ASHR:
            for j in range(n):
                y = ys[j]
                sh = y if y < uw else uw - one
                sx = _sext(xs[j], width, masks)
                r = sx >> sh
                if (sx >> np.uint64(63)) & one and sh > zero:
                    r = r | ~(~zero >> sh)
                out[j] = r & m
        elif c == _UDIV or c == _UREM or c == _SDIV or c == _SREM:
            sb = one << (uw - one)
            for j in range(n):
                x = xs[j]
                y = ys[j]
                if y == zero:
                    trap[j] = True
                    out[j] = zero
                elif c == _UDIV:
                    out[j] = x // y
                elif c == _UREM:
                    out[j] = x % y
                else:
                    na = (x & sb) != zero
                    nb = (y & sb) != zero
                    ma = _neg(x, m) if na else x
                    mb = _neg(y, m) if nb else y
                    if c == _SDIV:
                        q = ma // mb
                        out[j] = _neg(q, m) if na != nb else q & m
                    else:
                        q = ma % mb
                        out[j] = _neg(q, m) if na else q & m
        elif c == _EQ:
            for j in range(n):
                out[j] = one if xs[j] == ys[j] else zero
        elif c == _NE:
            for j in range(n):
                out[j] = one if xs[j] != ys[j] else zero
        elif c == _ULT:
            for j in range(n):
                out[j] = one if xs[j] < ys[j] else zero
        elif c == _ULE:
            for j in range(n):
                out[j] = one if xs[j] <= ys[j] else zero
        elif c == _UGT:
            for j in range(n):
                out[j] = one if xs[j] > ys[j] else zero
        elif c == _UGE:
            for j in range(n):
                out[j] = one if xs[j] >= ys[j] else zero
        elif c == _SLT:
            for j in range(n):
                out[j] = one if _slt(xs[j], ys[j], width, masks) else zero
        elif c == _SLE:
            for j in range(n):
                out[j] = zero if _slt(ys[j], xs[j], width, masks) else one
        elif c == _SGT:
            for j in range(n):
                out[j] = one if _slt(ys[j], xs[j], width, masks) else zero
        else:  # sge
            for j in range(n):
                out[j] = zero if _slt(xs[j], ys[j], width, masks) else one


@njit(cache=True)
def _decode_block(lo, n, slot_widths, slots, masks):
    shift = np.uint64(0)
    for s in range(slot_widths.shape[0]):
        m = masks[slot_widths[s]]
        row = slots[s]
        for j in range(n):
            row[j] = (np.uint64(lo + j) >> shift) & m
        shift += np.uint64(slot_widths[s])


@njit(cache=True)
def _check_block(roots, n, scratch, trap, ok):
    for j in range(n):
        ok[j] = not trap[j]
    for r in roots:
        row = scratch[r]
        for j in range(n):
            if row[j] != np.uint64(1):
                ok[j] = False


@njit(cache=True)
def _find_first(op, a, b, w, ow, val, roots, slot_widths, start, stop, masks):
    scratch = np.zeros((op.shape[0], BLOCK), dtype=np.uint64)
    slots = np.zeros((max(slot_widths.shape[0], 1), BLOCK), dtype=np.uint64)
    trap = np.zeros(BLOCK, dtype=np.bool_)
    ok = np.zeros(BLOCK, dtype=np.bool_)
    for lo in range(start, stop, BLOCK):
        n = min(BLOCK, stop - lo)
        _decode_block(lo, n, slot_widths, slots, masks)
        _eval_block(op, a, b, w, ow, val, slots, n, scratch, trap, masks)
        _check_block(roots, n, scratch, trap, ok)
        for j in range(n):
            if ok[j]:
                return lo + j
    return -1


@njit(cache=True)
def _sat_mask(op, a, b, w, ow, val, roots, slot_widths, start, stop, masks):
    out = np.zeros(stop - start, dtype=np.bool_)
    scratch = np.zeros((op.shape[0], BLOCK), dtype=np.uint64)
    slots = np.zeros((max(slot_widths.shape[0], 1), BLOCK), dtype=np.uint64)
    trap = np.zeros(BLOCK, dtype=np.bool_)
    ok = np.zeros(BLOCK, dtype=np.bool_)
    for lo in range(start, stop, BLOCK):
        n = min(BLOCK, stop - lo)
        _decode_block(lo, n, slot_widths, slots, masks)
        _eval_block(op, a, b, w, ow, val, slots, n, scratch, trap, masks)
        _check_block(roots, n, scratch, trap, ok)
        out[lo - start : lo - start + n] = ok[:n]
    return out


@njit(cache=True)
def _eval_batch(op, a, b, w, ow, val, roots, slots, masks):
    n = slots.shape[1]
    scratch = np.zeros((op.shape[0], max(n, 1)), dtype=np.uint64)
    trap = np.zeros(max(n, 1), dtype=np.bool_)
    _eval_block(op, a, b, w, ow, val, slots, n, scratch, trap, masks)
    out = np.zeros((n, roots.shape[0]), dtype=np.uint64)
    for i in range(roots.shape[0]):
        row = scratch[roots[i]]
        for j in range(n):
            out[j, i] = row[j]
    return out, trap[:n].copy()


def _args(p: TermProgram):
    return p.op, p.a, p.b, p.w, p.ow, p.val


def find_first(prog: TermProgram, start: int, stop: int) -> int:
    return int(_find_first(*_args(prog), prog.roots, prog.slot_widths, start, stop, MASKS))


def sat_mask(prog: TermProgram, start: int, stop: int) -> np.ndarray:
    return _sat_mask(*_args(prog), prog.roots, prog.slot_widths, start, stop, MASKS)


def eval_batch(prog: TermProgram, assignments: np.ndarray):
    slots = np.ascontiguousarray(np.asarray(assignments, dtype=np.uint64).T)
    if slots.shape[0] == 0:
        slots = np.zeros((1, slots.shape[1]), dtype=np.uint64)
    return _eval_batch(*_args(prog), prog.roots, slots, MASKS)
