"""Vectorised reference path: evaluates one node at a time over a whole
chunk of assignments."""

from __future__ import annotations

import numpy as np

from .program import MASKS, OPCODE, OP_CONST, OP_SYM, TermProgram

CHUNK = 1 << 16

_U = np.uint64
_ONE = _U(1)


def _signed(v: np.ndarray, w: int) -> np.ndarray:
    if w == 64:
        return v.view(np.int64)
    s = v.astype(np.int64)
    return s - ((s >> (w - 1)) & 1) * (1 << w)


def _neg(v: np.ndarray, m) -> np.ndarray:
    return (~v + _ONE) & m


def apply_binary(code: int, x: np.ndarray, y: np.ndarray, w: int):
    """Return (result, trap mask) for one binary opcode over arrays."""
    m = MASKS[w]
    trap = None
    name_code = code
    if name_code == OPCODE["add"]:
        r = (x + y) & m
    elif name_code == OPCODE["sub"]:
        r = (x - y) & m
    elif name_code == OPCODE["mul"]:
        r = (x * y) & m
    elif name_code == OPCODE["and"]:
        r = x & y
    elif name_code == OPCODE["or"]:
        r = x | y
    elif name_code == OPCODE["xor"]:
        r = x ^ y
    elif name_code == OPCODE["shl"]:
        sh = np.minimum(y, _U(63))
        r = np.where(y < _U(w), (x << sh) & m, _U(0))
    elif name_code == OPCODE["lshr"]:
        sh = np.minimum(y, _U(63))
        r = np.where(y < _U(w), x >> sh, _U(0))
    elif name_code == OPCODE["ashr"]:
        sh = np.minimum(y, _U(w - 1)).astype(np.int64)
        r = (_signed(x, w) >> sh).astype(np.uint64) & m
    elif name_code in (OPCODE["udiv"], OPCODE["urem"], OPCODE["sdiv"], OPCODE["srem"]):
        trap = y == 0
        ys = np.where(trap, _U(1), y)
        if name_code == OPCODE["udiv"]:
            r = x // ys
        elif name_code == OPCODE["urem"]:
            r = x % ys
        else:
            sb = _U(1) << _U(w - 1)
            na = (x & sb) != 0
            nb = (ys & sb) != 0
            ma = np.where(na, _neg(x, m), x)
            mb = np.where(nb, _neg(ys, m), ys)
            if name_code == OPCODE["sdiv"]:
                q = ma // mb
                r = np.where(na != nb, _neg(q, m), q) & m
            else:
                q = ma % mb
                r = np.where(na, _neg(q, m), q) & m
    else:
        pred = name_code
        if pred == OPCODE["eq"]:
            c = x == y
        elif pred == OPCODE["ne"]:
            c = x != y
        elif pred == OPCODE["ult"]:
            c = x < y
        elif pred == OPCODE["ule"]:
            c = x <= y
        elif pred == OPCODE["ugt"]:
            c = x > y
        elif pred == OPCODE["uge"]:
            c = x >= y
        else:
            sx, sy = _signed(x, w), _signed(y, w)
            if pred == OPCODE["slt"]:
                c = sx < sy
            elif pred == OPCODE["sle"]:
                c = sx <= sy
            elif pred == OPCODE["sgt"]:
                c = sx > sy
            elif pred == OPCODE["sge"]:
                c = sx >= sy
            else:
                raise ValueError(f"bad opcode {code}")
        r = c.astype(np.uint64)
    return r, trap


def apply_cast(code: int, x: np.ndarray, from_w: int, to_w: int) -> np.ndarray:
    if code == OPCODE["zext"]:
        return x
    if code == OPCODE["trunc"]:
        return x & MASKS[to_w]
    return _signed(x, from_w).astype(np.uint64) & MASKS[to_w]


def _decode(prog: TermProgram, idx: np.ndarray) -> list[np.ndarray]:
    slots = []
    shift = 0
    for wd in prog.slot_widths:
        slots.append((idx >> _U(shift)) & MASKS[int(wd)])
        shift += int(wd)
    return slots


def eval_chunk(prog: TermProgram, slots: list[np.ndarray], n: int):
    """Evaluate every node; returns (list of value arrays, trap mask)."""
    vals: list[np.ndarray] = []
    trap = np.zeros(n, dtype=bool)
    for k in range(prog.n_nodes):
        code = int(prog.op[k])
        if code == OP_CONST:
            vals.append(np.full(n, prog.val[k], dtype=np.uint64))
        elif code == OP_SYM:
            vals.append(slots[int(prog.a[k])])
        elif code >= OPCODE["zext"]:
            vals.append(apply_cast(code, vals[int(prog.a[k])], int(prog.b[k]), int(prog.w[k])))
        else:
            r, t = apply_binary(code, vals[int(prog.a[k])], vals[int(prog.b[k])], int(prog.ow[k]))
            if t is not None:
                trap |= t
            vals.append(r)
    return vals, trap


def _sat(prog: TermProgram, idx: np.ndarray) -> np.ndarray:
    n = len(idx)
    vals, trap = eval_chunk(prog, _decode(prog, idx), n)
    ok = ~trap
    for r in prog.roots:
        ok &= vals[int(r)] == 1
    return ok


def find_first(prog: TermProgram, start: int, stop: int) -> int:
    for lo in range(start, stop, CHUNK):
        hi = min(stop, lo + CHUNK)
        ok = _sat(prog, np.arange(lo, hi, dtype=np.uint64))
        hits = np.flatnonzero(ok)
        if len(hits):
            return lo + int(hits[0])
    return -1


def sat_mask(prog: TermProgram, start: int, stop: int) -> np.ndarray:
    out = np.zeros(stop - start, dtype=bool)
    for lo in range(start, stop, CHUNK):
        hi = min(stop, lo + CHUNK)
        out[lo - start : hi - start] = _sat(prog, np.arange(lo, hi, dtype=np.uint64))
    return out


def eval_batch(prog: TermProgram, assignments: np.ndarray):
    """Values of the roots for each assignment row; (values, trap)."""
    n = assignments.shape[0]
    slots = [assignments[:, j].astype(np.uint64) for j in range(assignments.shape[1])]
    vals, trap = eval_chunk(prog, slots, n)
    out = np.zeros((n, len(prog.roots)), dtype=np.uint64)
    for j, r in enumerate(prog.roots):
        out[:, j] = vals[int(r)]
    return out, trap
