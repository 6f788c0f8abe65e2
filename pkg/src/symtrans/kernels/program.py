"""Flat array encoding of a term DAG for the evaluation kernels."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..ir.nodes import BINOPS, CASTS, PREDICATES

OP_CONST = 0
OP_SYM = 1
OPNAMES = ("const", "sym") + BINOPS + PREDICATES + CASTS
OPCODE = {name: i for i, name in enumerate(OPNAMES)}

# Every mask(w) for w in 0..64, as uint64.
MASKS = np.array([(1 << w) - 1 for w in range(65)], dtype=np.uint64)


@dataclass(frozen=True)
class TermProgram:
    """Nodes in evaluation order. For node ``k``:

    * const: ``val[k]`` holds the bits
    * sym: ``a[k]`` is the slot in the assignment vector
    * cast: ``a[k]`` is the child, ``b[k]`` the child's width
    * binary/compare: ``a[k]``, ``b[k]`` are children; ``ow[k]`` operand width
    """

    op: np.ndarray
    a: np.ndarray
    b: np.ndarray
    w: np.ndarray
    ow: np.ndarray
    val: np.ndarray
    roots: np.ndarray
    slot_widths: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.op)

    @property
    def total_bits(self) -> int:
        return int(self.slot_widths.sum())


def compile_nodes(
    nodes: Sequence[tuple], roots: Sequence[int], slots: Sequence[tuple[int, int]]
) -> TermProgram:
    """Encode exported nodes (see ``TermArena.export``).

    ``slots`` lists the (symbol index, width) pairs that form the assignment
    vector; symbols not listed read as zero.
    """
    slot_of = {idx: k for k, (idx, _) in enumerate(slots)}
    n = len(nodes)
    op = np.zeros(n, dtype=np.int64)
    a = np.zeros(n, dtype=np.int64)
    b = np.zeros(n, dtype=np.int64)
    w = np.zeros(n, dtype=np.int64)
    ow = np.zeros(n, dtype=np.int64)
    val = np.zeros(n, dtype=np.uint64)
    for k, (name, x, y, width) in enumerate(nodes):
        w[k] = width
        if name == "const":
            op[k] = OP_CONST
            val[k] = x
        elif name == "sym":
            if x in slot_of:
                op[k] = OP_SYM
                a[k] = slot_of[x]
            else:
                op[k] = OP_CONST
        elif name in CASTS:
            op[k] = OPCODE[name]
            a[k] = x
            b[k] = nodes[x][3]
        else:
            op[k] = OPCODE[name]
            a[k] = x
            b[k] = y
            ow[k] = nodes[x][3]
    return TermProgram(
        op, a, b, w, ow, val,
        np.asarray(list(roots), dtype=np.int64),
        np.asarray([wd for _, wd in slots], dtype=np.int64),
    )
