"""Brute-force evaluation kernels.

Two interchangeable implementations: a numba-jitted blocked loop and a pure
numpy vectorised fallback. Set ``SYMTRANS_NO_NUMBA=1`` to force the numpy
path (it is also used automatically when numba cannot be imported).
"""

from __future__ import annotations

import importlib
import os

from . import numpy_impl
from .program import MASKS, OPCODE, OPNAMES, TermProgram, compile_nodes

numba_impl = None
if os.environ.get("SYMTRANS_NO_NUMBA", "").strip() in ("", "0"):
    try:
        numba_impl = importlib.import_module(".numba_impl", __name__)
    except ImportError:  # pragma: no cover - numba is a hard dependency here
        numba_impl = None

_impl = numba_impl if numba_impl is not None else numpy_impl
BACKEND = "numba" if numba_impl is not None else "numpy"


def find_first(prog: TermProgram, start: int, stop: int) -> int:
    """Smallest assignment index in [start, stop) satisfying every root, or -1."""
    return _impl.find_first(prog, start, stop)


def sat_mask(prog: TermProgram, start: int, stop: int):
    return _impl.sat_mask(prog, start, stop)


def eval_batch(prog: TermProgram, assignments):
    return _impl.eval_batch(prog, assignments)


__all__ = [
    "BACKEND",
    "MASKS",
    "OPCODE",
    "OPNAMES",
    "TermProgram",
    "compile_nodes",
    "eval_batch",
    "find_first",
    "numba_impl",
    "numpy_impl",
    "sat_mask",
]
