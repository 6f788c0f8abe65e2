"""Decision backends for path-condition queries."""

from __future__ import annotations

from .brute import MAX_BITS, BruteForceBackend
from .equiv import Equivalence, check_equiv
from .external import ExternalBackend, TranscribingBackend, find_solver
from .query import (
    SolverAnswer,
    SolverError,
    SolverQuery,
    extract_for_solver,
    to_smtlib,
)


def make_backend(name: str = "auto", timeout: float = 30.0, path: str | None = None,
                 record: bool = False):
    """``brute``, ``external`` or ``auto`` (external when a solver binary is
    found, brute force otherwise). With ``record`` the backend keeps the
    SMT-LIB session text in ``.transcript``."""
    if name == "auto":
        name = "external" if find_solver(path) else "brute"
    if name == "brute":
        b = BruteForceBackend()
        return TranscribingBackend(b, timeout) if record else b
    if name == "external":
        return ExternalBackend(path, timeout, record=record)
    raise ValueError(f"unknown solver backend {name!r}")


__all__ = [
    "MAX_BITS",
    "BruteForceBackend",
    "Equivalence",
    "ExternalBackend",
    "SolverAnswer",
    "SolverError",
    "SolverQuery",
    "TranscribingBackend",
    "check_equiv",
    "extract_for_solver",
    "find_solver",
    "make_backend",
    "to_smtlib",
]
