"""The abstraction pass: propagate abstractness, then rewrite."""

from __future__ import annotations

from typing import Callable

from ..ir import Module, ValidationError, validate
from .propagate import ABS, C, SUM, TaintMap, TransformError, propagate_values
from .rewrite import DIR_PREFIX, rewrite

# Called on the rewritten module before the final validation; the pass
# itself registers nothing here.
POST_REWRITE_HOOKS: list[Callable[[Module], Module]] = []


def transform(m: Module, domain: str = "term", entry: str = "main") -> Module:
    """validate -> propagate_values -> rewrite -> validate."""
    diags = validate(m)
    if diags:
        raise ValidationError(diags)
    taint = propagate_values(m, entry)
    out = rewrite(m, taint, domain, entry)
    for hook in POST_REWRITE_HOOKS:
        out = hook(out)
    diags = validate(out)
    if diags:
        raise TransformError("rewritten module is invalid:\n" + "\n".join(str(d) for d in diags))
    return out


__all__ = [
    "ABS",
    "C",
    "DIR_PREFIX",
    "POST_REWRITE_HOOKS",
    "SUM",
    "TaintMap",
    "TransformError",
    "propagate_values",
    "rewrite",
    "transform",
]
