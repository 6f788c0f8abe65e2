"""Abstract domains and the plug-in registry."""

from __future__ import annotations

from . import parity, term
from .base import (
    CONCRETE,
    AbstractValue,
    DomainContext,
    DomainDescriptor,
    DomainError,
    Infeasible,
    Lifter,
    LowerRefused,
    UnsupportedOp,
    concrete,
    domain_names,
    get_domain,
    lift,
    lower,
    register,
    synthesize_lifter,
    unregister,
)

register(term.NAME, term.make_descriptor)
register(parity.NAME, parity.make_descriptor)

__all__ = [
    "CONCRETE",
    "AbstractValue",
    "DomainContext",
    "DomainDescriptor",
    "DomainError",
    "Infeasible",
    "Lifter",
    "LowerRefused",
    "UnsupportedOp",
    "concrete",
    "domain_names",
    "get_domain",
    "lift",
    "lower",
    "register",
    "synthesize_lifter",
    "unregister",
]
