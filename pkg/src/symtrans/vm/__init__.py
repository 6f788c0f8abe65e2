"""Domain-agnostic virtual machine."""

from .machine import CLONE_SUFFIX, DEFAULT_FUEL, Host, Machine, base_name, is_generated_choice
from .state import (
    TRAP_EXIT_CODE,
    Frame,
    Halt,
    MachineState,
    Outcome,
    StateImage,
    VmError,
)

__all__ = [
    "CLONE_SUFFIX",
    "DEFAULT_FUEL",
    "TRAP_EXIT_CODE",
    "Frame",
    "Halt",
    "Host",
    "Machine",
    "MachineState",
    "Outcome",
    "StateImage",
    "VmError",
    "base_name",
    "is_generated_choice",
]
