"""gvm: a graph-heap virtual machine and explicit-state model checker."""

from .explorer import BudgetExceeded, Counterexample, ErrorFound, Safe, VerifyOptions, replay, verify
from .heap import Fault, FaultKind, Heap, Snapshot, canonicalize
from .image import Image
from .mos import build
from .vm import VMOptions, boot, run_transition

__all__ = [
    "BudgetExceeded",
    "Counterexample",
    "ErrorFound",
    "Fault",
    "FaultKind",
    "Heap",
    "Image",
    "Safe",
    "Snapshot",
    "VMOptions",
    "VerifyOptions",
    "boot",
    "build",
    "canonicalize",
    "replay",
    "run_transition",
    "verify",
]
