"""GIR: the textual register IR hosting user programs and the OS prelude."""

from .instrument import InstrumentationPolicy, count_interrupt_points, instrument
from .ir import (
    CONTROL_ACTIONS,
    CONTROL_REGS,
    Block,
    ConstDecl,
    Diagnostic,
    Function,
    GIRError,
    GlobalDecl,
    Imm,
    Instruction,
    Label,
    Program,
    Reg,
    Sym,
)
from .link import link, set_constant
from .parser import parse_program
from .printer import print_instruction, print_program
from .validate import validate

__all__ = [
    "CONTROL_ACTIONS",
    "CONTROL_REGS",
    "Block",
    "ConstDecl",
    "Diagnostic",
    "Function",
    "GIRError",
    "GlobalDecl",
    "Imm",
    "Instruction",
    "InstrumentationPolicy",
    "Label",
    "Program",
    "Reg",
    "Sym",
    "count_interrupt_points",
    "instrument",
    "link",
    "parse_program",
    "print_instruction",
    "print_program",
    "set_constant",
    "validate",
]
