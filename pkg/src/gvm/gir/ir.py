"""Data model for GIR, the textual register IR the VM executes."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Union


@dataclass(frozen=True)
class Reg:
    index: int


@dataclass(frozen=True)
class Imm:
    value: int


@dataclass(frozen=True)
class Sym:
    """``@name``: address of a global, constant or function."""

    name: str


@dataclass(frozen=True)
class Label:
    name: str


Operand = Union[Reg, Imm, Sym, Label]


@dataclass
class Instruction:
    op: str
    args: tuple = ()
    dest: int | None = None
    line: int = field(default=0, compare=False, repr=False)

    @property
    def is_terminator(self) -> bool:
        return self.op in TERMINATORS

    @property
    def is_hypercall(self) -> bool:
        return self.op.startswith("hc.")


@dataclass
class Block:
    label: str
    instrs: list[Instruction] = field(default_factory=list)


@dataclass
class Function:
    name: str
    nparams: int
    nregs: int
    blocks: list[Block] = field(default_factory=list)
    line: int = field(default=0, compare=False, repr=False)

    def block(self, label: str) -> Block:
        for b in self.blocks:
            if b.label == label:
                return b
        raise KeyError(label)


@dataclass
class GlobalDecl:
    name: str
    size: int
    init: bytes | None = None
    line: int = field(default=0, compare=False, repr=False)


@dataclass
class ConstDecl:
    name: str
    data: bytes
    line: int = field(default=0, compare=False, repr=False)


@dataclass
class Program:
    functions: list[Function] = field(default_factory=list)
    globals: list[GlobalDecl] = field(default_factory=list)
    constants: list[ConstDecl] = field(default_factory=list)
    externs: list[str] = field(default_factory=list)

    entry = "__boot"

    def function(self, name: str) -> Function:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    def symbols(self) -> dict[str, str]:
        """Map every defined name to its kind (fn, global, const)."""
        out: dict[str, str] = {}
        for g in self.globals:
            out[g.name] = "global"
        for c in self.constants:
            out[c.name] = "const"
        for f in self.functions:
            out[f.name] = "fn"
        return out

    def digest(self) -> str:
        from .printer import print_program

        return hashlib.sha256(print_program(self).encode()).hexdigest()


@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.col}: {self.message}"


class GIRError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


TERMINATORS = frozenset({"br", "jump", "ret", "unreachable"})

WIDTHS = (1, 2, 4, 8)

# hc.control actions and machine register numbering (stable ABI)
CONTROL_ACTIONS = {"get": 0, "set": 1, "or": 2, "clear": 3}
CONTROL_REGS = {
    "frame": 0,
    "globals": 1,
    "constants": 2,
    "sched": 3,
    "fault": 4,
    "flags": 5,
    "pc": 6,
}

# interrupt_mem kind immediate: (kind << 8) | width, kind 0 = load, 1 = store
MEM_LOAD = 0
MEM_STORE = 1


def mem_kind(kind: int, width: int) -> int:
    return (kind << 8) | width


def split_mem_kind(value: int) -> tuple[int, int]:
    return value >> 8, value & 0xFF


BINARY_OPS = frozenset(
    "add sub mul udiv sdiv urem srem and or xor shl lshr ashr".split()
    + [f"icmp.{c}" for c in ("eq", "ne", "ult", "ule", "slt", "sle")]
    + ["gep"]
)
UNARY_OPS = frozenset(["mov", "ptrtoint", "inttoptr", "alloca"])
WIDTH_OPS = ("zext", "sext", "trunc")

# hypercall name -> (operand count, produces a value)
HYPERCALLS: dict[str, tuple[int, bool]] = {
    "hc.obj_make": (1, True),
    "hc.obj_free": (1, False),
    "hc.obj_size": (1, True),
    "hc.obj_resize": (2, False),
    "hc.obj_shared": (1, False),
    "hc.trace": (1, False),
    "hc.interrupt_mem": (2, False),
    "hc.interrupt_cfl": (0, False),
    "hc.choose": (1, True),
    "hc.control": (-1, False),  # 2 operands for get (with dest), 3 otherwise
}


def base_op(op: str) -> tuple[str, int | None]:
    """Split ``load.8`` into ``("load", 8)``; other opcodes get ``None``."""
    head, _, tail = op.partition(".")
    if head in ("load", "store") or head in WIDTH_OPS:
        return head, int(tail) if tail.isdigit() else None
    return op, None


def is_known_op(op: str) -> bool:
    if op in BINARY_OPS or op in UNARY_OPS or op in HYPERCALLS or op in TERMINATORS:
        return True
    if op == "call":
        return True
    head, width = base_op(op)
    return head in ("load", "store", *WIDTH_OPS) and width in WIDTHS
