"""Lowering of a linked GIR Program into flat, index-addressed code."""

from __future__ import annotations

from dataclasses import dataclass, field

from .gir import Imm, Label, Program, Reg, Sym
from .gir.ir import base_op, split_mem_kind
from .heap import M64, HeapObject, Tag, make_ptr, slot_object

FRAME_HEADER = 16  # parent frame pointer, saved PC


def reg_offset(index: int) -> int:
    return FRAME_HEADER + 8 * index


class CInstr:
    """One executable instruction.

    Register operands are stored as frame byte offsets (``int``); every
    other operand is a pre-built ``(bits, defined, is_pointer)`` value.
    """

    __slots__ = ("op", "kind", "dest", "args", "width", "targets", "fn", "index", "label", "line", "source")

    def __init__(self, op, kind, dest, args, width, targets, fn, index, label, line, source):
        self.op = op
        self.kind = kind
        self.dest = dest
        self.args = args
        self.width = width
        self.targets = targets
        self.fn = fn
        self.index = index
        self.label = label
        self.line = line
        self.source = source


@dataclass
class Code:
    name: str
    index: int
    nparams: int
    nregs: int
    instrs: list[CInstr] = field(default_factory=list)
    labels: dict[str, int] = field(default_factory=dict)

    @property
    def frame_size(self) -> int:
        return reg_offset(self.nregs)


class Image:
    """Executable form of a linked program plus its static data layout."""

    def __init__(self, program: Program):
        self.program = program
        self.digest = program.digest()
        self.by_name = {f.name: i for i, f in enumerate(program.functions)}
        self.global_slots = {g.name: i for i, g in enumerate(program.globals)}
        self.const_slots = {c.name: i for i, c in enumerate(program.constants)}
        self.functions = [self._lower(i, f) for i, f in enumerate(program.functions)]

    def code_ptr(self, name: str, index: int = 0) -> int:
        return make_ptr(Tag.CODE, self.by_name[name], index)

    def globals_object(self) -> HeapObject:
        return slot_object([(g.size, g.init) for g in self.program.globals])

    def constants_object(self) -> HeapObject:
        return slot_object([(len(c.data), c.data) for c in self.program.constants])

    def pc_label(self, fn: int, index: int) -> str:
        return f"{self.functions[fn].name}+{index}"

    def _symbol(self, name: str) -> tuple[int, bool, bool]:
        if name in self.global_slots:
            return make_ptr(Tag.GLOBAL, self.global_slots[name]), True, True
        if name in self.const_slots:
            return make_ptr(Tag.CONST, self.const_slots[name]), True, True
        return make_ptr(Tag.CODE, self.by_name[name]), True, True

    def _lower(self, index: int, fn) -> Code:
        from .gir.printer import print_instruction

        code = Code(fn.name, index, fn.nparams, fn.nregs)
        pos = 0
        for b in fn.blocks:
            code.labels[b.label] = pos
            pos += len(b.instrs)
        for b in fn.blocks:
            for ins in b.instrs:
                head, width = base_op(ins.op)
                kind = head
                args = []
                targets = ()
                for a in ins.args:
                    if isinstance(a, Reg):
                        args.append(reg_offset(a.index))
                    elif isinstance(a, Imm):
                        args.append((a.value & M64, True, False))
                    elif isinstance(a, Sym):
                        args.append(self._symbol(a.name))
                    elif isinstance(a, Label):
                        targets += (code.labels[a.name],)
                if ins.op == "hc.interrupt_mem":
                    mk, width = split_mem_kind(ins.args[1].value)
                    args = [args[0], mk]
                dest = reg_offset(ins.dest) if ins.dest is not None else None
                n = len(code.instrs)
                code.instrs.append(
                    CInstr(
                        ins.op,
                        kind,
                        dest,
                        tuple(args),
                        width,
                        targets,
                        index,
                        n,
                        f"{fn.name}+{n}",
                        ins.line,
                        print_instruction(ins),
                    )
                )
        return code
