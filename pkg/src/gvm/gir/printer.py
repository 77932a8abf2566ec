from __future__ import annotations

from .ir import (
    CONTROL_ACTIONS,
    CONTROL_REGS,
    MEM_LOAD,
    Imm,
    Instruction,
    Label,
    Program,
    Reg,
    Sym,
    split_mem_kind,
)

_ACTION_NAMES = {v: k for k, v in CONTROL_ACTIONS.items()}
_REG_NAMES = {v: k for k, v in CONTROL_REGS.items()}


def _operand(a) -> str:
    if isinstance(a, Reg):
        return f"%{a.index}"
    if isinstance(a, Imm):
        return str(a.value)
    if isinstance(a, Sym):
        return f"@{a.name}"
    if isinstance(a, Label):
        return a.name
    raise TypeError(a)


def print_instruction(ins: Instruction) -> str:
    prefix = f"%{ins.dest} = " if ins.dest is not None else ""
    args = list(ins.args)
    if ins.op == "call":
        target = _operand(args[0]) if isinstance(args[0], Reg) else args[0].name
        return f"{prefix}call {target}({', '.join(_operand(a) for a in args[1:])})"
    if ins.op == "hc.control":
        parts = [_ACTION_NAMES[args[0].value], _REG_NAMES[args[1].value]] + [_operand(a) for a in args[2:]]
        return f"{prefix}hc.control {', '.join(parts)}"
    if ins.op == "hc.interrupt_mem":
        kind, width = split_mem_kind(args[1].value)
        name = "load" if kind == MEM_LOAD else "store"
        return f"hc.interrupt_mem {_operand(args[0])}, {name}.{width}"
    text = f"{prefix}{ins.op}"
    if args:
        text += " " + ", ".join(_operand(a) for a in args)
    return text


def print_program(program: Program) -> str:
    out: list[str] = []
    for name in program.externs:
        out.append(f"extern {name}")
    for g in program.globals:
        init = f" = {g.init.hex()}" if g.init is not None else ""
        out.append(f"global {g.name} {g.size}{init}")
    for c in program.constants:
        out.append(f"const {c.name} = {c.data.hex()}")
    for fn in program.functions:
        out.append(f"fn {fn.name}({fn.nparams}) regs {fn.nregs} {{")
        for b in fn.blocks:
            out.append(f"{b.label}:")
            out.extend(f"  {print_instruction(i)}" for i in b.instrs)
        out.append("}")
    return "\n".join(out) + "\n"
