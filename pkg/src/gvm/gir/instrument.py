"""Insertion of explicit interrupt points (visible actions) into GIR."""

from __future__ import annotations

import copy
from dataclasses import dataclass

from .ir import MEM_LOAD, MEM_STORE, Function, Imm, Instruction, Label, Program, Reg, base_op, mem_kind

DEFAULT_EXEMPT = frozenset({"scheduler", "fault_handler"})


@dataclass(frozen=True)
class InstrumentationPolicy:
    insert_cfl: bool = True
    insert_mem: bool = True
    # None means the OS scheduler and fault handler, when defined
    exempt: frozenset[str] | None = None

    def exempt_for(self, program: Program) -> frozenset[str]:
        names = {f.name for f in program.functions}
        if self.exempt is None:
            return DEFAULT_EXEMPT & names
        extra = set(self.exempt) - names
        if extra:
            raise ValueError(f"exempt functions not defined: {sorted(extra)}")
        return frozenset(self.exempt)


def frame_local_registers(fn: Function) -> set[int]:
    """Registers provably holding an ``alloca`` result (or an offset of one)."""
    defs: dict[int, list[Instruction]] = {}
    for b in fn.blocks:
        for ins in b.instrs:
            if ins.dest is not None:
                defs.setdefault(ins.dest, []).append(ins)
    local = {r for r in defs if r >= fn.nparams}
    changed = True
    while changed:
        changed = False
        for r in sorted(local):
            for ins in defs[r]:
                ok = ins.op == "alloca" or (
                    ins.op in ("gep", "mov") and isinstance(ins.args[0], Reg) and ins.args[0].index in local
                )
                if not ok:
                    local.discard(r)
                    changed = True
                    break
    return local


def back_edge_targets(fn: Function) -> set[str]:
    order = {b.label: i for i, b in enumerate(fn.blocks)}
    targets = set()
    for i, b in enumerate(fn.blocks):
        if not b.instrs:
            continue
        for a in b.instrs[-1].args:
            if isinstance(a, Label) and order.get(a.name, i + 1) <= i:
                targets.add(a.name)
    return targets


def _instrument_function(fn: Function, policy: InstrumentationPolicy) -> None:
    loop_heads = back_edge_targets(fn) if policy.insert_cfl else set()
    local = frame_local_registers(fn) if policy.insert_mem else set()
    for b in fn.blocks:
        out: list[Instruction] = []
        if b.label in loop_heads and not (b.instrs and b.instrs[0].op == "hc.interrupt_cfl"):
            out.append(Instruction("hc.interrupt_cfl", (), line=b.instrs[0].line if b.instrs else 0))
        for ins in b.instrs:
            head, width = base_op(ins.op)
            if policy.insert_mem and head in ("load", "store"):
                addr = ins.args[0]
                if not (isinstance(addr, Reg) and addr.index in local):
                    kind = mem_kind(MEM_LOAD if head == "load" else MEM_STORE, width)
                    marker = Instruction("hc.interrupt_mem", (addr, Imm(kind)), line=ins.line)
                    if not (out and out[-1] == marker):
                        out.append(marker)
            out.append(ins)
        b.instrs = out


def instrument(program: Program, policy: InstrumentationPolicy | None = None) -> Program:
    """Return a copy of ``program`` with interrupt points inserted.

    ``interrupt_cfl`` goes at the head of every block entered by a back
    edge (a branch to a block at or before the branching block) and
    ``interrupt_mem`` right before each load/store whose address is not
    provably frame-local.  Existing interrupt points are kept, so the
    pass is idempotent.
    """
    policy = policy or InstrumentationPolicy()
    exempt = policy.exempt_for(program)
    out = copy.deepcopy(program)
    for fn in out.functions:
        if fn.name not in exempt:
            _instrument_function(fn, policy)
    return out


def count_interrupt_points(program: Program) -> dict[str, int]:
    counts = {"hc.interrupt_cfl": 0, "hc.interrupt_mem": 0}
    for fn in program.functions:
        for b in fn.blocks:
            for ins in b.instrs:
                if ins.op in counts:
                    counts[ins.op] += 1
    return counts
