"""Instruction evaluator: one state-space transition at a time.

A transition starts in the OS scheduler with the Mask flag set and ends
when an interrupt fires, the frame register is set to null, or the root
frame returns.  Everything persistent lives in the heap; the machine
registers below are rebuilt from the snapshot roots on every entry.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

from .gir import CONTROL_REGS
from .gir.ir import MEM_STORE
from .heap import (
    M64,
    Fault,
    FaultKind,
    Heap,
    Snapshot,
    Tag,
    gep,
    make_ptr,
    ptr_id,
    ptr_offset,
    ptr_tag,
)
from .image import FRAME_HEADER, CInstr, Code, Image, reg_offset

ERROR = 1
ACCEPT = 2
MASK = 4
INTERRUPTED = 8

REG_FRAME = CONTROL_REGS["frame"]
REG_GLOBALS = CONTROL_REGS["globals"]
REG_CONSTANTS = CONTROL_REGS["constants"]
REG_SCHED = CONTROL_REGS["sched"]
REG_FAULT = CONTROL_REGS["fault"]
REG_FLAGS = CONTROL_REGS["flags"]
REG_PC = CONTROL_REGS["pc"]

SCHEDULER = "scheduler"
BOOT = "__boot"

_ONES8 = b"\x01" * 8
_ZEROS8 = bytes(8)
_SIGN = 1 << 63
_UNDEF = (0, False, False)


def signed(x: int) -> int:
    return x - (1 << 64) if x & _SIGN else x


class ChoiceOracle(Protocol):
    """Supplies ``choose`` results and the final say on interrupt points."""

    def choose(self, bound: int) -> int: ...

    def interrupt(self, pc: str, fire: bool) -> bool: ...


class ZeroOracle:
    def choose(self, bound: int) -> int:
        return 0

    def interrupt(self, pc: str, fire: bool) -> bool:
        return fire


@dataclass(frozen=True)
class VMOptions:
    # False means the interrupt kind fires unconditionally
    tau_cfl: bool = True
    tau_mem: bool = True
    step_budget: int = 200_000


@dataclass(frozen=True)
class FaultRecord:
    kind: FaultKind
    pc: str
    continuation: str
    message: str = ""
    # (as-if bits, defined) of the value behind a control fault
    value: tuple[int, bool] | None = None


@dataclass
class Transition:
    """Outcome of one run of the scheduler and the code it transfers to."""

    snapshot: Snapshot | None
    choices: list[tuple[int, int]] = field(default_factory=list)
    traces: list[bytes] = field(default_factory=list)
    interrupts: list[tuple[str, bool]] = field(default_factory=list)
    faults: list[FaultRecord] = field(default_factory=list)
    error: bool = False
    accept: bool = False
    terminal: bool = False
    budget_exceeded: bool = False
    steps: int = 0
    user_steps: int = 0

    @property
    def choice_vector(self) -> tuple[int, ...]:
        return tuple(v for v, _ in self.choices)


class _End(Exception):
    pass


class _Budget(Exception):
    pass


class Machine:
    def __init__(self, image: Image, heap: Heap, oracle: ChoiceOracle, options: VMOptions):
        self.image = image
        self.heap = heap
        self.oracle = oracle
        self.options = options
        self.flags = MASK
        self.sched = 0
        self.fault_handler = 0
        self.frame = 0
        self.fobj = None
        self.code: Code | None = None
        self.instrs: list[CInstr] = []
        self.pc = 0
        self.int_frame = 0
        # per-transition bookkeeping
        self.cfl_pcs: set[tuple[int, int]] = set()
        self.mem_loads: set[tuple[int, int, int]] = set()
        self.result = Transition(None)
        self.in_handler = False
        self.saved_mask = 0
        self.steps = 0
        self.user_steps = 0
        self.dispatch = {
            "add": self.op_binary,
            "sub": self.op_binary,
            "mul": self.op_binary,
            "udiv": self.op_binary,
            "sdiv": self.op_binary,
            "urem": self.op_binary,
            "srem": self.op_binary,
            "and": self.op_binary,
            "or": self.op_binary,
            "xor": self.op_binary,
            "shl": self.op_binary,
            "lshr": self.op_binary,
            "ashr": self.op_binary,
            "icmp.eq": self.op_binary,
            "icmp.ne": self.op_binary,
            "icmp.ult": self.op_binary,
            "icmp.ule": self.op_binary,
            "icmp.slt": self.op_binary,
            "icmp.sle": self.op_binary,
            "gep": self.op_gep,
            "mov": self.op_mov,
            "ptrtoint": self.op_ptrtoint,
            "inttoptr": self.op_inttoptr,
            "zext": self.op_zext,
            "trunc": self.op_zext,
            "sext": self.op_sext,
            "load": self.op_load,
            "store": self.op_store,
            "alloca": self.op_alloca,
            "jump": self.op_jump,
            "br": self.op_br,
            "call": self.op_call,
            "ret": self.op_ret,
            "unreachable": self.op_unreachable,
            "hc.obj_make": self.hc_obj_make,
            "hc.obj_free": self.hc_obj_free,
            "hc.obj_size": self.hc_obj_size,
            "hc.obj_resize": self.hc_obj_resize,
            "hc.obj_shared": self.hc_obj_shared,
            "hc.trace": self.hc_trace,
            "hc.interrupt_mem": self.hc_interrupt_mem,
            "hc.interrupt_cfl": self.hc_interrupt_cfl,
            "hc.choose": self.hc_choose,
            "hc.control": self.hc_control,
        }

    # -- registers ----------------------------------------------------

    def val(self, a) -> tuple[int, bool, bool]:
        if a.__class__ is int:
            o = self.fobj
            return (
                int.from_bytes(o.data[a : a + 8], "little"),
                o.defined[a : a + 8] == _ONES8,
                a in o.pointers,
            )
        return a

    def put(self, off: int, bits: int, defined: bool, is_ptr: bool) -> None:
        o = self.fobj
        o.data[off : off + 8] = (bits & M64).to_bytes(8, "little")
        o.defined[off : off + 8] = _ONES8 if defined else _ZEROS8
        if is_ptr and defined:
            o.pointers.add(off)
            if o.shared and ptr_tag(bits) == Tag.HEAP:
                self.heap.mark_shared(bits)
        else:
            o.pointers.discard(off)

    def code_ptr(self, fn: int, index: int) -> int:
        return make_ptr(Tag.CODE, fn, index)

    # -- frames -------------------------------------------------------

    def new_frame(self, code: Code, parent: int, args: list[tuple[int, bool, bool]]) -> int:
        bits = self.heap.make(code.frame_size)
        obj = self.heap.objects[ptr_id(bits)]
        obj.data[0:8] = parent.to_bytes(8, "little")
        obj.defined[0:16] = _ONES8 + _ONES8
        if parent:
            obj.pointers.add(0)
        obj.data[8:16] = self.code_ptr(code.index, 0).to_bytes(8, "little")
        obj.pointers.add(8)
        for i, (v, d, p) in enumerate(args):
            off = reg_offset(i)
            obj.data[off : off + 8] = v.to_bytes(8, "little")
            obj.defined[off : off + 8] = _ONES8 if d else _ZEROS8
            if p and d:
                obj.pointers.add(off)
        return bits

    def save_pc(self, index: int) -> None:
        self.put(8, self.code_ptr(self.code.index, index), True, True)

    def enter(self, frame: int) -> None:
        """Make ``frame`` active and continue at the PC saved in it."""
        if ptr_tag(frame) != Tag.HEAP or ptr_offset(frame) != 0:
            raise Fault(FaultKind.BadPointer, "frame register needs a heap object pointer")
        oid = ptr_id(frame)
        if oid not in self.heap.objects:
            raise Fault(FaultKind.UseAfterFree if 0 < oid < self.heap.next_id else FaultKind.BadPointer, "dead frame")
        obj = self.heap.writable(oid)
        if obj.size < FRAME_HEADER or 8 not in obj.pointers:
            raise Fault(FaultKind.BadJumpTarget, "frame holds no saved PC")
        pc = obj.slot(8)
        code = self._code_at(pc)
        if obj.size < code.frame_size:
            raise Fault(FaultKind.OutOfBounds, f"frame too small for {code.name}")
        self.frame = frame
        self.fobj = obj
        self.code = code
        self.instrs = code.instrs
        self.pc = ptr_offset(pc)
        # the slot is stale while the frame runs; keep it history-free
        obj.data[8:16] = self.code_ptr(code.index, 0).to_bytes(8, "little")

    def _code_at(self, pc: int) -> Code:
        if ptr_tag(pc) != Tag.CODE or ptr_id(pc) >= len(self.image.functions):
            raise Fault(FaultKind.BadJumpTarget, "not a code pointer")
        code = self.image.functions[ptr_id(pc)]
        if ptr_offset(pc) >= len(code.instrs):
            raise Fault(FaultKind.BadJumpTarget, "code pointer past end of function")
        return code

    # -- main loop ----------------------------------------------------

    def run(self) -> None:
        budget = self.options.step_budget
        dispatch = self.dispatch
        try:
            while True:
                ins = self.instrs[self.pc]
                self.pc += 1
                self.steps += 1
                if not self.flags & MASK:
                    self.user_steps += 1
                if self.steps > budget:
                    raise _Budget
                try:
                    dispatch[ins.kind](ins)
                except Fault as f:
                    self.raise_fault(f, ins)
        except _End:
            pass
        except _Budget:
            self.result.budget_exceeded = True

    def end(self) -> None:
        raise _End

    def fire(self) -> None:
        """Interrupt: remember where the active frame resumes and stop."""
        self.save_pc(self.pc)
        self.int_frame = self.frame
        self.flags |= INTERRUPTED
        raise _End

    # -- faults -------------------------------------------------------

    def raise_fault(self, f: Fault, ins: CInstr, cont: int | None = None, value=None) -> None:
        cont = self.pc if cont is None else cont
        if isinstance(f, _ControlFault):
            cont, value = f.target, f.value
        if ins.dest is not None:
            # the continuation sees an undefined zero in place of the result
            self.put(ins.dest, 0, False, False)
        label = self.image.pc_label(ins.fn, cont)
        if self.in_handler:
            msg = f"{f.kind.name} inside the fault handler: {f.message}"
            self.result.faults.append(FaultRecord(FaultKind.DoubleFault, ins.label, label, msg, value))
            self.flags |= ERROR
            raise _End
        self.result.faults.append(FaultRecord(f.kind, ins.label, label, f.message, value))
        if not self.fault_handler:
            self.flags |= ERROR
            raise _End
        try:
            handler = self._code_at(self.fault_handler)
        except Fault:
            self.flags |= ERROR
            raise _End from None
        self.save_pc(cont)
        args = [
            (int(f.kind), True, False),
            (self.code_ptr(ins.fn, ins.index), True, True),
            (self.code_ptr(ins.fn, cont), True, True),
            (self.frame, True, True),
        ][: handler.nparams]
        if len(args) != handler.nparams:
            self.flags |= ERROR
            raise _End
        frame = self.new_frame(handler, 0, args)
        self.saved_mask = self.flags & MASK
        self.flags |= MASK
        self.in_handler = True
        self.enter(frame)

    # -- arithmetic ---------------------------------------------------

    def op_binary(self, ins: CInstr) -> None:
        a, ad, _ = self.val(ins.args[0])
        b, bd, _ = self.val(ins.args[1])
        self.put(ins.dest, _BINARY[ins.op](a, b), ad and bd, False)

    def op_gep(self, ins: CInstr) -> None:
        a, ad, ap = self.val(ins.args[0])
        b, bd, _ = self.val(ins.args[1])
        if ap:
            self.put(ins.dest, gep(a, signed(b)), ad and bd, True)
        else:
            self.put(ins.dest, (a + b) & M64, ad and bd, False)

    def op_mov(self, ins: CInstr) -> None:
        self.put(ins.dest, *self.val(ins.args[0]))

    def op_ptrtoint(self, ins: CInstr) -> None:
        v, d, _ = self.val(ins.args[0])
        self.put(ins.dest, v, d, False)

    def op_inttoptr(self, ins: CInstr) -> None:
        v, d, _ = self.val(ins.args[0])
        self.put(ins.dest, v, d, True)

    def op_zext(self, ins: CInstr) -> None:
        v, d, _ = self.val(ins.args[0])
        self.put(ins.dest, v & ((1 << (8 * ins.width)) - 1), d, False)

    def op_sext(self, ins: CInstr) -> None:
        v, d, _ = self.val(ins.args[0])
        bits = 8 * ins.width
        v &= (1 << bits) - 1
        if v >> (bits - 1):
            v -= 1 << bits
        self.put(ins.dest, v & M64, d, False)

    # -- memory -------------------------------------------------------

    def _address(self, a) -> int:
        bits, defined, is_ptr = self.val(a)
        if not is_ptr:
            raise Fault(FaultKind.BadPointer, "dereference of a non-pointer value")
        return bits

    def op_load(self, ins: CInstr) -> None:
        v, d, p = self.heap.read(self._address(ins.args[0]), ins.width)
        self.put(ins.dest, v, d, p)

    def op_store(self, ins: CInstr) -> None:
        addr = self._address(ins.args[0])
        v, d, p = self.val(ins.args[1])
        self.heap.write(addr, ins.width, v, d, p)

    def op_alloca(self, ins: CInstr) -> None:
        n = self._size_arg(ins.args[0])
        bits = self.heap.make(n)
        self.fobj.allocas += (ptr_id(bits),)
        self.put(ins.dest, bits, True, True)

    def _size_arg(self, a) -> int:
        n, d, p = self.val(a)
        if not d or p:
            raise Fault(FaultKind.HypercallMisuse, "object size must be a defined integer")
        return n

    # -- control flow -------------------------------------------------

    def op_jump(self, ins: CInstr) -> None:
        self.pc = ins.targets[0]

    def op_br(self, ins: CInstr) -> None:
        v, d, _ = self.val(ins.args[0])
        target = ins.targets[0] if v else ins.targets[1]
        if not d:
            raise _ControlFault("branch on an undefined value", target, (v, d))
        self.pc = target

    def op_unreachable(self, ins: CInstr) -> None:
        raise Fault(FaultKind.BadJumpTarget, "reached unreachable")

    def op_call(self, ins: CInstr) -> None:
        t, d, p = self.val(ins.args[0])
        if not d:
            raise _ControlFault("call through an undefined value", self.pc, (t, d))
        if not p or ptr_tag(t) != Tag.CODE or ptr_offset(t) != 0:
            raise Fault(FaultKind.BadJumpTarget, "call target is not a function")
        code = self._code_at(t)
        args = [self.val(a) for a in ins.args[1:]]
        if len(args) != code.nparams:
            raise Fault(FaultKind.CallArityMismatch, f"{code.name} takes {code.nparams}, got {len(args)}")
        self.save_pc(self.pc)
        frame = self.new_frame(code, self.frame, args)
        self.enter(frame)

    def op_ret(self, ins: CInstr) -> None:
        value = self.val(ins.args[0]) if ins.args else _UNDEF
        obj = self.fobj
        parent = obj.slot(0) if 0 in obj.pointers else 0
        for a in obj.allocas:
            self.heap.objects.pop(a, None)
        self.heap.objects.pop(ptr_id(self.frame), None)
        if not parent:
            raise _End
        self.enter(parent)
        call = self.instrs[self.pc - 1] if self.pc else None
        if call is not None and call.op == "call" and call.dest is not None:
            self.put(call.dest, *value)

    # -- hypercalls ---------------------------------------------------

    def hc_obj_make(self, ins: CInstr) -> None:
        self.put(ins.dest, self.heap.make(self._size_arg(ins.args[0])), True, True)

    def hc_obj_free(self, ins: CInstr) -> None:
        bits, d, p = self.val(ins.args[0])
        if not (d and p):
            raise Fault(FaultKind.InvalidFree, "free of a non-pointer value")
        self.heap.free(bits)

    def hc_obj_size(self, ins: CInstr) -> None:
        self.put(ins.dest, self.heap.size(self._address(ins.args[0])), True, False)

    def hc_obj_resize(self, ins: CInstr) -> None:
        self.heap.resize(self._address(ins.args[0]), self._size_arg(ins.args[1]))

    def hc_obj_shared(self, ins: CInstr) -> None:
        bits, d, p = self.val(ins.args[0])
        if d and p:
            self.heap.mark_shared(bits)

    def hc_trace(self, ins: CInstr) -> None:
        bits, d, p = self.val(ins.args[0])
        if not (d and p):
            raise Fault(FaultKind.HypercallMisuse, "trace needs a pointer to a string")
        out = bytearray()
        try:
            while len(out) < 4096:
                c, cd, _ = self.heap.read(gep(bits, len(out)), 1)
                if not cd:
                    raise Fault(FaultKind.HypercallMisuse, "trace of undefined bytes")
                if c == 0:
                    break
                out.append(c)
        except Fault as f:
            if f.kind != FaultKind.OutOfBounds or not out:
                raise Fault(FaultKind.HypercallMisuse, f"bad trace message: {f}") from None
        self.result.traces.append(bytes(out))

    def _interrupt(self, ins: CInstr, fire: bool) -> None:
        fire = self.oracle.interrupt(ins.label, fire)
        self.result.interrupts.append((ins.label, fire))
        if fire:
            self.fire()

    def hc_interrupt_cfl(self, ins: CInstr) -> None:
        if self.flags & MASK:
            return
        fire = True
        if self.options.tau_cfl:
            key = (ins.fn, ins.index)
            fire = key in self.cfl_pcs
            self.cfl_pcs.add(key)
        self._interrupt(ins, fire)

    def hc_interrupt_mem(self, ins: CInstr) -> None:
        if self.flags & MASK:
            return
        fire = True
        if self.options.tau_mem:
            bits, d, p = self.val(ins.args[0])
            kind, width = ins.args[1], ins.width
            fire = False
            if d and p:
                try:
                    oid, off = self.heap.resolve(bits, width, write=kind == MEM_STORE)
                except Fault:
                    oid = None
                if oid is not None and self.heap.objects[oid].shared:
                    if kind == MEM_STORE:
                        fire = True
                    else:
                        key = (oid, off, width)
                        fire = key in self.mem_loads
                        self.mem_loads.add(key)
        self._interrupt(ins, fire)

    def hc_choose(self, ins: CInstr) -> None:
        n, d, p = self.val(ins.args[0])
        if not d or p or not 1 <= n < (1 << 32):
            raise Fault(FaultKind.HypercallMisuse, f"choose needs a bound >= 1, got {signed(n)}")
        v = self.oracle.choose(n)
        if not 0 <= v < n:
            raise ValueError(f"oracle answered {v} for choose({n})")
        self.result.choices.append((v, n))
        self.put(ins.dest, v, True, False)

    def hc_control(self, ins: CInstr) -> None:
        action = ins.args[0][0]
        reg = ins.args[1][0]
        if action == 0:
            self.put(ins.dest, *self._get_register(reg, ins))
            return
        v, d, p = self.val(ins.args[2])
        if not d:
            raise Fault(FaultKind.HypercallMisuse, "control with an undefined value")
        if reg == REG_FLAGS:
            old = self.flags
            if action == 1:
                self.flags = v & 0xF
            elif action == 2:
                self.flags |= v & 0xF
            else:
                self.flags &= ~v & 0xF
            if self.flags & INTERRUPTED and not old & INTERRUPTED:
                # explicit yield: behaves like an interrupt that always fires
                self.fire()
            return
        if action != 1:
            raise Fault(FaultKind.HypercallMisuse, "or/clear apply to the flags register only")
        if reg == REG_FRAME:
            if not v:
                self.int_frame = 0
                raise _End
            if not p:
                raise Fault(FaultKind.BadPointer, "frame register needs a pointer")
            self.enter(v)
            if self.in_handler:
                self.in_handler = False
                self.flags = (self.flags & ~MASK) | self.saved_mask
        elif reg == REG_SCHED:
            self.sched = v if p else 0
        elif reg == REG_FAULT:
            if v and not (p and ptr_tag(v) == Tag.CODE):
                raise Fault(FaultKind.HypercallMisuse, "fault handler must be a code pointer")
            self.fault_handler = v
        elif reg == REG_GLOBALS:
            self.heap.globals_ptr = v if p else 0
        elif reg == REG_CONSTANTS:
            if self.booted:
                raise Fault(FaultKind.HypercallMisuse, "constants register is fixed after boot")
            self.heap.constants_ptr = v if p else 0
        else:
            raise Fault(FaultKind.HypercallMisuse, f"register {reg} is read-only")

    booted = True

    def _get_register(self, reg: int, ins: CInstr) -> tuple[int, bool, bool]:
        if reg == REG_FRAME:
            return self.frame, True, bool(self.frame)
        if reg == REG_GLOBALS:
            return self.heap.globals_ptr, True, bool(self.heap.globals_ptr)
        if reg == REG_CONSTANTS:
            return self.heap.constants_ptr, True, bool(self.heap.constants_ptr)
        if reg == REG_SCHED:
            return self.sched, True, bool(self.sched)
        if reg == REG_FAULT:
            return self.fault_handler, True, bool(self.fault_handler)
        if reg == REG_FLAGS:
            return self.flags, True, False
        if reg == REG_PC:
            return self.code_ptr(ins.fn, ins.index), True, True
        raise Fault(FaultKind.HypercallMisuse, f"no register {reg}")

    # -- transition boundary ------------------------------------------

    def finish(self, initial: bool = False) -> Transition:
        r = self.result
        r.error = bool(self.flags & ERROR)
        r.accept = bool(self.flags & ACCEPT)
        r.steps = self.steps
        r.user_steps = self.user_steps
        if r.budget_exceeded:
            return r
        if not r.error and self.user_steps == 0 and not initial:
            r.terminal = True
            return r
        roots = (self.sched, self.heap.globals_ptr, self.heap.constants_ptr, self.int_frame)
        r.snapshot = self.heap.snapshot(roots, fault_handler=self.fault_handler, error=r.error, accept=r.accept)
        return r


class _ControlFault(Fault):
    """A control transfer that depends on an undefined value."""

    def __init__(self, message: str, target: int, value: tuple[int, bool]):
        super().__init__(FaultKind.UndefinedControl, message)
        self.target = target
        self.value = value


def _sdiv(a: int, b: int) -> int:
    if b == 0:
        raise Fault(FaultKind.DivisionByZero, "sdiv by zero")
    a, b = signed(a), signed(b)
    q = abs(a) // abs(b)
    return (q if (a < 0) == (b < 0) else -q) & M64


def _srem(a: int, b: int) -> int:
    if b == 0:
        raise Fault(FaultKind.DivisionByZero, "srem by zero")
    sa, sb = signed(a), signed(b)
    q = abs(sa) // abs(sb)
    q = q if (sa < 0) == (sb < 0) else -q
    return (sa - sb * q) & M64


def _udiv(a: int, b: int) -> int:
    if b == 0:
        raise Fault(FaultKind.DivisionByZero, "udiv by zero")
    return a // b


def _urem(a: int, b: int) -> int:
    if b == 0:
        raise Fault(FaultKind.DivisionByZero, "urem by zero")
    return a % b


_BINARY = {
    "add": lambda a, b: (a + b) & M64,
    "sub": lambda a, b: (a - b) & M64,
    "mul": lambda a, b: (a * b) & M64,
    "udiv": _udiv,
    "sdiv": _sdiv,
    "urem": _urem,
    "srem": _srem,
    "and": lambda a, b: a & b,
    "or": lambda a, b: a | b,
    "xor": lambda a, b: a ^ b,
    "shl": lambda a, b: (a << (b & 63)) & M64,
    "lshr": lambda a, b: a >> (b & 63),
    "ashr": lambda a, b: (signed(a) >> (b & 63)) & M64,
    "icmp.eq": lambda a, b: int(a == b),
    "icmp.ne": lambda a, b: int(a != b),
    "icmp.ult": lambda a, b: int(a < b),
    "icmp.ule": lambda a, b: int(a <= b),
    "icmp.slt": lambda a, b: int(signed(a) < signed(b)),
    "icmp.sle": lambda a, b: int(signed(a) <= signed(b)),
}


def boot(image: Image, oracle: ChoiceOracle | None = None, options: VMOptions | None = None) -> Transition:
    """Run ``__boot`` on a fresh machine; its successor is the initial state."""
    heap = Heap()
    g = heap.add(image.globals_object())
    heap.objects[g].shared = True
    c = heap.add(image.constants_object())
    heap.globals_ptr = make_ptr(Tag.HEAP, g)
    heap.constants_ptr = make_ptr(Tag.HEAP, c)
    m = Machine(image, heap, oracle or ZeroOracle(), options or VMOptions())
    m.booted = False
    code = image.functions[image.by_name[BOOT]]
    main = image.code_ptr("main") if "main" in image.by_name else 0
    args = [(main, True, bool(main))][: code.nparams]
    args += [(0, True, False)] * (code.nparams - len(args))
    m.enter(m.new_frame(code, 0, args))
    m.run()
    return m.finish(initial=True)


def run_transition(
    image: Image,
    snapshot: Snapshot,
    oracle: ChoiceOracle | None = None,
    options: VMOptions | None = None,
) -> Transition:
    """Execute the scheduler in ``snapshot`` and whatever it transfers to.

    The scheduler receives the frame saved by the previous interrupt (or
    null) as its only argument.  A run that never leaves masked mode and
    raises no error is terminal: the state has no successors.
    """
    heap = snapshot.restore()
    m = Machine(image, heap, oracle or ZeroOracle(), options or VMOptions())
    m.sched = snapshot.roots[0]
    m.fault_handler = snapshot.fault_handler
    code = image.functions[image.by_name[SCHEDULER]]
    prev = snapshot.roots[3]
    args = [(prev, True, bool(prev))][: code.nparams]
    m.enter(m.new_frame(code, 0, args))
    m.run()
    return m.finish()
