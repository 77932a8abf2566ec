"""Line-oriented parser for GIR source text.

Grammar (one item per line, ``;`` starts a comment)::

    global <name> <size> [= <hexbytes>]
    const <name> = <hexbytes>
    extern <name>
    fn <name>(<nparams>) [regs <n>] {
    <label>:
        [%d =] <opcode> <operand>, ...
    }

Operands are registers ``%3``, immediates (decimal or ``0x`` hex),
symbol addresses ``@name`` and bare block labels.
"""

from __future__ import annotations

import re

from .ir import (
    BINARY_OPS,
    CONTROL_ACTIONS,
    CONTROL_REGS,
    HYPERCALLS,
    MEM_LOAD,
    MEM_STORE,
    UNARY_OPS,
    WIDTH_OPS,
    WIDTHS,
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
    base_op,
    is_known_op,
    mem_kind,
)

_IDENT = r"[A-Za-z_$][\w.$]*"
_FN_HEADER = re.compile(
    rf"^fn\s+({_IDENT})\s*\(\s*(\d*)\s*\)\s*(?:regs\s+(\d+)\s*)?\{{(.*)$"
)
_LABEL = re.compile(rf"^({_IDENT})\s*:\s*(.*)$")
_DEST = re.compile(r"^%(\d+)\s*=\s*(.*)$")
_INT = re.compile(r"^-?(0x[0-9a-fA-F]+|\d+)$")
_CALL = re.compile(rf"^(@?{_IDENT}|%\d+)\s*\((.*)\)$")
_MEMKIND = re.compile(r"^(load|store)\.(\d+)$")


class _Parser:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.diags: list[Diagnostic] = []
        self.program = Program()

    def error(self, line: int, col: int, msg: str) -> None:
        self.diags.append(Diagnostic(line, col, msg))

    def run(self) -> Program:
        i = 0
        while i < len(self.lines):
            lineno = i + 1
            text = _strip(self.lines[i])
            i += 1
            if not text:
                continue
            if text.startswith("fn"):
                i = self.function(text, lineno, i)
            elif text.startswith("global"):
                self.global_decl(text, lineno)
            elif text.startswith("const"):
                self.const_decl(text, lineno)
            elif text.startswith("extern"):
                parts = text.split()
                if len(parts) != 2:
                    self.error(lineno, 1, "syntax error: expected 'extern <name>'")
                else:
                    self.program.externs.append(parts[1])
            else:
                self.error(lineno, 1, f"syntax error: unexpected {text.split()[0]!r}")
        return self.program

    def global_decl(self, text: str, lineno: int) -> None:
        head, eq, init = text.partition("=")
        parts = head.split()
        if len(parts) != 3 or not parts[2].isdigit():
            self.error(lineno, 1, "syntax error: expected 'global <name> <size> [= hex]'")
            return
        size = int(parts[2])
        data = None
        if eq:
            data = self.hexbytes(init, lineno, text.index("=") + 2)
            if data is None:
                return
            if len(data) > size:
                self.error(lineno, 1, f"initializer of {parts[1]} exceeds its size")
                return
        self.program.globals.append(GlobalDecl(parts[1], size, data, line=lineno))

    def const_decl(self, text: str, lineno: int) -> None:
        head, eq, init = text.partition("=")
        parts = head.split()
        if len(parts) != 2 or not eq:
            self.error(lineno, 1, "syntax error: expected 'const <name> = hex'")
            return
        data = self.hexbytes(init, lineno, text.index("=") + 2)
        if data is not None:
            self.program.constants.append(ConstDecl(parts[1], data, line=lineno))

    def hexbytes(self, text: str, lineno: int, col: int) -> bytes | None:
        digits = "".join(text.split())
        if digits.startswith(("0x", "0X")):
            digits = digits[2:]
        try:
            return bytes.fromhex(digits)
        except ValueError:
            self.error(lineno, col, "syntax error: bad hex byte literal")
            return None

    def function(self, text: str, lineno: int, i: int) -> int:
        m = _FN_HEADER.match(text)
        if not m:
            self.error(lineno, 1, "syntax error: expected 'fn <name>(<nparams>) regs <n> {'")
            # skip to the closing brace so one bad header yields one diagnostic
            while i < len(self.lines) and _strip(self.lines[i]) != "}":
                i += 1
            return i + 1
        name, nparams, nregs, rest = m.groups()
        fn = Function(name, int(nparams or 0), -1, [], line=lineno)
        body: list[tuple[int, str]] = []
        closed = False
        pending = [(lineno, rest.strip())]
        while True:
            for ln, chunk in pending:
                if chunk.endswith("}"):
                    chunk = chunk[:-1].strip()
                    closed = True
                if chunk:
                    body.append((ln, chunk))
                if closed:
                    break
            if closed or i >= len(self.lines):
                break
            pending = [(i + 1, _strip(self.lines[i]))]
            i += 1
        if not closed:
            self.error(lineno, 1, f"syntax error: function {name} is missing '}}'")
        for ln, chunk in body:
            self.body_line(fn, chunk, ln)
        used = max(
            [a.index for b in fn.blocks for ins in b.instrs for a in ins.args if isinstance(a, Reg)]
            + [ins.dest for b in fn.blocks for ins in b.instrs if ins.dest is not None]
            + [-1]
        )
        fn.nregs = int(nregs) if nregs is not None else max(used + 1, fn.nparams)
        self.program.functions.append(fn)
        return i

    def body_line(self, fn: Function, text: str, lineno: int) -> None:
        m = _LABEL.match(text)
        if m and not text.startswith("%"):
            fn.blocks.append(Block(m.group(1)))
            text = m.group(2).strip()
            if not text:
                return
        if not fn.blocks:
            fn.blocks.append(Block("entry"))
        ins = self.instruction(text, lineno)
        if ins is not None:
            fn.blocks[-1].instrs.append(ins)

    def instruction(self, text: str, lineno: int) -> Instruction | None:
        dest = None
        m = _DEST.match(text)
        if m:
            dest = int(m.group(1))
            text = m.group(2).strip()
        op, _, rest = text.partition(" ")
        rest = rest.strip()
        col = 1
        if not is_known_op(op):
            self.error(lineno, col, f"syntax error: unknown opcode {op!r}")
            return None
        if op == "call":
            return self.call(rest, dest, lineno)
        raw = [a.strip() for a in rest.split(",")] if rest else []
        return self.shaped(op, raw, dest, lineno)

    def call(self, rest: str, dest: int | None, lineno: int) -> Instruction | None:
        m = _CALL.match(rest)
        if not m:
            self.error(lineno, 1, "syntax error: expected 'call <fn>(<args>)'")
            return None
        target, argtext = m.groups()
        tgt = Reg(int(target[1:])) if target.startswith("%") else Sym(target.lstrip("@"))
        args = []
        for a in (x.strip() for x in argtext.split(",")) if argtext.strip() else []:
            v = self.value(a, lineno)
            if v is None:
                return None
            args.append(v)
        return Instruction("call", (tgt, *args), dest, line=lineno)

    def shaped(self, op: str, raw: list[str], dest: int | None, lineno: int) -> Instruction | None:
        head, _ = base_op(op)

        def need(n: int, has_dest: bool) -> bool:
            if len(raw) != n:
                self.error(lineno, 1, f"arity mismatch: {op} takes {n} operand(s), got {len(raw)}")
                return False
            if has_dest and dest is None:
                self.error(lineno, 1, f"{op} requires a destination register")
                return False
            if not has_dest and dest is not None:
                self.error(lineno, 1, f"{op} produces no value")
                return False
            return True

        if op in BINARY_OPS:
            ok, kinds = need(2, True), "vv"
        elif op in UNARY_OPS or head in WIDTH_OPS or head == "load":
            ok, kinds = need(1, True), "v"
        elif head == "store":
            ok, kinds = need(2, False), "vv"
        elif op == "jump":
            ok, kinds = need(1, False), "L"
        elif op == "br":
            ok, kinds = need(3, False), "vLL"
        elif op == "ret":
            if len(raw) > 1 or dest is not None:
                self.error(lineno, 1, "arity mismatch: ret takes at most 1 operand")
                return None
            ok, kinds = True, "v" * len(raw)
        elif op == "unreachable":
            ok, kinds = need(0, False), ""
        elif op == "hc.control":
            return self.control(raw, dest, lineno)
        elif op == "hc.interrupt_mem":
            ok, kinds = need(2, False), "vm"
        else:
            count, has_value = HYPERCALLS[op]
            ok, kinds = need(count, has_value), "v" * count
        if not ok:
            return None
        args = []
        for kind, text in zip(kinds, raw):
            if kind == "v":
                v = self.value(text, lineno)
            elif kind == "L":
                v = Label(text) if re.fullmatch(_IDENT, text) else None
                if v is None:
                    self.error(lineno, 1, f"syntax error: bad label {text!r}")
            else:
                v = self.memkind(text, lineno)
            if v is None:
                return None
            args.append(v)
        return Instruction(op, tuple(args), dest, line=lineno)

    def control(self, raw: list[str], dest: int | None, lineno: int) -> Instruction | None:
        if not raw:
            self.error(lineno, 1, "arity mismatch: hc.control takes 2 or 3 operands")
            return None
        action = self.keyword(raw[0], CONTROL_ACTIONS, lineno)
        if action is None:
            return None
        want = 2 if action == CONTROL_ACTIONS["get"] else 3
        if len(raw) != want:
            self.error(lineno, 1, f"arity mismatch: hc.control {raw[0]} takes {want} operands")
            return None
        if (want == 2) != (dest is not None):
            self.error(lineno, 1, "hc.control get needs a destination; set/or/clear take none")
            return None
        reg = self.keyword(raw[1], CONTROL_REGS, lineno)
        if reg is None:
            return None
        args: list = [Imm(action), Imm(reg)]
        if want == 3:
            v = self.value(raw[2], lineno)
            if v is None:
                return None
            args.append(v)
        return Instruction("hc.control", tuple(args), dest, line=lineno)

    def keyword(self, text: str, table: dict[str, int], lineno: int) -> int | None:
        if text in table:
            return table[text]
        if _INT.match(text) and int(text, 0) in table.values():
            return int(text, 0)
        self.error(lineno, 1, f"syntax error: unknown keyword {text!r}")
        return None

    def memkind(self, text: str, lineno: int) -> Imm | None:
        m = _MEMKIND.match(text)
        if m and int(m.group(2)) in WIDTHS:
            kind = MEM_LOAD if m.group(1) == "load" else MEM_STORE
            return Imm(mem_kind(kind, int(m.group(2))))
        if _INT.match(text):
            return Imm(int(text, 0))
        self.error(lineno, 1, f"syntax error: bad access kind {text!r}")
        return None

    def value(self, text: str, lineno: int) -> Reg | Imm | Sym | None:
        if text.startswith("%") and text[1:].isdigit():
            return Reg(int(text[1:]))
        if text.startswith("@") and re.fullmatch(_IDENT, text[1:]):
            return Sym(text[1:])
        if _INT.match(text):
            return Imm(int(text, 0))
        self.error(lineno, 1, f"syntax error: bad operand {text!r}")
        return None


def _strip(line: str) -> str:
    return line.split(";", 1)[0].strip()


def parse_program(text: str, *, standalone: bool = True) -> Program:
    """Parse GIR text and check all Program invariants.

    With ``standalone`` every reference must resolve inside ``text``
    (or be declared ``extern``); otherwise unresolved names are recorded
    as implicit externs to be bound by :func:`gvm.gir.link`.
    """
    from .validate import unresolved, validate

    p = _Parser(text)
    program = p.run()
    if p.diags:
        raise GIRError(p.diags)
    if not standalone:
        known = set(program.externs)
        for name in unresolved(program):
            if name not in known:
                program.externs.append(name)
                known.add(name)
    diags = validate(program)
    if diags:
        raise GIRError(diags)
    return program
