from __future__ import annotations

from .ir import Diagnostic, Label, Program, Reg, Sym


def _sym_refs(program: Program):
    for fn in program.functions:
        for b in fn.blocks:
            for ins in b.instrs:
                for a in ins.args:
                    if isinstance(a, Sym):
                        yield fn, ins, a.name


def unresolved(program: Program) -> list[str]:
    """Names referenced with ``@`` or ``call`` that no unit item defines."""
    defined = program.symbols()
    seen: list[str] = []
    for _, _, name in _sym_refs(program):
        if name not in defined and name not in seen:
            seen.append(name)
    return seen


def validate(program: Program, *, resolve: bool = True, linked: bool = False) -> list[Diagnostic]:
    """Check Program/Function invariants; returns one Diagnostic per violation.

    ``resolve`` demands every symbol resolve (externs count as resolved),
    ``linked`` additionally demands a ``__boot`` function and no externs.
    """
    diags: list[Diagnostic] = []
    kinds: dict[str, str] = {}
    decls = (
        [(g.name, "global", g.line) for g in program.globals]
        + [(c.name, "const", c.line) for c in program.constants]
        + [(f.name, "fn", f.line) for f in program.functions]
    )
    for name, kind, line in decls:
        if name in kinds:
            diags.append(Diagnostic(line, 1, f"duplicate symbol {name!r}"))
        kinds[name] = kind
    arity = {f.name: f.nparams for f in program.functions}
    externs = set(program.externs)

    for fn in program.functions:
        if fn.nparams > fn.nregs:
            diags.append(Diagnostic(fn.line, 1, f"{fn.name}: {fn.nparams} params exceed {fn.nregs} registers"))
        if not fn.blocks:
            diags.append(Diagnostic(fn.line, 1, f"{fn.name}: function has no blocks"))
        labels: set[str] = set()
        for b in fn.blocks:
            if b.label in labels:
                diags.append(Diagnostic(fn.line, 1, f"{fn.name}: duplicate label {b.label!r}"))
            labels.add(b.label)
        for b in fn.blocks:
            if not b.instrs or not b.instrs[-1].is_terminator:
                line = b.instrs[-1].line if b.instrs else fn.line
                diags.append(Diagnostic(line, 1, f"{fn.name}: block {b.label!r} does not end in a terminator"))
            for ins in b.instrs[:-1]:
                if ins.is_terminator:
                    diags.append(Diagnostic(ins.line, 1, f"{fn.name}: {ins.op} in the middle of block {b.label!r}"))
            for ins in b.instrs:
                if ins.dest is not None and not 0 <= ins.dest < fn.nregs:
                    diags.append(Diagnostic(ins.line, 1, f"register %{ins.dest} out of range (regs {fn.nregs})"))
                for a in ins.args:
                    if isinstance(a, Reg) and not 0 <= a.index < fn.nregs:
                        diags.append(Diagnostic(ins.line, 1, f"register %{a.index} out of range (regs {fn.nregs})"))
                    elif isinstance(a, Label) and a.name not in labels:
                        diags.append(Diagnostic(ins.line, 1, f"branch to unknown label {a.name!r}"))
                    elif isinstance(a, Sym) and resolve and a.name not in kinds and a.name not in externs:
                        diags.append(Diagnostic(ins.line, 1, f"unresolved reference @{a.name}"))
                if ins.op == "call" and isinstance(ins.args[0], Sym):
                    target = ins.args[0].name
                    if target in kinds and kinds[target] != "fn":
                        diags.append(Diagnostic(ins.line, 1, f"call target {target!r} is not a function"))
                    elif target in arity and arity[target] != len(ins.args) - 1:
                        diags.append(
                            Diagnostic(
                                ins.line,
                                1,
                                f"arity mismatch: {target} takes {arity[target]} argument(s), got {len(ins.args) - 1}",
                            )
                        )
    if linked:
        boots = [f for f in program.functions if f.name == Program.entry]
        if len(boots) != 1:
            diags.append(Diagnostic(0, 0, f"expected exactly one {Program.entry} function, found {len(boots)}"))
        for name in program.externs:
            if name not in kinds:
                diags.append(Diagnostic(0, 0, f"unresolved extern {name!r}"))
    return diags
