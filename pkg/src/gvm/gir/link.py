from __future__ import annotations

import copy

from .ir import ConstDecl, Diagnostic, GIRError, Program
from .validate import validate


def link(units: list[Program]) -> Program:
    """Merge translation units into one executable Program.

    Definitions must be disjoint across units; every extern has to be
    defined by some unit and the result must contain ``__boot``.
    """
    out = Program()
    owner: dict[str, int] = {}
    diags: list[Diagnostic] = []
    for n, unit in enumerate(units):
        unit = copy.deepcopy(unit)
        for name in unit.symbols():
            if name in owner:
                diags.append(Diagnostic(0, 0, f"duplicate definition of {name!r} (units {owner[name]} and {n})"))
            owner[name] = n
        out.globals.extend(unit.globals)
        out.constants.extend(unit.constants)
        out.functions.extend(unit.functions)
        out.externs.extend(unit.externs)
    if diags:
        raise GIRError(diags)
    defined = out.symbols()
    missing = sorted({e for e in out.externs if e not in defined})
    if missing:
        raise GIRError([Diagnostic(0, 0, f"unresolved extern {m!r}") for m in missing])
    out.externs = []
    diags = validate(out, linked=True)
    if diags:
        raise GIRError(diags)
    return out


def set_constant(program: Program, name: str, data: bytes) -> Program:
    """Copy of ``program`` with constant ``name`` re-initialised to ``data``."""
    out = copy.deepcopy(program)
    for i, c in enumerate(out.constants):
        if c.name == name:
            out.constants[i] = ConstDecl(name, bytes(data), line=c.line)
            return out
    raise KeyError(name)
