"""The minimal OS: threads, mutexes, malloc/free, assert and fault reporting.

It is plain GIR linked under the user program.  User code reaches it
through ordinary calls; the VM only knows about ``__boot`` and
``scheduler`` by name.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

from ..gir import InstrumentationPolicy, Program, instrument, link, parse_program, set_constant

PRELUDE = "mos.gir"
MALLOC_CAN_FAIL = "__mos_malloc_can_fail"

# entry points user programs may call
API = (
    "thread_create",
    "thread_exit",
    "thread_yield",
    "thread_join",
    "mutex_init",
    "mutex_lock",
    "mutex_unlock",
    "malloc",
    "free",
    "assert",
)


def prelude_source() -> str:
    return resources.files(__package__).joinpath("prelude", PRELUDE).read_text()


def abi_header() -> str:
    return resources.files(__package__).joinpath("prelude", "abi.h").read_text()


@lru_cache(maxsize=None)
def _prelude() -> Program:
    return parse_program(prelude_source())


def prelude_program() -> Program:
    import copy

    return copy.deepcopy(_prelude())


def build(
    user: str | Program,
    *,
    policy: InstrumentationPolicy | None = None,
    malloc_can_fail: bool = False,
    prelude: str | Program | None = None,
) -> Program:
    """Parse (if needed), instrument and link ``user`` against the OS.

    Only the user unit is instrumented; the prelude places its own
    interrupt points.  ``policy=None`` uses the default policy; pass
    ``InstrumentationPolicy(False, False)`` to keep the program as is.
    """
    unit = parse_program(user, standalone=False) if isinstance(user, str) else user
    unit = instrument(unit, policy)
    if prelude is None:
        os_unit = prelude_program()
    elif isinstance(prelude, str):
        os_unit = parse_program(prelude, standalone=False)
    else:
        os_unit = prelude
    program = link([unit, os_unit])
    if malloc_can_fail and MALLOC_CAN_FAIL in program.symbols():
        program = set_constant(program, MALLOC_CAN_FAIL, b"\x01")
    return program


__all__ = ["API", "MALLOC_CAN_FAIL", "abi_header", "build", "prelude_program", "prelude_source"]
