from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gvm.gir import (
    GIRError,
    Imm,
    InstrumentationPolicy,
    Reg,
    count_interrupt_points,
    instrument,
    link,
    parse_program,
    print_program,
    set_constant,
    validate,
)
from gvm.gir.instrument import back_edge_targets, frame_local_registers
from gvm.gir.ir import MEM_LOAD, MEM_STORE, base_op, mem_kind, split_mem_kind

BOOT = "fn __boot(1) {\n    ret\n}\n"


def messages(src: str, **kw) -> list[str]:
    with pytest.raises(GIRError) as e:
        parse_program(src, **kw)
    return [d.message for d in e.value.diagnostics]


def test_parse_basic_function():
    p = parse_program(
        """
        global g 8 = 0102
        const c = 41420000
        fn add(2) {
            %2 = add %0, %1
            ret %2
        }
        """
    )
    fn = p.function("add")
    assert (fn.nparams, fn.nregs) == (2, 3)
    assert [i.op for i in fn.blocks[0].instrs] == ["add", "ret"]
    assert p.globals[0].init == b"\x01\x02"
    assert p.constants[0].data == b"AB\x00\x00"


def test_one_line_function_and_explicit_regs():
    p = parse_program("fn f() regs 4 { ret }")
    assert p.function("f").nregs == 4
    assert p.function("f").blocks[0].label == "entry"


def test_comments_and_hex_immediates():
    p = parse_program("fn f() {\n  %0 = mov 0x10 ; sixteen\n  ret %0\n}")
    assert p.function("f").blocks[0].instrs[0].args == (Imm(16),)


def test_control_and_interrupt_keywords():
    p = parse_program(
        "fn f(1) {\n  %1 = hc.control get, flags\n  hc.control or, flags, 4\n"
        "  hc.interrupt_mem %0, store.4\n  ret\n}"
    )
    ins = p.function("f").blocks[0].instrs
    assert ins[0].args == (Imm(0), Imm(5))
    assert ins[1].args == (Imm(2), Imm(5), Imm(4))
    assert ins[2].args == (Reg(0), Imm(mem_kind(MEM_STORE, 4)))


@pytest.mark.parametrize(
    "src, fragment",
    [
        ("fn f() {\n  %0 = frob 1\n  ret\n}", "unknown opcode"),
        ("fn f() {\n  %0 = add 1\n  ret\n}", "arity mismatch"),
        ("fn f() {\n  add 1, 2\n  ret\n}", "requires a destination"),
        ("fn f() {\n  jump nowhere\n}", "unknown label"),
        ("fn f() {\n  %0 = mov 1\n}", "does not end in a terminator"),
        ("fn f() {\n  ret\n  ret\n}", "in the middle of block"),
        ("fn f() regs 1 {\n  %3 = mov 1\n  ret\n}", "out of range"),
        ("fn f() {\n  ret\n}\nfn f() {\n  ret\n}", "duplicate symbol"),
        ("fn f() {\n  call g(1)\n  ret\n}\nfn g() {\n  ret\n}", "arity mismatch"),
        ("fn f() {\n  %0 = mov @nothing\n  ret %0\n}", "unresolved reference"),
        ("global g 8\nfn f() {\n  call g()\n  ret\n}", "not a function"),
        ("fn f(3) regs 2 {\n  ret\n}", "exceed"),
        ("fn f() {\n  %0 = load.3 %0\n  ret\n}", "unknown opcode"),
    ],
)
def test_diagnostics(src, fragment):
    assert any(fragment in m for m in messages(src))


def test_diagnostic_carries_line():
    with pytest.raises(GIRError) as e:
        parse_program("fn f() {\n  %0 = mov 1\n  %0 = frob 2\n  ret\n}")
    assert e.value.diagnostics[0].line == 3


def test_unresolved_names_become_externs_when_not_standalone():
    p = parse_program("fn main() {\n  call helper()\n  ret\n}", standalone=False)
    assert p.externs == ["helper"]


def test_link_resolves_externs_and_requires_boot():
    user = parse_program("fn main() {\n  call helper()\n  ret\n}", standalone=False)
    lib = parse_program("fn helper() {\n  ret\n}\n" + BOOT)
    linked = link([user, lib])
    assert linked.externs == []
    assert {f.name for f in linked.functions} == {"main", "helper", "__boot"}
    with pytest.raises(GIRError, match="__boot"):
        link([user, parse_program("fn helper() {\n  ret\n}")])


def test_link_rejects_duplicates_and_missing():
    a = parse_program("fn f() {\n  ret\n}\n" + BOOT)
    with pytest.raises(GIRError, match="duplicate definition"):
        link([a, parse_program("fn f() {\n  ret\n}")])
    b = parse_program("fn g() {\n  call h()\n  ret\n}", standalone=False)
    with pytest.raises(GIRError, match="unresolved extern"):
        link([a, b])


def test_set_constant_copies():
    p = parse_program("const k = 00\n" + BOOT)
    q = set_constant(p, "k", b"\x01")
    assert p.constants[0].data == b"\x00" and q.constants[0].data == b"\x01"
    with pytest.raises(KeyError):
        set_constant(p, "missing", b"")


def test_mem_kind_roundtrip():
    for kind in (MEM_LOAD, MEM_STORE):
        for w in (1, 2, 4, 8):
            assert split_mem_kind(mem_kind(kind, w)) == (kind, w)
    assert base_op("load.8") == ("load", 8)
    assert base_op("icmp.eq") == ("icmp.eq", None)


LOOP = """
global g 8
fn f(1) {
    %1 = alloca 8
    %2 = gep %1, 0
    jump head
head:
    store.8 %2, 1
    %3 = load.8 @g
    store.8 %0, %3
    br %3, head, out
out:
    ret
}
"""


def test_frame_locals_and_back_edges():
    fn = parse_program(LOOP).function("f")
    assert frame_local_registers(fn) == {1, 2}
    assert back_edge_targets(fn) == {"head"}


def test_instrument_inserts_expected_points():
    p = instrument(parse_program(LOOP))
    ins = p.function("f").block("head").instrs
    assert ins[0].op == "hc.interrupt_cfl"
    ops = [i.op for i in ins]
    # the frame-local store gets no marker, the global load and parameter store do
    assert ops == ["hc.interrupt_cfl", "store.8", "hc.interrupt_mem", "load.8", "hc.interrupt_mem", "store.8", "br"]
    assert count_interrupt_points(p) == {"hc.interrupt_cfl": 1, "hc.interrupt_mem": 2}


def test_instrument_is_idempotent_and_respects_policy():
    p = parse_program(LOOP)
    once = instrument(p)
    assert print_program(instrument(once)) == print_program(once)
    assert count_interrupt_points(instrument(p, InstrumentationPolicy(False, False))) == {
        "hc.interrupt_cfl": 0,
        "hc.interrupt_mem": 0,
    }
    assert count_interrupt_points(instrument(p, InstrumentationPolicy(exempt=frozenset({"f"})))) == {
        "hc.interrupt_cfl": 0,
        "hc.interrupt_mem": 0,
    }
    with pytest.raises(ValueError):
        instrument(p, InstrumentationPolicy(exempt=frozenset({"nope"})))


def test_instrument_leaves_scheduler_alone():
    p = parse_program("global g 8\nfn scheduler(1) {\n  %1 = load.8 @g\n  ret\n}")
    assert count_interrupt_points(instrument(p))["hc.interrupt_mem"] == 0


# -- printer round trip -------------------------------------------------------

_regs = st.integers(0, 5).map(lambda i: f"%{i}")
_vals = st.one_of(_regs, st.integers(-(2**63), 2**64 - 1).map(str), st.just("@g"))
_binops = st.sampled_from(["add", "sub", "mul", "and", "or", "xor", "shl", "icmp.eq", "icmp.slt", "gep", "udiv"])


@st.composite
def _instr(draw):
    kind = draw(st.integers(0, 6))
    d = draw(_regs)
    if kind == 0:
        return f"{d} = {draw(_binops)} {draw(_vals)}, {draw(_vals)}"
    if kind == 1:
        w = draw(st.sampled_from([1, 2, 4, 8]))
        return f"{d} = load.{w} {draw(_vals)}"
    if kind == 2:
        w = draw(st.sampled_from([1, 2, 4, 8]))
        return f"store.{w} {draw(_vals)}, {draw(_vals)}"
    if kind == 3:
        return f"hc.control {draw(st.sampled_from(['set', 'or', 'clear']))}, flags, {draw(_vals)}"
    if kind == 4:
        return f"hc.interrupt_mem {draw(_vals)}, {draw(st.sampled_from(['load', 'store']))}.8"
    if kind == 5:
        return f"{d} = call h({draw(_vals)})"
    return f"{d} = {draw(st.sampled_from(['zext', 'sext', 'trunc']))}.{draw(st.sampled_from([1, 2, 4]))} {draw(_vals)}"


@settings(max_examples=150, deadline=None)
@given(st.lists(_instr(), min_size=1, max_size=12), st.booleans())
def test_print_parse_roundtrip(body, loop):
    tail = "    br %0, entry, done\ndone:\n    ret" if loop else "    ret %1"
    src = "global g 16\nfn h(1) regs 1 {\n  ret %0\n}\nfn f(1) regs 6 {\nentry:\n"
    src += "\n".join("    " + b for b in body) + "\n" + tail + "\n}\n"
    p = parse_program(src)
    text = print_program(p)
    q = parse_program(text)
    assert q == p
    assert print_program(q) == text
    assert validate(q) == []
    assert q.digest() == p.digest()
