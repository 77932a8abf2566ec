from __future__ import annotations

import re

import pytest

from gvm.explorer import ErrorFound, Safe, VerifyOptions, successors, verify
from gvm.gir import CONTROL_ACTIONS, CONTROL_REGS, parse_program
from gvm.heap import FaultKind, Tag, make_ptr
from gvm.image import Image
from gvm.mos import API, abi_header, build, prelude_program
from gvm.vm import ACCEPT, ERROR, INTERRUPTED, MASK
from helpers import FAULTS, MISC, SWEEP, image_of, last_snapshot, read_global, run_path, verify_file


def thread_statuses(snap) -> list[int]:
    count = snap.read(snap.roots[0], 8)[0]
    table = snap.read(snap.roots[0] + 8, 8)[0]
    return [snap.read(table + 24 * i + 16, 8)[0] for i in range(count)]


def test_prelude_defines_api_and_hooks():
    names = {f.name for f in prelude_program().functions}
    assert set(API) <= names
    assert {"__boot", "scheduler", "fault_handler"} <= names


def test_abi_header_matches_vm():
    defs = dict(re.findall(r"#define (GVM_\w+) (\d+)", abi_header()))
    for name, value in CONTROL_REGS.items():
        assert int(defs[f"GVM_REG_{name.upper()}"]) == value
    for name, value in CONTROL_ACTIONS.items():
        assert int(defs[f"GVM_CTL_{name.upper()}"]) == value
    assert [int(defs[f"GVM_FLAG_{n}"]) for n in ("ERROR", "ACCEPT", "MASK", "INTERRUPTED")] == [
        ERROR,
        ACCEPT,
        MASK,
        INTERRUPTED,
    ]
    for kind in FaultKind:
        snake = re.sub(r"(?<!^)(?=[A-Z])", "_", kind.name).upper()
        assert int(defs[f"GVM_FAULT_{snake}"]) == kind


def test_fault_names_table_matches_kinds():
    data = next(c.data for c in prelude_program().constants if c.name == "__mos_fault_names")
    for kind in FaultKind:
        entry = data[32 * kind : 32 * kind + 32].rstrip(b"\0")
        assert entry == f"fault: {kind.name}".encode()


def test_boot_state_has_one_runnable_thread():
    image = image_of("fn main() {\n  ret 0\n}\n")
    ts = run_path(image)
    assert thread_statuses(ts[0].snapshot) == [0]
    assert thread_statuses(last_snapshot(ts)) == [2]
    assert ts[-1].terminal


def test_threads_get_sequential_ids_and_join():
    src = """
global ids 16
global sum 8
fn worker(1) {
    %1 = load.8 @sum
    %1 = add %1, %0
    store.8 @sum, %1
    ret 0
}
fn main() {
    %0 = call thread_create(@worker, 5)
    store.8 @ids, %0
    %1 = call thread_create(@worker, 7)
    %2 = gep @ids, 8
    store.8 %2, %1
    call thread_join(%0)
    call thread_join(%1)
    ret 0
}
"""
    image = image_of(src)
    snap = last_snapshot(run_path(image))
    assert read_global(image, snap, "ids", 8)[0] == 1
    assert snap.read(make_ptr(Tag.GLOBAL, image.global_slots["ids"], 8), 8)[0] == 2
    assert read_global(image, snap, "sum")[0] == 12


def test_join_of_invalid_thread_is_an_error():
    ts = run_path(image_of("fn main() {\n  call thread_join(9)\n  ret 0\n}\n"))
    assert ts[-1].error and ts[-1].traces == [b"join of an invalid thread id"]


def test_main_exit_leaves_workers_running():
    v = verify_file(MISC / "thread_exit_main.gir")
    assert isinstance(v, Safe)
    image = image_of((MISC / "thread_exit_main.gir").read_text())
    snap = last_snapshot(run_path(image))
    assert read_global(image, snap, "seen")[0] == 1
    assert thread_statuses(snap) == [2, 2]


def test_malloc_failure_is_a_choice():
    assert isinstance(verify_file(MISC / "malloc_fail.gir"), Safe)
    v = verify_file(MISC / "malloc_fail.gir", malloc_can_fail=True)
    assert isinstance(v, ErrorFound)
    assert v.cex.fault_kinds == [FaultKind.BadPointer]
    assert (0, 2) in [c for e in v.cex.edges for c in e.choices]


def test_free_of_null_is_a_no_op():
    ts = run_path(image_of("fn main() {\n  call free(0)\n  ret 0\n}\n"))
    assert not any(t.error for t in ts)


def test_assert_failure_traces():
    ts = run_path(image_of("fn main() {\n  call assert(0)\n  ret 0\n}\n"))
    assert ts[-1].error and ts[-1].traces == [b"assertion failed"]


@pytest.mark.parametrize("path", sorted(FAULTS.glob("*.gir")), ids=lambda p: p.stem)
def test_fault_handler_reports_kind_by_name(path):
    v = verify_file(path)
    assert isinstance(v, ErrorFound)
    last = v.cex.fault_kinds[-1]
    if last != FaultKind.DoubleFault:
        assert v.cex.traces == [f"fault: {last.name}".encode()]


def test_mutex_excludes():
    assert isinstance(verify_file(next(p for p in SWEEP if p.stem == "mutex_counter")), Safe)


@pytest.mark.parametrize("name", ["deadlock_abba", "locks_ordered", "mutex_counter", "mutex_loop"])
def test_deadlock_detection_is_complete(name):
    """Every state with no runnable and some blocked thread has only error edges."""
    path = next(p for p in SWEEP if p.stem == name)
    image = Image(build(path.read_text()))
    frontier = [t.snapshot for t in run_path(image)[:1]]
    seen = {frontier[0].key}
    stuck = 0
    while frontier:
        s = frontier.pop()
        st = thread_statuses(s)
        ts = successors(image, s)
        if 0 not in st and 1 in st:
            stuck += 1
            assert ts and all(t.error for t in ts)
            assert all(t.traces == [b"deadlock"] for t in ts)
        for t in ts:
            if t.snapshot is not None and not t.error and t.snapshot.key not in seen:
                seen.add(t.snapshot.key)
                frontier.append(t.snapshot)
    assert (stuck > 0) == (name == "deadlock_abba")


def test_prelude_replacement():
    tiny = """
fn __boot(1) {
    hc.control set, frame, 0
    unreachable
}
fn scheduler(1) {
    ret
}
"""
    p = build("fn main() {\n  ret 0\n}\n", prelude=tiny)
    v = verify(p, VerifyOptions())
    assert isinstance(v, Safe) and v.stats.states == 1
    assert parse_program(tiny).function("scheduler").nparams == 1
