from __future__ import annotations

import dataclasses
import itertools

from hypothesis import given, settings
from hypothesis import strategies as st

from gvm.explorer import (
    BudgetExceeded,
    Counterexample,
    Edge,
    EnumeratingOracle,
    ErrorFound,
    Safe,
    VerifyOptions,
    next_prefix,
    replay,
    verify,
)
from gvm.heap import FaultKind
from gvm.image import Image
from gvm.mos import build
from gvm.vm import FaultRecord, VMOptions
from helpers import MISC, SWEEP, verify_file

RACE = next(p for p in SWEEP if p.stem == "race_counter")


def _race_program():
    return build(RACE.read_text())


# -- choice enumeration -------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(1, 3), min_size=0, max_size=4), st.integers(0, 3))
def test_prefix_enumeration_covers_every_vector_once(bounds, depends):
    """A toy transition whose later bounds depend on earlier answers."""

    def run(oracle):
        picks = []
        for i, b in enumerate(bounds):
            bound = b + (picks[0][0] if picks and i == depends else 0)
            v = oracle.choose(bound)
            picks.append((v, bound))
        return picks

    seen = []
    prefix = ()
    while prefix is not None:
        picks = run(EnumeratingOracle(prefix))
        seen.append(tuple(v for v, _ in picks))
        prefix = next_prefix(picks)
    assert len(seen) == len(set(seen))
    assert seen == sorted(seen)
    # brute force over the dependent bound tree
    expected = []
    for vec in itertools.product(*[range(b + 3) for b in bounds]):
        ok, first = True, None
        for i, (v, b) in enumerate(zip(vec, bounds)):
            bound = b + (first if first is not None and i == depends else 0)
            if v >= bound:
                ok = False
            if i == 0:
                first = v
        if ok:
            expected.append(vec)
    assert seen == sorted(expected)


# -- counterexample files -----------------------------------------------------

_edges = st.builds(
    Edge,
    choices=st.lists(st.tuples(st.integers(0, 5), st.integers(6, 9)), max_size=3).map(tuple),
    interrupts=st.lists(st.tuples(st.sampled_from(["main+1", "worker+12"]), st.booleans()), max_size=3).map(tuple),
    traces=st.lists(st.binary(max_size=12), max_size=2).map(tuple),
    faults=st.lists(
        st.builds(
            FaultRecord,
            kind=st.sampled_from(list(FaultKind)),
            pc=st.just("f+1"),
            continuation=st.just("f+2"),
            message=st.just(""),
            value=st.one_of(st.none(), st.tuples(st.integers(0, 2**64 - 1), st.booleans())),
        ),
        max_size=2,
    ).map(tuple),
    error=st.booleans(),
)


@settings(max_examples=100, deadline=None)
@given(st.lists(_edges, max_size=4), st.text("0123456789abcdef", min_size=64, max_size=64))
def test_cex_text_roundtrip(edges, digest):
    cex = Counterexample("ab" * 32, tuple(edges), digest)
    text = cex.dumps()
    back = Counterexample.loads(text)
    assert back == cex
    assert back.dumps() == text


def test_race_cex_replays_and_detects_tampering():
    program = _race_program()
    v = verify(program)
    assert isinstance(v, ErrorFound) and v.replayed
    r = replay(program, v.cex)
    assert r.ok and r.final_key == v.cex.final_key and r.snapshot.key == v.state.key
    # flip the first two-way choice
    edges = list(v.cex.edges)
    i = next(n for n, e in enumerate(edges) if any(b == 2 for _, b in e.choices))
    e = edges[i]
    flipped = tuple((1 - c, b) if b == 2 else (c, b) for c, b in e.choices)
    edges[i] = dataclasses.replace(e, choices=flipped)
    bad = dataclasses.replace(v.cex, edges=tuple(edges))
    r = replay(program, bad)
    assert not r.ok and r.messages


def test_replay_notices_a_different_program():
    v = verify(_race_program())
    other = build((SWEEP[0]).read_text())
    r = replay(other, v.cex)
    assert not r.ok and "program hash differs" in r.messages[0]


def test_bfs_gives_shortest_counterexample():
    bfs = verify(_race_program())
    dfs = verify(_race_program(), VerifyOptions(search="dfs"))
    assert isinstance(dfs, ErrorFound) and dfs.replayed
    assert len(bfs.cex.edges) <= len(dfs.cex.edges)


def test_workers_do_not_change_results():
    for path in SWEEP[:4]:
        one = verify_file(path)
        many = verify_file(path, workers=4)
        assert type(one) is type(many)
        assert one.stats.states == many.stats.states and one.stats.edges == many.stats.edges
        if isinstance(one, ErrorFound):
            assert one.cex.dumps() == many.cex.dumps()


def test_full_exploration_keeps_verdict():
    for path in SWEEP:
        early = verify_file(path)
        full = verify_file(path, stop_on_error=False)
        assert type(early) is type(full)
        assert full.stats.states >= early.stats.states
        if isinstance(full, ErrorFound):
            assert full.replayed


def test_state_budget():
    v = verify_file(RACE, max_states=3)
    assert isinstance(v, BudgetExceeded) and "states" in v.reason


def test_step_budget_is_reported():
    src = "fn main() {\n  hc.control or, flags, 4\n  jump spin\nspin:\n  jump spin\n}\n"
    v = verify(build(src), VerifyOptions(vm=VMOptions(step_budget=500)))
    assert isinstance(v, BudgetExceeded) and "step budget" in v.reason


def test_symmetry_reduces_states():
    sym = verify_file(MISC / "symmetry.gir")
    raw = verify_file(MISC / "symmetry.gir", symmetry=False)
    assert isinstance(sym, Safe) and isinstance(raw, Safe)
    assert raw.stats.states > sym.stats.states


def test_safe_program_counts_are_stable():
    a = verify_file(next(p for p in SWEEP if p.stem == "mutex_counter"))
    b = verify_file(next(p for p in SWEEP if p.stem == "mutex_counter"))
    assert isinstance(a, Safe)
    assert a.stats.as_dict() | {"seconds": 0} == b.stats.as_dict() | {"seconds": 0}


def test_verify_accepts_an_image():
    v = verify(Image(_race_program()))
    assert isinstance(v, ErrorFound)
