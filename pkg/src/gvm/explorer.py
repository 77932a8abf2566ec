"""Explicit-state exploration of a linked program, counterexamples and replay."""

from __future__ import annotations

import hashlib
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .gir import Program
from .heap import FaultKind, Snapshot
from .image import Image
from .vm import FaultRecord, Transition, VMOptions, boot, run_transition

CEX_MAGIC = "GVMCEX 1"


@dataclass(frozen=True)
class VerifyOptions:
    vm: VMOptions = field(default_factory=VMOptions)
    symmetry: bool = True
    search: str = "bfs"  # or "dfs"
    max_states: int = 1_000_000
    workers: int = 1
    replay: bool = True  # re-run every counterexample before reporting it
    # False explores the whole space and reports the first error found
    stop_on_error: bool = True


class EnumeratingOracle:
    """Forces a prefix of ``choose`` answers and picks 0 past it.

    Successive prefixes enumerate every choice vector of a transition in
    lexicographic order (see :func:`next_prefix`).
    """

    def __init__(self, prefix: tuple[int, ...] = ()):
        self.prefix = prefix
        self.bounds: list[int] = []

    def choose(self, bound: int) -> int:
        i = len(self.bounds)
        self.bounds.append(bound)
        return self.prefix[i] if i < len(self.prefix) else 0

    def interrupt(self, pc: str, fire: bool) -> bool:
        return fire


def next_prefix(choices: list[tuple[int, int]]) -> tuple[int, ...] | None:
    for j in range(len(choices) - 1, -1, -1):
        v, bound = choices[j]
        if v + 1 < bound:
            return tuple(c for c, _ in choices[:j]) + (v + 1,)
    return None


def successors(image: Image, snapshot: Snapshot, options: VMOptions | None = None) -> list[Transition]:
    """Every transition out of ``snapshot``, one per choice vector."""
    out = []
    prefix: tuple[int, ...] | None = ()
    while prefix is not None:
        t = run_transition(image, snapshot, EnumeratingOracle(prefix), options)
        out.append(t)
        prefix = next_prefix(t.choices)
    return out


def boot_transitions(image: Image, options: VMOptions | None = None) -> list[Transition]:
    out = []
    prefix: tuple[int, ...] | None = ()
    while prefix is not None:
        t = boot(image, EnumeratingOracle(prefix), options)
        out.append(t)
        prefix = next_prefix(t.choices)
    return out


# -- counterexamples ------------------------------------------------------


@dataclass(frozen=True)
class Edge:
    """What one transition did, as recorded in a counterexample."""

    choices: tuple[tuple[int, int], ...] = ()
    interrupts: tuple[tuple[str, bool], ...] = ()
    traces: tuple[bytes, ...] = ()
    faults: tuple[FaultRecord, ...] = ()
    error: bool = False

    @classmethod
    def of(cls, t: Transition) -> Edge:
        return cls(tuple(t.choices), tuple(t.interrupts), tuple(t.traces), tuple(t.faults), t.error)


@dataclass(frozen=True)
class Counterexample:
    program_hash: str
    edges: tuple[Edge, ...]
    final_key: str  # sha256 of the canonical key of the error state

    @property
    def fault_kinds(self) -> list[FaultKind]:
        return [f.kind for e in self.edges for f in e.faults]

    @property
    def traces(self) -> list[bytes]:
        return [t for e in self.edges for t in e.traces]

    def dumps(self) -> str:
        lines = [CEX_MAGIC, f"program {self.program_hash}"]
        for n, e in enumerate(self.edges):
            lines.append(f"edge {n}")
            for v, bound in e.choices:
                lines.append(f"choose {v} {bound}")
            for pc, fired in e.interrupts:
                lines.append(f"int {pc} {'fire' if fired else 'skip'}")
            for t in e.traces:
                lines.append(f"trace {_quote(t)}")
            for f in e.faults:
                line = f"fault {f.kind.name} {f.pc} {f.continuation}"
                if f.value is not None:
                    line += f" value={f.value[0]:#x}/{'def' if f.value[1] else 'undef'}"
                lines.append(line)
            if e.error:
                lines.append("error")
        lines.append(f"final-key {self.final_key}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> Counterexample:
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != CEX_MAGIC:
            raise ValueError("not a counterexample file")
        program_hash = ""
        final_key = ""
        edges: list[dict] = []
        for ln in lines[1:]:
            word, _, rest = ln.partition(" ")
            if word == "program":
                program_hash = rest
            elif word == "final-key":
                final_key = rest
            elif word == "edge":
                edges.append({"choices": [], "interrupts": [], "traces": [], "faults": [], "error": False})
            elif not edges:
                raise ValueError(f"{word!r} outside an edge")
            elif word == "choose":
                v, bound = rest.split()
                edges[-1]["choices"].append((int(v), int(bound)))
            elif word == "int":
                pc, how = rest.split()
                edges[-1]["interrupts"].append((pc, how == "fire"))
            elif word == "trace":
                edges[-1]["traces"].append(_unquote(rest))
            elif word == "fault":
                parts = rest.split()
                value = None
                if len(parts) > 3:
                    bits, _, d = parts[3].removeprefix("value=").partition("/")
                    value = (int(bits, 16), d == "def")
                edges[-1]["faults"].append(FaultRecord(FaultKind[parts[0]], parts[1], parts[2], "", value))
            elif word == "error":
                edges[-1]["error"] = True
            else:
                raise ValueError(f"unknown counterexample line {ln!r}")
        return cls(
            program_hash,
            tuple(
                Edge(tuple(e["choices"]), tuple(e["interrupts"]), tuple(e["traces"]), tuple(e["faults"]), e["error"])
                for e in edges
            ),
            final_key,
        )


def _quote(b: bytes) -> str:
    return '"' + b.decode("latin-1").encode("unicode_escape").decode("ascii").replace('"', '\\"') + '"'


def _unquote(s: str) -> bytes:
    s = s.strip()
    if len(s) < 2 or s[0] != '"' or s[-1] != '"':
        raise ValueError(f"bad trace literal {s!r}")
    return s[1:-1].replace('\\"', '"').encode("ascii").decode("unicode_escape").encode("latin-1")


# -- verdicts -------------------------------------------------------------


@dataclass
class Stats:
    states: int = 0
    edges: int = 0
    transitions: int = 0
    terminal: int = 0
    seconds: float = 0.0
    # digests of every error state reached (all of them when not stopping early)
    error_keys: set[str] = field(default_factory=set)

    def as_dict(self) -> dict[str, float | int]:
        return {
            "states": self.states,
            "edges": self.edges,
            "transitions": self.transitions,
            "terminal": self.terminal,
            "seconds": round(self.seconds, 3),
        }


@dataclass
class Safe:
    stats: Stats


@dataclass
class ErrorFound:
    stats: Stats
    cex: Counterexample
    replayed: bool = False
    state: Snapshot | None = None  # the error state the cex ends in


@dataclass
class BudgetExceeded:
    stats: Stats
    reason: str


Verdict = Safe | ErrorFound | BudgetExceeded


def state_key(s: Snapshot, symmetry: bool) -> bytes:
    return s.key if symmetry else s.raw_key


def key_digest(key: bytes) -> str:
    return hashlib.sha256(key).hexdigest()


def verify(target: Program | Image, options: VerifyOptions | None = None) -> Verdict:
    """Explore every state reachable from boot; stop at the first error.

    Breadth-first search (the default) reports a shortest counterexample.
    With ``workers > 1`` each BFS level is expanded in a thread pool and
    merged in frontier order, so results do not depend on the pool.
    """
    options = options or VerifyOptions()
    image = target if isinstance(target, Image) else Image(target)
    vmo = options.vm
    start = time.perf_counter()
    stats = Stats()
    parent: dict[bytes, tuple[bytes | None, Edge]] = {}

    def done(v: Verdict) -> Verdict:
        stats.seconds = time.perf_counter() - start
        if isinstance(v, Safe) and first_error:
            return found(*first_error[0])
        return v

    def found(key: bytes | None, edge: Edge, s: Snapshot) -> Verdict:
        edges = [edge]
        while key is not None:
            key, e = parent[key]
            edges.append(e)
        edges.reverse()
        cex = Counterexample(image.digest, tuple(edges), s.digest())
        v = ErrorFound(stats, cex, state=s)
        if options.replay:
            v.replayed = replay(image, cex, vmo).ok
        return done(v)

    frontier: deque[tuple[bytes, Snapshot]] = deque()
    first_error: list[tuple[bytes | None, Edge, Snapshot]] = []

    def visit(src: bytes | None, t: Transition) -> Verdict | None:
        stats.transitions += 1
        if t.budget_exceeded:
            return done(BudgetExceeded(stats, "step budget exhausted in one transition"))
        if t.terminal or t.snapshot is None:
            stats.terminal += 1
            return None
        stats.edges += 1
        if t.error:
            stats.error_keys.add(t.snapshot.digest())
        if t.error and options.stop_on_error:
            return found(src, Edge.of(t), t.snapshot)
        key = state_key(t.snapshot, options.symmetry)
        if key in parent:
            return None
        if t.error:
            # error states have no successors
            parent[key] = (src, Edge.of(t))
            stats.states += 1
            if not first_error:
                first_error.append((src, Edge.of(t), t.snapshot))
            return None
        parent[key] = (src, Edge.of(t))
        stats.states += 1
        if stats.states > options.max_states:
            return done(BudgetExceeded(stats, f"more than {options.max_states} states"))
        frontier.append((key, t.snapshot))
        return None

    for t in boot_transitions(image, vmo):
        v = visit(None, t)
        if v is not None:
            return v

    if options.search == "dfs":
        while frontier:
            key, s = frontier.pop()
            for t in successors(image, s, vmo):
                v = visit(key, t)
                if v is not None:
                    return v
        return done(Safe(stats))
    if options.search != "bfs":
        raise ValueError(f"unknown search order {options.search!r}")

    pool = ThreadPoolExecutor(options.workers) if options.workers > 1 else None
    try:
        while frontier:
            level = list(frontier)
            frontier.clear()
            if pool is None:
                results = (successors(image, s, vmo) for _, s in level)
            else:
                results = pool.map(lambda ks: successors(image, ks[1], vmo), level)
            for (key, _), ts in zip(level, results):
                for t in ts:
                    v = visit(key, t)
                    if v is not None:
                        return v
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    return done(Safe(stats))


# -- replay ---------------------------------------------------------------


class ReplayOracle:
    """Feeds recorded choices and interrupt decisions back to the VM."""

    def __init__(self, edge: Edge):
        self.edge = edge
        self.ci = 0
        self.ii = 0
        self.divergence: list[str] = []

    def choose(self, bound: int) -> int:
        if self.ci >= len(self.edge.choices):
            self.divergence.append(f"unrecorded choose({bound})")
            return 0
        v, b = self.edge.choices[self.ci]
        self.ci += 1
        if b != bound:
            self.divergence.append(f"choose bound {bound}, recorded {b}")
        return v if v < bound else 0

    def interrupt(self, pc: str, fire: bool) -> bool:
        if self.ii >= len(self.edge.interrupts):
            self.divergence.append(f"unrecorded interrupt point {pc}")
            return fire
        rpc, rfire = self.edge.interrupts[self.ii]
        self.ii += 1
        if rpc != pc or rfire != fire:
            self.divergence.append(f"interrupt {pc} {fire}, recorded {rpc} {rfire}")
        return rfire if rpc == pc else fire


@dataclass
class ReplayResult:
    ok: bool
    final_key: str | None
    edges: int
    messages: list[str] = field(default_factory=list)
    snapshot: Snapshot | None = None


def replay(target: Program | Image, cex: Counterexample, options: VMOptions | None = None) -> ReplayResult:
    """Re-execute ``cex`` and check every edge reproduces as recorded."""
    image = target if isinstance(target, Image) else Image(target)
    msgs: list[str] = []
    if cex.program_hash and cex.program_hash != image.digest:
        msgs.append("program hash differs from the counterexample")
    snap: Snapshot | None = None
    for n, edge in enumerate(cex.edges):
        oracle = ReplayOracle(edge)
        if n == 0:
            t = boot(image, oracle, options)
        elif snap is None:
            msgs.append(f"edge {n}: no state to continue from")
            return ReplayResult(False, None, n, msgs)
        else:
            t = run_transition(image, snap, oracle, options)
        got = Edge.of(t)
        msgs += [f"edge {n}: {d}" for d in oracle.divergence]
        if oracle.ci != len(edge.choices):
            msgs.append(f"edge {n}: {len(edge.choices) - oracle.ci} recorded choices unused")
        for what in ("choices", "interrupts", "traces", "error"):
            if getattr(got, what) != getattr(edge, what):
                msgs.append(f"edge {n}: {what} differ")
        if [(f.kind, f.pc, f.continuation, f.value) for f in got.faults] != [
            (f.kind, f.pc, f.continuation, f.value) for f in edge.faults
        ]:
            msgs.append(f"edge {n}: faults differ")
        snap = t.snapshot
    final = snap.digest() if snap is not None else None
    if final != cex.final_key:
        msgs.append("final state key differs")
    return ReplayResult(not msgs, final, len(cex.edges), msgs, snap)
