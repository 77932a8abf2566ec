"""Command line front end: ``gvm verify|run|replay|dump``.

Exit codes: 0 safe / ok, 1 error found / replay mismatch, 2 budget
exceeded, 3 bad input.
"""

from __future__ import annotations

import argparse
import random
import sys
from pathlib import Path

from .explorer import (
    BudgetExceeded,
    Counterexample,
    ErrorFound,
    Safe,
    VerifyOptions,
    replay,
    verify,
)
from .gir import GIRError, InstrumentationPolicy, print_program
from .heap import heap_dot
from .image import Image
from .mos import build
from .vm import VMOptions, boot, run_transition

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BUDGET = 2
EXIT_INPUT = 3


class RandomOracle:
    def __init__(self, seed: int):
        self.rng = random.Random(seed)

    def choose(self, bound: int) -> int:
        return self.rng.randrange(bound)

    def interrupt(self, pc: str, fire: bool) -> bool:
        return fire


def _build_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("program", type=Path, help="GIR source of the user program")
    p.add_argument("--prelude", type=Path, help="replace the bundled OS prelude")
    p.add_argument("--malloc-can-fail", action="store_true")
    p.add_argument("--no-instrument", action="store_true", help="insert no interrupt points")
    p.add_argument("--no-tau-cfl", action="store_true", help="control-flow interrupts always fire")
    p.add_argument("--no-tau-mem", action="store_true", help="memory interrupts always fire")
    p.add_argument("--step-budget", type=int, default=VMOptions.step_budget)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gvm", description="explicit-state model checker for GIR programs")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="explore all reachable states")
    _build_args(v)
    v.add_argument("--no-symmetry", action="store_true", help="compare states without heap renumbering")
    v.add_argument("--search", choices=("bfs", "dfs"), default="bfs")
    v.add_argument("--max-states", type=int, default=VerifyOptions.max_states)
    v.add_argument("--workers", type=int, default=1)
    v.add_argument("--cex", type=Path, help="write the counterexample here")
    v.add_argument("--stats", action="store_true", help="print key=value statistics")

    r = sub.add_parser("run", help="execute one random path")
    _build_args(r)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--max-transitions", type=int, default=10_000)
    r.add_argument("--dump-heap", action="store_true", help="print the final state's objects")
    r.add_argument("--dot", type=Path, help="write the final heap as Graphviz")

    p = sub.add_parser("replay", help="re-execute a counterexample")
    _build_args(p)
    p.add_argument("cex", type=Path)

    d = sub.add_parser("dump", help="print the linked, instrumented program")
    _build_args(d)
    d.add_argument("--dot", type=Path, help="write the initial heap as Graphviz")
    return ap


def _program(args):
    policy = InstrumentationPolicy(False, False) if args.no_instrument else None
    prelude = args.prelude.read_text() if args.prelude else None
    return build(args.program.read_text(), policy=policy, malloc_can_fail=args.malloc_can_fail, prelude=prelude)


def _vm_options(args) -> VMOptions:
    return VMOptions(tau_cfl=not args.no_tau_cfl, tau_mem=not args.no_tau_mem, step_budget=args.step_budget)


def _describe(snapshot) -> str:
    lines = []
    for oid in sorted(snapshot.objects):
        o = snapshot.objects[oid]
        flags = " shared" if o.shared else ""
        lines.append(f"#{oid} size={o.size}{flags} ptrs={sorted(o.pointers)} data={bytes(o.data).hex()}")
    return "\n".join(lines)


def cmd_verify(args, out) -> int:
    opts = VerifyOptions(
        vm=_vm_options(args),
        symmetry=not args.no_symmetry,
        search=args.search,
        max_states=args.max_states,
        workers=max(1, args.workers),
    )
    v = verify(_program(args), opts)
    if isinstance(v, Safe):
        print("verdict: safe", file=out)
        code = EXIT_OK
    elif isinstance(v, ErrorFound):
        kinds = ", ".join(k.name for k in v.cex.fault_kinds) or "none"
        print(f"verdict: error found ({len(v.cex.edges)} edges, faults: {kinds})", file=out)
        for t in v.cex.traces:
            print(f"trace: {t.decode('latin-1')}", file=out)
        if not v.replayed:
            print("warning: counterexample did not replay", file=out)
        if args.cex:
            args.cex.write_text(v.cex.dumps())
        code = EXIT_ERROR
    else:
        print(f"verdict: budget exceeded ({v.reason})", file=out)
        code = EXIT_BUDGET
    if args.stats:
        for k, val in v.stats.as_dict().items():
            print(f"{k}={val}", file=out)
    return code


def cmd_run(args, out) -> int:
    image = Image(_program(args))
    oracle = RandomOracle(args.seed)
    opts = _vm_options(args)
    t = boot(image, oracle, opts)
    snap = None
    for n in range(args.max_transitions):
        for tr in t.traces:
            print(f"trace: {tr.decode('latin-1')}", file=out)
        for f in t.faults:
            print(f"fault: {f.kind.name} at {f.pc}, continue at {f.continuation} {f.message}".rstrip(), file=out)
        if t.budget_exceeded:
            print("step budget exhausted", file=out)
            return EXIT_BUDGET
        if t.snapshot is not None:
            snap = t.snapshot
        if t.error:
            print(f"error after {n + 1} transitions", file=out)
            break
        if t.terminal:
            print(f"terminated after {n + 1} transitions", file=out)
            break
        t = run_transition(image, snap, oracle, opts)
    else:
        print("transition limit reached", file=out)
    if snap is not None and args.dump_heap:
        print(_describe(snap), file=out)
    if snap is not None and args.dot:
        args.dot.write_text(heap_dot(snap))
    return EXIT_ERROR if t.error else EXIT_OK


def cmd_replay(args, out) -> int:
    cex = Counterexample.loads(args.cex.read_text())
    r = replay(_program(args), cex, _vm_options(args))
    for m in r.messages:
        print(m, file=out)
    print(f"replay: {'ok' if r.ok else 'mismatch'} ({r.edges} edges, final key {r.final_key})", file=out)
    return EXIT_OK if r.ok else EXIT_ERROR


def cmd_dump(args, out) -> int:
    program = _program(args)
    print(print_program(program), end="", file=out)
    if args.dot:
        t = boot(Image(program), options=_vm_options(args))
        if t.snapshot is not None:
            args.dot.write_text(heap_dot(t.snapshot))
    return EXIT_OK


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    args = _parser().parse_args(argv)
    handler = {"verify": cmd_verify, "run": cmd_run, "replay": cmd_replay, "dump": cmd_dump}[args.command]
    try:
        return handler(args, out)
    except GIRError as e:
        for d in e.diagnostics:
            print(f"{args.program}:{d}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, ValueError) as e:
        print(f"gvm: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
