"""State counts for every corpus program under each reduction setting.

    python scripts/reduction_table.py [--corpus corpus/sweep] [--full]

Columns: reduced (tau + symmetry), no tau, no symmetry, neither.
"""

from __future__ import annotations

import argparse
import time
from dataclasses import dataclass
from pathlib import Path

from gvm.explorer import VerifyOptions, verify
from gvm.mos import build
from gvm.vm import VMOptions


@dataclass(frozen=True)
class Setting:
    name: str
    tau: bool
    symmetry: bool

    def options(self, full: bool) -> VerifyOptions:
        vm = VMOptions(tau_cfl=self.tau, tau_mem=self.tau)
        return VerifyOptions(vm=vm, symmetry=self.symmetry, stop_on_error=not full)


SETTINGS = (
    Setting("reduced", True, True),
    Setting("no-tau", False, True),
    Setting("no-sym", True, False),
    Setting("neither", False, False),
)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--corpus", type=Path, default=Path(__file__).resolve().parent.parent / "corpus" / "sweep")
    ap.add_argument("--full", action="store_true", help="explore past the first error")
    args = ap.parse_args()
    head = f"{'program':<20} {'verdict':<14}" + "".join(f"{s.name:>9}" for s in SETTINGS)
    print(head)
    print("-" * len(head))
    start = time.perf_counter()
    for path in sorted(args.corpus.glob("*.gir")):
        program = build(path.read_text())
        cells, verdicts = [], set()
        for s in SETTINGS:
            v = verify(program, s.options(args.full))
            verdicts.add(type(v).__name__)
            cells.append(v.stats.states)
        verdict = verdicts.pop() if len(verdicts) == 1 else "MIXED"
        print(f"{path.stem:<20} {verdict:<14}" + "".join(f"{c:>9}" for c in cells))
    print(f"\n{time.perf_counter() - start:.1f}s")


if __name__ == "__main__":
    main()
