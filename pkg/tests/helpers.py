from __future__ import annotations

from pathlib import Path

from gvm.explorer import VerifyOptions, verify
from gvm.heap import Tag, make_ptr
from gvm.image import Image
from gvm.mos import build
from gvm.vm import VMOptions, ZeroOracle, boot, run_transition

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"
SWEEP = sorted((CORPUS / "sweep").glob("*.gir"))
FAULTS = CORPUS / "faults"
MISC = CORPUS / "misc"

UNREDUCED = VMOptions(tau_cfl=False, tau_mem=False)


def image_of(src: str, **kw) -> Image:
    return Image(build(src, **kw))


def run_path(image: Image, oracle=None, options=None, limit: int = 10_000):
    """Follow one path (choices from ``oracle``) to the end; returns all transitions."""
    oracle = oracle or ZeroOracle()
    t = boot(image, oracle, options)
    out = [t]
    snap = t.snapshot
    for _ in range(limit):
        if t.error or t.terminal or t.budget_exceeded:
            return out
        t = run_transition(image, snap, oracle, options)
        out.append(t)
        if t.snapshot is not None:
            snap = t.snapshot
    raise AssertionError("path did not finish")


def last_snapshot(ts):
    for t in reversed(ts):
        if t.snapshot is not None:
            return t.snapshot
    return None


def read_global(image: Image, snap, name: str, width: int = 8) -> tuple[int, bool, bool]:
    return snap.read(make_ptr(Tag.GLOBAL, image.global_slots[name]), width)


def main_only(body: str, *, regs: int = 8, extra: str = "") -> str:
    """A user program whose main is ``body`` followed by ``ret 0``."""
    return f"{extra}\nfn main() regs {regs} {{\n{body}\n    ret 0\n}}\n"


def verify_file(path: Path, **kw):
    vm = kw.pop("vm", VMOptions())
    build_kw = {k: kw.pop(k) for k in ("malloc_can_fail",) if k in kw}
    return verify(build(path.read_text(), **build_kw), VerifyOptions(vm=vm, **kw))


# -- random heaps ------------------------------------------------------------

from gvm.heap import Heap, HeapObject, ptr_id, ptr_offset, ptr_tag  # noqa: E402

DANGLING_BASE = 1000  # ids at or above this never name a live object


def random_snapshot(rng, max_objects: int = 6, max_size: int = 32):
    n = rng.randint(1, max_objects)
    ids = rng.sample(range(1, 60), n)
    objs = {}
    for oid in ids:
        size = rng.choice([0, 8, 8, 16, 16, 24, 32, rng.randint(0, max_size)])
        o = HeapObject(size)
        for i in range(size):
            o.data[i] = rng.choice((0, 0, 1, 7))
            o.defined[i] = 1 if rng.random() < 0.8 else 0
        for off in range(0, size - 7, 8):
            if rng.random() < 0.5:
                r = rng.random()
                if r < 0.75:
                    bits = make_ptr(Tag.HEAP, rng.choice(ids), rng.choice((0, 0, 8)))
                elif r < 0.9:
                    bits = make_ptr(Tag.HEAP, DANGLING_BASE + rng.randint(0, 2), 0)
                else:
                    bits = make_ptr(Tag.GLOBAL, rng.randint(0, 2), 0)
                o.data[off : off + 8] = bits.to_bytes(8, "little")
                o.defined[off : off + 8] = b"\x01" * 8
                o.pointers.add(off)
        o.shared = rng.random() < 0.3
        if rng.random() < 0.2:
            o.allocas = tuple(rng.sample(ids, rng.randint(1, min(2, n))))
        objs[oid] = o
    roots = [make_ptr(Tag.HEAP, rng.choice(ids))]
    roots += [make_ptr(Tag.HEAP, rng.choice(ids)) if rng.random() < 0.3 else 0 for _ in range(3)]
    heap = Heap(objs, max(ids) + 1)
    return heap.snapshot(tuple(roots))


def relabel(snap, rng):
    """The same graph under fresh object ids (an isomorphic copy)."""
    old = sorted(snap.objects)
    new = rng.sample(range(1, 200), len(old))
    m = dict(zip(old, new))

    def move(bits):
        if bits and ptr_tag(bits) == Tag.HEAP and ptr_id(bits) in m:
            return make_ptr(Tag.HEAP, m[ptr_id(bits)], ptr_offset(bits))
        return bits

    objs = {}
    for oid in old:
        o = snap.objects[oid].clone()
        for off in o.pointers:
            o.data[off : off + 8] = move(o.slot(off)).to_bytes(8, "little")
        o.allocas = tuple(m[a] for a in o.allocas)
        objs[m[oid]] = o
    heap = Heap(objs, max(new) + 1)
    return heap.snapshot(tuple(move(r) for r in snap.roots))


def mutate(snap, rng):
    """A relabelled copy with one small random change (may stay isomorphic)."""
    s = relabel(snap, rng)
    objs = {k: v.clone() for k, v in s.objects.items()}
    ids = sorted(objs)
    o = objs[rng.choice(ids)]
    what = rng.randrange(4)
    if what == 0 and o.size:
        i = rng.randrange(o.size)
        if not any(p <= i < p + 8 for p in o.pointers):
            o.data[i] ^= 1
    elif what == 1 and o.pointers:
        off = rng.choice(sorted(o.pointers))
        o.data[off : off + 8] = make_ptr(Tag.HEAP, rng.choice(ids), 0).to_bytes(8, "little")
    elif what == 2:
        o.shared = not o.shared
    elif o.size:
        i = rng.randrange(o.size)
        if not any(p <= i < p + 8 for p in o.pointers):
            o.defined[i] ^= 1
    return Heap(objs, max(ids) + 1).snapshot(s.roots)
