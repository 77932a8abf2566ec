"""Graph-organised memory: objects, shadow typing, shared set, snapshots.

Pointers are 64-bit values: the low 32 bits are the offset, the next 30
bits the object identifier and the top 2 bits a tag (heap, global,
constant, code).  Pointerhood of a value stored in memory is tracked in
a per-object shadow map of 8-byte-aligned slots; definedness is tracked
per byte.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property
from typing import Iterable, Mapping

M64 = (1 << 64) - 1
OFFSET_MASK = 0xFFFFFFFF
ID_BITS = 30
ID_MASK = (1 << ID_BITS) - 1
# an offset that has left [0, 2**32 - 1) sticks here and never becomes valid
POISON_OFFSET = 0xFFFFFFFF
MAX_OBJECT_SIZE = 1 << 31
DANGLING_ID = ID_MASK

_ONES = [b"\x01" * n for n in range(9)]
_ZEROS = [bytes(n) for n in range(9)]


class Tag(IntEnum):
    HEAP = 0
    GLOBAL = 1
    CONST = 2
    CODE = 3


class FaultKind(IntEnum):
    OutOfBounds = 1
    UseAfterFree = 2
    DoubleFree = 3
    InvalidFree = 4
    BadPointer = 5
    ReadOnly = 6
    UndefinedControl = 7
    DivisionByZero = 8
    BadJumpTarget = 9
    CallArityMismatch = 10
    HypercallMisuse = 11
    DoubleFault = 12


class Fault(Exception):
    def __init__(self, kind: FaultKind, message: str = ""):
        self.kind = FaultKind(kind)
        self.message = message
        super().__init__(f"{self.kind.name}: {message}" if message else self.kind.name)


def make_ptr(tag: int, oid: int, offset: int = 0) -> int:
    return (tag << 62) | ((oid & ID_MASK) << 32) | (offset & OFFSET_MASK)


def ptr_tag(bits: int) -> int:
    return bits >> 62


def ptr_id(bits: int) -> int:
    return (bits >> 32) & ID_MASK


def ptr_offset(bits: int) -> int:
    return bits & OFFSET_MASK


def gep(bits: int, delta: int) -> int:
    """Offset arithmetic; leaving the 32-bit offset range poisons the pointer."""
    off = bits & OFFSET_MASK
    if off == POISON_OFFSET:
        return bits
    new = off + delta
    if not 0 <= new < POISON_OFFSET:
        new = POISON_OFFSET
    return (bits & ~OFFSET_MASK & M64) | new


@dataclass(frozen=True)
class Pointer:
    tag: Tag
    id: int
    offset: int = 0

    def bits(self) -> int:
        return make_ptr(self.tag, self.id, self.offset)

    @classmethod
    def from_bits(cls, bits: int) -> Pointer:
        return cls(Tag(ptr_tag(bits)), ptr_id(bits), ptr_offset(bits))

    def __str__(self) -> str:
        return f"{self.tag.name.lower()}:{self.id}+{self.offset}"


def _bits(p: int | Pointer) -> int:
    return p.bits() if isinstance(p, Pointer) else p


class HeapObject:
    """A node of the memory graph: bytes plus definedness and pointer shadows.

    Objects reachable from a snapshot are ``frozen``; the live heap copies
    them before the first write.
    """

    __slots__ = ("data", "defined", "pointers", "shared", "frozen", "allocas")

    def __init__(self, size: int = 0):
        self.data = bytearray(size)
        self.defined = bytearray(size)
        self.pointers: set[int] = set()
        self.shared = False
        self.frozen = False
        # ids of objects obtained by alloca in this (frame) object
        self.allocas: tuple[int, ...] = ()

    @property
    def size(self) -> int:
        return len(self.data)

    def clone(self) -> HeapObject:
        o = HeapObject.__new__(HeapObject)
        o.data = bytearray(self.data)
        o.defined = bytearray(self.defined)
        o.pointers = set(self.pointers)
        o.shared = self.shared
        o.frozen = False
        o.allocas = self.allocas
        return o

    def slot(self, off: int) -> int:
        return int.from_bytes(self.data[off : off + 8], "little")

    def edges(self) -> list[tuple[int, int]]:
        """``(slot offset, pointer bits)`` for every tracked pointer, by offset."""
        return [(off, self.slot(off)) for off in sorted(self.pointers)]


def slot_object(slots: list[tuple[int, bytes | None]]) -> HeapObject:
    """Build a globals/constants object: header with a slot table, then data.

    Header layout: ``u32 nslots`` then ``(u32 offset, u32 length)`` per
    slot; each slot's data starts 8-aligned.  Missing initializers read as
    defined zero, like C static storage.
    """
    header = 4 + 8 * len(slots)
    pos = (header + 7) & ~7
    table = []
    for size, _ in slots:
        table.append((pos, size))
        pos += (size + 7) & ~7
    obj = HeapObject(pos)
    struct.pack_into("<I", obj.data, 0, len(slots))
    for i, (off, size) in enumerate(table):
        struct.pack_into("<II", obj.data, 4 + 8 * i, off, size)
        init = slots[i][1] or b""
        obj.data[off : off + len(init)] = init
    obj.defined[:] = b"\x01" * pos
    return obj


class Heap:
    """Mutable object store used while evaluating one transition."""

    def __init__(self, objects: dict[int, HeapObject] | None = None, next_id: int = 1):
        self.objects: dict[int, HeapObject] = objects if objects is not None else {}
        self.next_id = next_id
        # raw heap pointers to the designated slot objects (machine registers)
        self.globals_ptr = 0
        self.constants_ptr = 0

    # -- object store -------------------------------------------------

    def writable(self, oid: int) -> HeapObject:
        obj = self.objects[oid]
        if obj.frozen:
            obj = obj.clone()
            self.objects[oid] = obj
        return obj

    def add(self, obj: HeapObject) -> int:
        oid = self.next_id
        if oid > ID_MASK - 1:
            raise MemoryError("object identifiers exhausted")
        self.next_id += 1
        self.objects[oid] = obj
        return oid

    def make(self, size: int) -> int:
        if not 0 <= size < MAX_OBJECT_SIZE:
            raise Fault(FaultKind.HypercallMisuse, f"bad object size {size}")
        return make_ptr(Tag.HEAP, self.add(HeapObject(size)))

    def _lookup(self, bits: int) -> tuple[int, HeapObject]:
        """The object a heap pointer names, or the fault for using it."""
        oid = ptr_id(bits)
        obj = self.objects.get(oid)
        if obj is None:
            if 0 < oid < self.next_id:
                raise Fault(FaultKind.UseAfterFree, f"object {oid} no longer exists")
            raise Fault(FaultKind.BadPointer, f"no object {oid}")
        return oid, obj

    def free(self, p: int | Pointer) -> None:
        bits = _bits(p)
        if ptr_tag(bits) != Tag.HEAP or ptr_offset(bits) != 0 or ptr_id(bits) == 0:
            raise Fault(FaultKind.InvalidFree, "free of a non-heap or interior pointer")
        oid = ptr_id(bits)
        if oid not in self.objects:
            if oid < self.next_id:
                raise Fault(FaultKind.DoubleFree, f"object {oid} already freed")
            raise Fault(FaultKind.InvalidFree, f"no object {oid}")
        if oid in (ptr_id(self.globals_ptr), ptr_id(self.constants_ptr)):
            raise Fault(FaultKind.InvalidFree, "cannot free a slot object")
        del self.objects[oid]

    def size(self, p: int | Pointer) -> int:
        bits = _bits(p)
        if ptr_tag(bits) != Tag.HEAP:
            raise Fault(FaultKind.BadPointer, "size of a non-heap pointer")
        return self._lookup(bits)[1].size

    def resize(self, p: int | Pointer, n: int) -> None:
        bits = _bits(p)
        if ptr_tag(bits) != Tag.HEAP or ptr_offset(bits) != 0:
            raise Fault(FaultKind.BadPointer, "resize needs a heap pointer with offset 0")
        if not 0 <= n < MAX_OBJECT_SIZE:
            raise Fault(FaultKind.HypercallMisuse, f"bad object size {n}")
        oid, _ = self._lookup(bits)
        obj = self.writable(oid)
        old = obj.size
        if n < old:
            del obj.data[n:]
            del obj.defined[n:]
            obj.pointers = {s for s in obj.pointers if s + 8 <= n}
        else:
            obj.data.extend(bytes(n - old))
            obj.defined.extend(bytes(n - old))

    # -- access -------------------------------------------------------

    def resolve(self, p: int | Pointer, width: int, write: bool = False) -> tuple[int, int]:
        """Map a pointer to ``(object id, byte offset)`` after all checks."""
        bits = _bits(p)
        tag = ptr_tag(bits)
        off = ptr_offset(bits)
        if tag == Tag.HEAP:
            oid, obj = self._lookup(bits)
            if off == POISON_OFFSET or off + width > obj.size:
                raise Fault(FaultKind.OutOfBounds, f"{width} bytes at offset {off} of {obj.size}")
            if write and self.constants_ptr and oid == ptr_id(self.constants_ptr):
                raise Fault(FaultKind.ReadOnly, "write to constant data")
            return oid, off
        if tag == Tag.CODE:
            raise Fault(FaultKind.BadPointer, "data access through a code pointer")
        base = self.globals_ptr if tag == Tag.GLOBAL else self.constants_ptr
        if not base:
            raise Fault(FaultKind.BadPointer, "no slot object registered")
        if write and tag == Tag.CONST:
            raise Fault(FaultKind.ReadOnly, "write to constant data")
        oid, obj = self._lookup(base)
        slot = ptr_id(bits)
        (nslots,) = struct.unpack_from("<I", obj.data, 0)
        if slot >= nslots:
            raise Fault(FaultKind.BadPointer, f"no slot {slot}")
        start, length = struct.unpack_from("<II", obj.data, 4 + 8 * slot)
        if off == POISON_OFFSET or off + width > length:
            raise Fault(FaultKind.OutOfBounds, f"{width} bytes at offset {off} of slot {slot} ({length})")
        return oid, start + off

    def read(self, p: int | Pointer, width: int) -> tuple[int, bool, bool]:
        """``(value, defined, is_pointer)`` of ``width`` bytes at ``p``."""
        oid, off = self.resolve(p, width)
        obj = self.objects[oid]
        value = int.from_bytes(obj.data[off : off + width], "little")
        defined = obj.defined[off : off + width] == _ONES[width]
        return value, defined, width == 8 and off in obj.pointers

    def write(self, p: int | Pointer, width: int, value: int, defined: bool = True, is_pointer: bool = False) -> None:
        oid, off = self.resolve(p, width, write=True)
        obj = self.writable(oid)
        obj.data[off : off + width] = (value & ((1 << (8 * width)) - 1)).to_bytes(width, "little")
        obj.defined[off : off + width] = _ONES[width] if defined else _ZEROS[width]
        if obj.pointers:
            for s in range(off & ~7, off + width, 8):
                obj.pointers.discard(s)
        if is_pointer and defined and width == 8 and off % 8 == 0:
            obj.pointers.add(off)
            if obj.shared and ptr_tag(value) == Tag.HEAP:
                self.mark_shared(value)

    # -- graph --------------------------------------------------------

    def targets(self, obj: HeapObject) -> list[int]:
        """Ids of live objects ``obj`` points to, in slot order."""
        out = []
        for off in sorted(obj.pointers):
            bits = obj.slot(off)
            if ptr_tag(bits) == Tag.HEAP:
                oid = ptr_id(bits)
                if oid in self.objects:
                    out.append(oid)
        return out

    def mark_shared(self, p: int | Pointer) -> None:
        bits = _bits(p)
        if ptr_tag(bits) != Tag.HEAP or ptr_id(bits) not in self.objects:
            return
        work = [ptr_id(bits)]
        while work:
            oid = work.pop()
            if self.objects[oid].shared:
                continue
            obj = self.writable(oid)
            obj.shared = True
            work.extend(t for t in self.targets(obj) if not self.objects[t].shared)

    def shared_ids(self) -> set[int]:
        return {oid for oid, o in self.objects.items() if o.shared}

    def reachable(self, roots: Iterable[int]) -> set[int]:
        seen: set[int] = set()
        work = [ptr_id(r) for r in roots if r and ptr_tag(r) == Tag.HEAP and ptr_id(r) in self.objects]
        while work:
            oid = work.pop()
            if oid in seen:
                continue
            seen.add(oid)
            work.extend(self.targets(self.objects[oid]))
        return seen

    def snapshot(
        self,
        roots: tuple[int, ...],
        *,
        fault_handler: int = 0,
        error: bool = False,
        accept: bool = False,
    ) -> Snapshot:
        """Freeze the part of the heap reachable from ``roots``."""
        live = self.reachable(roots)
        objects: dict[int, HeapObject] = {}
        for oid in live:
            obj = self.objects[oid]
            if obj.allocas and not all(a in live for a in obj.allocas):
                obj = self.writable(oid)
                obj.allocas = tuple(a for a in obj.allocas if a in live)
            obj.frozen = True
            objects[oid] = obj
        return Snapshot(objects, tuple(roots), self.next_id, fault_handler, error, accept)


@dataclass(frozen=True, eq=False)
class Snapshot:
    """Immutable, reachability-closed program state.

    ``roots`` holds pointer bits for (scheduler state, globals object,
    constants object, interrupted frame); unused roots are 0.  Snapshots
    compare only through :func:`canonicalize`.
    """

    objects: Mapping[int, HeapObject]
    roots: tuple[int, ...]
    next_id: int
    fault_handler: int = 0
    error: bool = False
    accept: bool = False

    def restore(self) -> Heap:
        h = Heap(dict(self.objects), self.next_id)
        h.globals_ptr = self.roots[1]
        h.constants_ptr = self.roots[2]
        return h

    def read(self, p: int | Pointer, width: int) -> tuple[int, bool, bool]:
        return self.restore().read(p, width)

    @cached_property
    def key(self) -> bytes:
        return canonicalize(self)

    @cached_property
    def raw_key(self) -> bytes:
        return canonicalize(self, renumber=False)

    def digest(self) -> str:
        return hashlib.sha256(self.key).hexdigest()

    def __repr__(self) -> str:
        return f"Snapshot({len(self.objects)} objects, roots={[hex(r) for r in self.roots]})"


_BIT_TABLE = bytes.maketrans(b"\x00\x01", b"01")


def _bitmap(flags: bytes | bytearray) -> bytes:
    """Pack a 0/1-per-byte mask LSB-first into ceil(n/8) bytes."""
    n = len(flags)
    if not n:
        return b""
    text = bytes(flags).translate(_BIT_TABLE)[::-1]
    return int(text, 2).to_bytes((n + 7) // 8, "little")


def preorder(s: Snapshot) -> list[int]:
    """Object ids in DFS pre-order from each root in turn, children by slot offset."""
    index: dict[int, int] = {}
    order: list[int] = []
    for root in s.roots:
        if not root or ptr_tag(root) != Tag.HEAP or ptr_id(root) not in s.objects:
            continue
        stack = [ptr_id(root)]
        while stack:
            oid = stack.pop()
            if oid in index:
                continue
            index[oid] = len(order)
            order.append(oid)
            obj = s.objects[oid]
            kids = []
            for off in sorted(obj.pointers):
                bits = obj.slot(off)
                if ptr_tag(bits) == Tag.HEAP and ptr_id(bits) in s.objects:
                    kids.append(ptr_id(bits))
            stack.extend(reversed(kids))
    return order


def canonicalize(s: Snapshot, *, renumber: bool = True) -> bytes:
    """Byte key of a snapshot; equal for snapshots equal up to object renaming.

    Layout: ``GVM1``, ``u32`` object count, then per object in DFS
    pre-order ``u32 size, bytes, def bitmap, ptrmap bitmap, u8 flags``
    (plus the alloca list when flag bit 2 is set), then the roots, the
    fault handler and ``u8`` state flags.  With ``renumber=False`` the
    original ids are kept (objects sorted by id, each prefixed by its id).
    """
    if renumber:
        order = preorder(s)
        index = {oid: i for i, oid in enumerate(order)}
    else:
        order = sorted(s.objects)
        index = {oid: oid for oid in order}
    out = bytearray(b"GVM1")
    out += struct.pack("<I", len(order))
    for oid in order:
        obj = s.objects[oid]
        data = obj.data
        if obj.pointers:
            data = bytearray(data)
            for off in obj.pointers:
                bits = int.from_bytes(data[off : off + 8], "little")
                if ptr_tag(bits) == Tag.HEAP:
                    new = index.get(ptr_id(bits), DANGLING_ID)
                    bits = make_ptr(Tag.HEAP, new, ptr_offset(bits))
                    data[off : off + 8] = bits.to_bytes(8, "little")
        if not renumber:
            out += struct.pack("<I", oid)
        out += struct.pack("<I", obj.size)
        out += data
        out += _bitmap(obj.defined)
        slots = bytearray(obj.size // 8)
        for off in obj.pointers:
            slots[off // 8] = 1
        out += _bitmap(slots)
        flags = 1 | (2 if obj.shared else 0) | (4 if obj.allocas else 0)
        out.append(flags)
        if obj.allocas:
            idx = sorted(index[a] for a in obj.allocas if a in index)
            out += struct.pack(f"<I{len(idx)}I", len(idx), *idx)
    for root in s.roots:
        if root and ptr_tag(root) == Tag.HEAP:
            out += struct.pack("<II", index.get(ptr_id(root), DANGLING_ID), ptr_offset(root))
        else:
            out += struct.pack("<II", 0xFFFFFFFF, 0)
    out += struct.pack("<Q", s.fault_handler)
    out.append((1 if s.error else 0) | (2 if s.accept else 0))
    return bytes(out)


def heap_dot(s: Snapshot, name: str = "heap") -> str:
    """Graphviz rendering of a snapshot's memory graph."""
    roots = ("sched", "globals", "constants", "int_frame")
    lines = [f"digraph {name} {{", "  node [shape=record];"]
    for oid in sorted(s.objects):
        obj = s.objects[oid]
        tags = " shared" if obj.shared else ""
        lines.append(f'  o{oid} [label="#{oid} | {obj.size} B{tags}"];')
    for oid in sorted(s.objects):
        for off, bits in s.objects[oid].edges():
            if ptr_tag(bits) == Tag.HEAP and ptr_id(bits) in s.objects:
                lines.append(f'  o{oid} -> o{ptr_id(bits)} [label="+{off}"];')
    for name_, bits in zip(roots, s.roots):
        if bits and ptr_tag(bits) == Tag.HEAP and ptr_id(bits) in s.objects:
            lines.append(f"  {name_} [shape=plaintext];")
            lines.append(f"  {name_} -> o{ptr_id(bits)} [style=dashed];")
    lines.append("}")
    return "\n".join(lines) + "\n"
