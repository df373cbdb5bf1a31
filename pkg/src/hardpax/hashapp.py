"""Replicated hash table of strings, the application under test.

The table is a set; ops are ADD, REMOVE and LIST. Each mutating op is
followed by a semantic check that its effect actually happened (the
element is present after ADD, absent after REMOVE), and the element
count is held in a mirrored cell. Both checks catch corruption that
slips between the decoded operation and the state mutation, where no
checksum is watching.

The canonical state digest is the decimal element count, a newline,
then every element in ascending byte order, each followed by a newline.
Equal sets always digest to equal bytes, regardless of insertion order.
"""

from dataclasses import dataclass
from enum import Enum

from sortedcontainers import SortedList

from . import codec
from .hardening import MirroredCell, SemanticCheckError, hash64


class OpKind(Enum):
    ADD = 1
    REMOVE = 2
    LIST = 3


@dataclass(frozen=True, slots=True)
class Operation:
    """One table mutation. The element is held as its utf-8 bytes, which
    is also exactly how it travels on the wire and sits in the table."""

    kind: OpKind
    element: bytes


def make_element(counter: int, replica_id: int) -> bytes:
    """Element naming scheme for generated load: '<counter>-<replica>'."""
    return b"%d-%d" % (counter, replica_id)


class HashTableApp:
    """One replica's copy of the table."""

    __slots__ = ("_members", "_ordered", "count")

    def __init__(self):
        self._members: set[bytes] = set()
        self._ordered = SortedList()
        self.count = MirroredCell(0)

    def apply(self, op: Operation, injector=None) -> None:
        """Apply one operation and check it took effect.

        Raises SemanticCheckError when the post-condition of the op does
        not hold, which is the application-level corruption signal.
        """
        if op.kind is OpKind.LIST:
            return
        elem = op.element
        if op.kind is OpKind.ADD:
            stored = elem
            if injector is not None and injector.add_specs:
                stored = injector.filter_app_add(elem)
            if stored is not None and stored not in self._members:
                self._members.add(stored)
                self._ordered.add(stored)
            if elem not in self._members:
                raise SemanticCheckError("added element %r missing" % op.element)
        else:
            if elem in self._members:
                self._members.remove(elem)
                self._ordered.remove(elem)
            if elem in self._members:
                raise SemanticCheckError("removed element %r present" % op.element)
        self.count.write(len(self._members))

    def elements(self) -> list[bytes]:
        return list(self._ordered)

    def digest_bytes(self) -> bytes:
        """Canonical digest input for the current state."""
        n = self.count.read()
        if n == 0:
            return b"0\n"
        # Joining the sorted structure's internal buckets produces the
        # same bytes as joining its elements one by one, but traverses
        # plain lists; the digest runs every validation window, over the
        # whole table, on every replica.
        lists = self._ordered._lists
        if len(lists) == 1:
            body = b"\n".join(lists[0])
        else:
            body = b"\n".join([b"\n".join(bucket) for bucket in lists])
        return b"%d\n" % n + body + b"\n"

    def digest(self) -> int:
        return hash64(self.digest_bytes())

    def final_state_report(self) -> str:
        return self.digest_bytes().decode("utf-8")

    def tamper_swap_element(self, replacement: bytes) -> bool:
        """Silently replace the smallest element, keeping the count intact.

        Test hook for provoking pure state divergence: no semantic check
        or mirrored cell ever sees the swap, only the state digest does.
        Returns False on an empty table.
        """
        if not self._ordered:
            return False
        victim = self._ordered[0]
        self._members.remove(victim)
        self._ordered.remove(victim)
        if replacement not in self._members:
            self._members.add(replacement)
            self._ordered.add(replacement)
        self.count.write(len(self._members))
        return True


def encode_checkpoint(app: HashTableApp, applied_count: int) -> bytes:
    """Canonical checkpoint: applied transition count, then the elements."""
    parts = [codec.pack_u64(applied_count), codec.pack_u32(app.count.read())]
    pack_len = codec.pack_u32
    append = parts.append
    for elem in app._ordered:
        append(pack_len(len(elem)))
        append(elem)
    return b"".join(parts)


def decode_checkpoint(data: bytes) -> tuple[HashTableApp, int]:
    r = codec.Reader(data)
    applied_count = r.u64()
    n = r.u32()
    app = HashTableApp()
    for _ in range(n):
        elem = r.bytes()
        app._members.add(elem)
        app._ordered.add(elem)
    r.expect_done()
    app.count.write(len(app._members))
    return app, applied_count
