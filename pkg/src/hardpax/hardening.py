"""Data integrity primitives: checksums, sealed envelopes, mirrored cells.

The failure model is non-malicious corruption: bits flip in memory, on
the wire, or on disk, but nobody forges checksums. A 64-bit FNV-1a over
the canonical encoding is therefore enough to make silent corruption of
a sealed payload vanishingly unlikely (collision odds 2**-64 per check),
while staying cheap enough to run on every message and record.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

from . import codec

log = logging.getLogger(__name__)

FNV64_OFFSET_BASIS = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def _hash64_py(data: bytes, state: int = FNV64_OFFSET_BASIS) -> int:
    h = state
    for b in data:
        h = ((h ^ b) * FNV64_PRIME) & _MASK64
    return h


def _build_fast_hash():
    import numba

    sig = numba.uint64(
        numba.types.Bytes(numba.uint8, 1, "C", readonly=True), numba.uint64
    )

    @numba.njit(sig, cache=True, nogil=True)
    def fnv64(data, state):  # pragma: no cover - jitted
        h = numba.uint64(state)
        prime = numba.uint64(FNV64_PRIME)
        for i in range(len(data)):
            h = (h ^ numba.uint64(data[i])) * prime
        return h

    fnv64(b"", FNV64_OFFSET_BASIS)
    return fnv64


try:
    _hash64_impl = _build_fast_hash()
except Exception:  # pragma: no cover - exercised only without numba
    log.info("falling back to pure-python fnv1a")
    _hash64_impl = _hash64_py


def hash64(data: bytes) -> int:
    """FNV-1a 64 of ``data``."""
    return int(_hash64_impl(data, FNV64_OFFSET_BASIS))


def hash64_update(state: int, data: bytes) -> int:
    """Continue an FNV-1a 64 computation from a previous state."""
    return int(_hash64_impl(data, state))


class IntegrityError(Exception):
    """Sealed payload no longer matches its checksum."""


class StateRedundancyError(Exception):
    """The two copies of a mirrored cell disagree."""


class SemanticCheckError(Exception):
    """An applied operation did not have its required effect."""


class Envelope(NamedTuple):
    """A payload plus the checksum it was sealed with.

    The checksum travels with the payload; verification recomputes the
    hash over the payload actually present and compares.
    """

    payload: bytes
    checksum: int

    def to_bytes(self) -> bytes:
        return codec.pack_u64(self.checksum) + codec.pack_bytes(self.payload)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Envelope":
        r = codec.Reader(data)
        checksum = r.u64()
        payload = r.bytes()
        r.expect_done()
        return cls(payload, checksum)


def seal(payload: bytes) -> Envelope:
    return Envelope(payload, int(_hash64_impl(payload, FNV64_OFFSET_BASIS)))


def verify_open(env: Envelope) -> bytes:
    """Return the payload if it still matches the envelope checksum."""
    if _hash64_impl(env.payload, FNV64_OFFSET_BASIS) != env.checksum:
        raise IntegrityError(
            "checksum mismatch: stored %016x" % (env.checksum & _MASK64)
        )
    return env.payload


class MirroredCell:
    """A value held twice; reads cross-check the copies.

    Catches single corruptions of loop-bearing counters that no checksum
    covers because they never leave the process.
    """

    __slots__ = ("_value", "_shadow")

    def __init__(self, value):
        self._value = value
        self._shadow = value

    def write(self, value) -> None:
        self._value = value
        self._shadow = value

    def read(self):
        if self._value != self._shadow:
            raise StateRedundancyError(
                "mirrored cell mismatch: %r vs %r" % (self._value, self._shadow)
            )
        return self._value

    def increment(self) -> int:
        """Cross-check, add one to both copies, return the new value."""
        value = self._value
        if value != self._shadow:
            raise StateRedundancyError(
                "mirrored cell mismatch: %r vs %r" % (value, self._shadow)
            )
        value += 1
        self._value = value
        self._shadow = value
        return value

    def peek(self):
        """Primary copy without the cross-check, for diagnostics only."""
        return self._value


class DetectionKind(Enum):
    INTEGRITY = "INTEGRITY"
    STATE_REDUNDANCY = "STATE_REDUNDANCY"
    SEMANTIC = "SEMANTIC"
    DIVERGENCE = "DIVERGENCE"
    DECISION_CONFLICT = "DECISION_CONFLICT"


@dataclass(frozen=True)
class DetectionRecord:
    """One detected fault: what kind, where in the run, and a free-form detail."""

    kind: DetectionKind
    replica_id: int
    state_count: int
    detail: str
