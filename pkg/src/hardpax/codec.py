"""Canonical byte encoding shared by the wire and storage formats.

Every structure that gets checksummed (network messages, log records,
checkpoints, state digests) is encoded with the rules below so that two
replicas always produce bit-identical bytes for equal values:

* integers are big-endian and fixed width: u8, u32, u64
* strings are UTF-8 bytes prefixed by a u32 byte length
* raw byte blobs are prefixed by a u32 byte length
* sequences are a u32 element count followed by the encoded elements
  in order
* composite records are their fields encoded back to back in declared
  field order, with no padding

There is no self-description or versioning in the format; both ends
agree on layouts by construction.
"""

import struct

_U8 = struct.Struct(">B")
_U32 = struct.Struct(">I")
_U64 = struct.Struct(">Q")

U32_MAX = 0xFFFFFFFF
U64_MAX = 0xFFFFFFFFFFFFFFFF


# Bound pack methods double as the functions: same behavior, one call
# frame less on paths that encode millions of fields per run.
pack_u8 = _U8.pack
pack_u32 = _U32.pack
pack_u64 = _U64.pack


def pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return _U32.pack(len(raw)) + raw


def pack_bytes(b: bytes) -> bytes:
    return _U32.pack(len(b)) + b


class Reader:
    """Sequential decoder over one canonical byte string."""

    __slots__ = ("data", "pos")

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def _take(self, n: int) -> bytes:
        end = self.pos + n
        if end > len(self.data):
            raise DecodeError("truncated input at offset %d" % self.pos)
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def u8(self) -> int:
        return _U8.unpack(self._take(1))[0]

    def u32(self) -> int:
        return _U32.unpack(self._take(4))[0]

    def u64(self) -> int:
        return _U64.unpack(self._take(8))[0]

    def str(self) -> str:
        return self._take(self.u32()).decode("utf-8")

    def bytes(self) -> bytes:
        return self._take(self.u32())

    def done(self) -> bool:
        return self.pos == len(self.data)

    def expect_done(self) -> None:
        if not self.done():
            raise DecodeError("%d trailing bytes" % (len(self.data) - self.pos))


class DecodeError(ValueError):
    """Input bytes do not parse as the expected canonical layout."""
