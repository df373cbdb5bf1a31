"""Protocol messages and their canonical wire layouts.

Field layouts, in declared order (see codec for primitive rules):

* ballot:     round u32, proposer u32
* operation:  kind u8, element str
* value:      op count u32, operations
* checksum:   state_count u64, hash u64
* message:    tag u8, then the body listed per type below

Replica identifiers are u32, slots and counters u64.
"""

import struct
from dataclasses import dataclass
from functools import cached_property

from . import codec
from .hashapp import Operation, OpKind
from .validation import StateChecksum


@dataclass(frozen=True, slots=True, order=True)
class BallotNumber:
    """Totally ordered by (round, proposer): higher rounds win, ties to the higher id."""

    round: int
    proposer: int


@dataclass(frozen=True)
class Value:
    """An ordered batch of client operations proposed for one slot."""

    ops: tuple[Operation, ...]

    @cached_property
    def packed(self) -> bytes:
        """Canonical encoding, computed once; one value object rides
        through many messages (proposal, votes, decisions, promises)."""
        return pack_ops(self.ops)


@dataclass(frozen=True, slots=True)
class ClientRequestMsg:
    """Ops forwarded to the believed coordinator by the replica they arrived at."""

    sender: int
    ops: tuple[Operation, ...]


@dataclass(frozen=True, slots=True)
class PrepareMsg:
    """Coordinator candidacy. from_slot is the candidate's lowest
    unapplied slot; acceptors only report votes at or above it, since
    the candidate already holds decisions for everything below."""

    ballot: BallotNumber
    from_slot: int


@dataclass(frozen=True, slots=True)
class PromiseMsg:
    """Acceptor's answer to a prepare.

    Carries the votes still held for slots the acceptor has not decided
    locally, plus its highest decided slot so the new coordinator places
    fresh proposals above every decision it may have missed (encoded
    biased by +1 so the empty case -1 fits an u64).
    """

    ballot: BallotNumber
    acceptor: int
    accepted: tuple[tuple[int, BallotNumber, Value], ...]  # (slot, ballot, value)
    max_decided: int


@dataclass(frozen=True, slots=True)
class ProposalMsg:
    ballot: BallotNumber
    slot: int
    value: Value


@dataclass(frozen=True, slots=True)
class VoteMsg:
    ballot: BallotNumber
    slot: int
    value: Value
    acceptor: int
    state_checksum: StateChecksum


@dataclass(frozen=True, slots=True)
class DecisionMsg:
    slot: int
    value: Value


@dataclass(frozen=True, slots=True)
class SlotRequestMsg:
    """Ask a peer for decisions at or above from_slot; catches up stragglers."""

    requester: int
    from_slot: int


Message = (
    ClientRequestMsg
    | PrepareMsg
    | PromiseMsg
    | ProposalMsg
    | VoteMsg
    | DecisionMsg
    | SlotRequestMsg
)

_TAGS = {
    ClientRequestMsg: 1,
    PrepareMsg: 2,
    PromiseMsg: 3,
    ProposalMsg: 4,
    VoteMsg: 5,
    DecisionMsg: 6,
    SlotRequestMsg: 7,
}


def _put_ballot(parts: list, b: BallotNumber) -> None:
    parts.append(codec.pack_u32(b.round))
    parts.append(codec.pack_u32(b.proposer))


_PACK_OP_HEAD = struct.Struct(">BI").pack  # kind, element byte length


def pack_ops(ops: tuple[Operation, ...]) -> bytes:
    """Operation-batch field: count u32, then kind u8 + element str each."""
    buf = bytearray(codec.pack_u32(len(ops)))
    for op in ops:
        elem = op.element
        buf += _PACK_OP_HEAD(op.kind.value, len(elem))
        buf += elem
    return bytes(buf)


def _put_value(parts: list, v: Value) -> None:
    parts.append(v.packed)


# Fused big-endian packers for the fixed-width message fields. They
# produce exactly the bytes the field-by-field primitives would (">"
# disables all padding), just with one call per group instead of one
# per field; votes alone go out tens of thousands of times per run.
_PACK_TAG_BALLOT_U64 = struct.Struct(">BIIQ").pack  # tag, round, proposer, slot
_PACK_ACCEPTOR_CHECKSUM = struct.Struct(">IQQ").pack  # acceptor, count, hash
_PACK_TAG_U64 = struct.Struct(">BQ").pack
_PACK_TAG_U32 = struct.Struct(">BI").pack
_PACK_TAG_U32_U64 = struct.Struct(">BIQ").pack


def encode_message(msg: Message) -> bytes:
    kind = type(msg)
    if kind is VoteMsg:
        b = msg.ballot
        cs = msg.state_checksum
        return b"".join((
            _PACK_TAG_BALLOT_U64(5, b.round, b.proposer, msg.slot),
            msg.value.packed,
            _PACK_ACCEPTOR_CHECKSUM(msg.acceptor, cs.state_count, cs.hash),
        ))
    if kind is ProposalMsg:
        b = msg.ballot
        return _PACK_TAG_BALLOT_U64(4, b.round, b.proposer, msg.slot) + msg.value.packed
    if kind is DecisionMsg:
        return _PACK_TAG_U64(6, msg.slot) + msg.value.packed
    if kind is ClientRequestMsg:
        return _PACK_TAG_U32(1, msg.sender) + pack_ops(msg.ops)
    if kind is PrepareMsg:
        b = msg.ballot
        return _PACK_TAG_BALLOT_U64(2, b.round, b.proposer, msg.from_slot)
    if kind is PromiseMsg:
        parts = [codec.pack_u8(3)]
        _put_ballot(parts, msg.ballot)
        parts.append(codec.pack_u32(msg.acceptor))
        parts.append(codec.pack_u64(msg.max_decided + 1))
        parts.append(codec.pack_u32(len(msg.accepted)))
        for slot, ballot, value in msg.accepted:
            parts.append(codec.pack_u64(slot))
            _put_ballot(parts, ballot)
            _put_value(parts, value)
        return b"".join(parts)
    if kind is SlotRequestMsg:
        return _PACK_TAG_U32_U64(7, msg.requester, msg.from_slot)
    raise TypeError("unknown message type %r" % kind)


def _get_ballot(r: codec.Reader) -> BallotNumber:
    return BallotNumber(r.u32(), r.u32())


def _get_ops(r: codec.Reader) -> tuple[Operation, ...]:
    n = r.u32()
    return tuple(Operation(OpKind(r.u8()), r.bytes()) for _ in range(n))


def decode_message(data: bytes) -> Message:
    r = codec.Reader(data)
    tag = r.u8()
    if tag == 1:
        msg: Message = ClientRequestMsg(r.u32(), _get_ops(r))
    elif tag == 2:
        msg = PrepareMsg(_get_ballot(r), r.u64())
    elif tag == 3:
        ballot = _get_ballot(r)
        acceptor = r.u32()
        max_decided = r.u64() - 1
        n = r.u32()
        accepted = tuple(
            (r.u64(), _get_ballot(r), Value(_get_ops(r))) for _ in range(n)
        )
        msg = PromiseMsg(ballot, acceptor, accepted, max_decided)
    elif tag == 4:
        msg = ProposalMsg(_get_ballot(r), r.u64(), Value(_get_ops(r)))
    elif tag == 5:
        msg = VoteMsg(
            _get_ballot(r),
            r.u64(),
            Value(_get_ops(r)),
            r.u32(),
            StateChecksum(r.u64(), r.u64()),
        )
    elif tag == 6:
        msg = DecisionMsg(r.u64(), Value(_get_ops(r)))
    elif tag == 7:
        msg = SlotRequestMsg(r.u32(), r.u64())
    else:
        raise codec.DecodeError("unknown message tag %d" % tag)
    r.expect_done()
    return msg


def encode_log_record(slot: int, value: Value) -> bytes:
    """Durable log record for one decided slot."""
    return codec.pack_u64(slot) + value.packed


def decode_log_record(data: bytes) -> tuple[int, Value]:
    r = codec.Reader(data)
    slot = r.u64()
    value = Value(_get_ops(r))
    r.expect_done()
    return slot, value
