"""Message wire formats: golden byte strings and round trips.

The golden expectations are built with raw struct packing, independent
of the codec module, so an accidental layout change in either place
fails loudly.
"""

import struct

import pytest
from hypothesis import given, strategies as st

from hardpax.codec import DecodeError
from hardpax.hashapp import Operation, OpKind
from hardpax.messages import (
    BallotNumber,
    ClientRequestMsg,
    DecisionMsg,
    PrepareMsg,
    PromiseMsg,
    ProposalMsg,
    SlotRequestMsg,
    Value,
    VoteMsg,
    decode_log_record,
    decode_message,
    encode_log_record,
    encode_message,
    pack_ops,
)
from hardpax.validation import StateChecksum

OPS = (Operation(OpKind.ADD, b"12-3"), Operation(OpKind.REMOVE, b"x"))
VALUE = Value(OPS)
BALLOT = BallotNumber(7, 2)


def be8(n):
    return struct.pack(">B", n)


def be32(n):
    return struct.pack(">I", n)


def be64(n):
    return struct.pack(">Q", n)


def golden_ops(ops):
    out = be32(len(ops))
    for op in ops:
        out += be8(op.kind.value) + be32(len(op.element)) + op.element
    return out


class TestGoldenBytes:
    def test_ops_blob(self):
        assert pack_ops(OPS) == golden_ops(OPS)
        assert pack_ops(()) == b"\x00\x00\x00\x00"

    def test_value_packed_is_cached_and_canonical(self):
        v = Value(OPS)
        first = v.packed
        assert first == golden_ops(OPS)
        assert v.packed is first

    def test_client_request(self):
        msg = ClientRequestMsg(3, OPS)
        assert encode_message(msg) == be8(1) + be32(3) + golden_ops(OPS)

    def test_prepare(self):
        msg = PrepareMsg(BALLOT, 42)
        assert encode_message(msg) == be8(2) + be32(7) + be32(2) + be64(42)

    def test_promise(self):
        msg = PromiseMsg(BALLOT, 1, ((5, BallotNumber(3, 0), VALUE),), 17)
        expected = (
            be8(3) + be32(7) + be32(2) + be32(1)
            + be64(18)  # max_decided is stored biased by +1
            + be32(1)
            + be64(5) + be32(3) + be32(0) + golden_ops(OPS)
        )
        assert encode_message(msg) == expected

    def test_promise_empty_history_and_no_decisions(self):
        msg = PromiseMsg(BALLOT, 4, (), -1)
        expected = be8(3) + be32(7) + be32(2) + be32(4) + be64(0) + be32(0)
        assert encode_message(msg) == expected

    def test_proposal(self):
        msg = ProposalMsg(BALLOT, 11, VALUE)
        assert encode_message(msg) == (
            be8(4) + be32(7) + be32(2) + be64(11) + golden_ops(OPS)
        )

    def test_vote(self):
        msg = VoteMsg(BALLOT, 11, VALUE, 4, StateChecksum(101, 0xDEADBEEF))
        assert encode_message(msg) == (
            be8(5) + be32(7) + be32(2) + be64(11) + golden_ops(OPS)
            + be32(4) + be64(101) + be64(0xDEADBEEF)
        )

    def test_decision(self):
        msg = DecisionMsg(11, VALUE)
        assert encode_message(msg) == be8(6) + be64(11) + golden_ops(OPS)

    def test_slot_request(self):
        msg = SlotRequestMsg(2, 900)
        assert encode_message(msg) == be8(7) + be32(2) + be64(900)

    def test_log_record(self):
        assert encode_log_record(11, VALUE) == be64(11) + golden_ops(OPS)


class TestDecoding:
    def test_unknown_tag(self):
        with pytest.raises(DecodeError):
            decode_message(b"\x63")

    def test_trailing_garbage(self):
        raw = encode_message(SlotRequestMsg(2, 900)) + b"\x00"
        with pytest.raises(DecodeError):
            decode_message(raw)

    def test_truncated(self):
        raw = encode_message(DecisionMsg(11, VALUE))
        with pytest.raises(DecodeError):
            decode_message(raw[:-3])

    def test_log_record_round_trip(self):
        assert decode_log_record(encode_log_record(11, VALUE)) == (11, VALUE)


elements = st.binary(min_size=0, max_size=24)
operations = st.builds(Operation, st.sampled_from(list(OpKind)), elements)
values = st.builds(Value, st.tuples(*[operations] * 0) | st.lists(
    operations, max_size=6).map(tuple))
ballots = st.builds(
    BallotNumber,
    st.integers(min_value=0, max_value=0xFFFFFFFF),
    st.integers(min_value=0, max_value=0xFFFFFFFF),
)
slots = st.integers(min_value=0, max_value=2**63)
rids = st.integers(min_value=0, max_value=100)
checksums = st.builds(
    StateChecksum,
    st.integers(min_value=0, max_value=2**63),
    st.integers(min_value=0, max_value=0xFFFFFFFFFFFFFFFF),
)
accepted_entries = st.lists(
    st.tuples(slots, ballots, values), max_size=4).map(tuple)

messages = st.one_of(
    st.builds(ClientRequestMsg, rids, st.lists(operations, max_size=6).map(tuple)),
    st.builds(PrepareMsg, ballots, slots),
    st.builds(PromiseMsg, ballots, rids, accepted_entries,
              st.integers(min_value=-1, max_value=2**62)),
    st.builds(ProposalMsg, ballots, slots, values),
    st.builds(VoteMsg, ballots, slots, values, rids, checksums),
    st.builds(DecisionMsg, slots, values),
    st.builds(SlotRequestMsg, rids, slots),
)


class TestRoundTripProperties:
    @given(messages)
    def test_any_message(self, msg):
        assert decode_message(encode_message(msg)) == msg

    @given(slots, values)
    def test_log_records(self, slot, value):
        assert decode_log_record(encode_log_record(slot, value)) == (slot, value)


class TestBallotOrdering:
    def test_round_dominates(self):
        assert BallotNumber(2, 0) > BallotNumber(1, 9)

    def test_proposer_breaks_ties(self):
        assert BallotNumber(1, 3) > BallotNumber(1, 2)

    @given(ballots, ballots)
    def test_total_order_matches_tuple_order(self, a, b):
        assert (a < b) == ((a.round, a.proposer) < (b.round, b.proposer))
