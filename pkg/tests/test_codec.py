"""Primitive wire codec: golden bytes and round trips."""

import pytest
from hypothesis import given, strategies as st

from hardpax import codec


class TestGoldenBytes:
    def test_u8(self):
        assert codec.pack_u8(0) == b"\x00"
        assert codec.pack_u8(0xAB) == b"\xab"
        assert codec.pack_u8(255) == b"\xff"

    def test_u32_is_big_endian(self):
        assert codec.pack_u32(0) == b"\x00\x00\x00\x00"
        assert codec.pack_u32(1) == b"\x00\x00\x00\x01"
        assert codec.pack_u32(0x01020304) == b"\x01\x02\x03\x04"
        assert codec.pack_u32(0xFFFFFFFF) == b"\xff\xff\xff\xff"

    def test_u64_is_big_endian(self):
        assert codec.pack_u64(1) == b"\x00" * 7 + b"\x01"
        assert codec.pack_u64(0x0102030405060708) == bytes(range(1, 9))
        assert codec.pack_u64(codec.U64_MAX) == b"\xff" * 8

    def test_str_is_length_prefixed_utf8(self):
        assert codec.pack_str("") == b"\x00\x00\x00\x00"
        assert codec.pack_str("ab") == b"\x00\x00\x00\x02ab"
        assert codec.pack_str("é") == b"\x00\x00\x00\x02\xc3\xa9"

    def test_bytes_is_length_prefixed(self):
        assert codec.pack_bytes(b"") == b"\x00\x00\x00\x00"
        assert codec.pack_bytes(b"\x00\xff") == b"\x00\x00\x00\x02\x00\xff"


class TestReader:
    def test_sequential_fields(self):
        data = codec.pack_u8(7) + codec.pack_u32(8) + codec.pack_u64(9)
        r = codec.Reader(data)
        assert (r.u8(), r.u32(), r.u64()) == (7, 8, 9)
        assert r.done()
        r.expect_done()

    def test_truncated_input(self):
        r = codec.Reader(b"\x01\x02")
        with pytest.raises(codec.DecodeError):
            r.u32()

    def test_trailing_bytes_rejected(self):
        r = codec.Reader(b"\x01\x02")
        r.u8()
        with pytest.raises(codec.DecodeError):
            r.expect_done()

    def test_str_and_bytes(self):
        data = codec.pack_str("hé") + codec.pack_bytes(b"\x00\x01")
        r = codec.Reader(data)
        assert r.str() == "hé"
        assert r.bytes() == b"\x00\x01"
        assert r.done()


class TestRoundTrips:
    @given(st.integers(min_value=0, max_value=255))
    def test_u8(self, n):
        assert codec.Reader(codec.pack_u8(n)).u8() == n

    @given(st.integers(min_value=0, max_value=0xFFFFFFFF))
    def test_u32(self, n):
        assert codec.Reader(codec.pack_u32(n)).u32() == n

    @given(st.integers(min_value=0, max_value=codec.U64_MAX))
    def test_u64(self, n):
        assert codec.Reader(codec.pack_u64(n)).u64() == n

    @given(st.text(max_size=100))
    def test_str(self, s):
        assert codec.Reader(codec.pack_str(s)).str() == s

    @given(st.binary(max_size=100))
    def test_bytes(self, b):
        assert codec.Reader(codec.pack_bytes(b)).bytes() == b
