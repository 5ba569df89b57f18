import numpy as np
import pytest
from hypothesis import given, strategies as st

from photonqrng.bitstream import BitStream
from photonqrng.errors import DomainError

bit_lists = st.lists(st.integers(0, 1), max_size=200)


def test_msb_first_packing():
    s = BitStream.from_string("10000000 1")
    assert s.tobytes() == b"\x80\x80"
    assert len(s) == 9
    assert s.count_ones() == 2


def test_empty():
    s = BitStream.from_string("")
    assert len(s) == 0 and s.tobytes() == b"" and s.to_string() == ""


@pytest.mark.parametrize("text", ["012", "1a0"])
def test_rejects_non_bits(text):
    with pytest.raises(DomainError):
        BitStream.from_string(text)


def test_rejects_dirty_padding_and_wrong_size():
    with pytest.raises(DomainError):
        BitStream(np.array([0x81], np.uint8), 4)
    with pytest.raises(DomainError):
        BitStream(np.array([0, 0], np.uint8), 8)


def test_from_bytes_clears_padding():
    s = BitStream.from_bytes(b"\xff\xff", length=12)
    assert s.to_string() == "1" * 12
    assert s.tobytes() == b"\xff\xf0"
    with pytest.raises(DomainError):
        BitStream.from_bytes(b"\x00", length=9)


def test_equality():
    assert BitStream.from_string("101") == BitStream.from_bits([1, 0, 1])
    assert BitStream.from_string("101") != BitStream.from_string("1010")


@given(bits=bit_lists)
def test_round_trip(bits):
    s = BitStream.from_bits(bits)
    assert s.to_bits().tolist() == bits
    assert BitStream.from_string(s.to_string()) == s
    assert s.count_ones() == sum(bits)


@given(bits=bit_lists, a=st.integers(-5, 210), b=st.integers(-5, 210))
def test_slice_matches_list(bits, a, b):
    s = BitStream.from_bits(bits)
    lo = max(0, min(a, len(bits)))
    assert s.slice(a, b).to_bits().tolist() == bits[lo:max(lo, b)]


@given(parts=st.lists(bit_lists, max_size=5))
def test_concat(parts):
    joined = BitStream.concat(BitStream.from_bits(p) for p in parts)
    assert joined.to_bits().tolist() == [b for p in parts for b in p]


@given(bits=bit_lists, size=st.sampled_from([8, 16, 64]))
def test_chunks_reassemble(bits, size):
    s = BitStream.from_bits(bits)
    pieces = list(s.chunks(size))
    assert all(len(p) <= size for p in pieces)
    assert BitStream.concat(pieces) == s


def test_chunk_size_must_be_byte_multiple():
    with pytest.raises(DomainError):
        list(BitStream.from_string("1010").chunks(12))
