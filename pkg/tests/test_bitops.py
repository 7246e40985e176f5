import random

import pytest

from qspir.bitops import (
    bit_get,
    bytes_for_bits,
    mask_to_positions,
    pack_bits,
    pad_value,
    take_bits,
    unpack_bits,
    xor_bytes,
    xor_many,
)


def test_bytes_for_bits():
    assert [bytes_for_bits(v) for v in (0, 1, 7, 8, 9, 16, 17)] == [
        0, 1, 1, 1, 2, 2, 3,
    ]


def test_xor_bytes_involution():
    rng = random.Random(1)
    for _ in range(50):
        n = rng.randrange(1, 40)
        a = rng.randbytes(n)
        b = rng.randbytes(n)
        assert xor_bytes(xor_bytes(a, b), b) == a
        assert xor_bytes(a, bytes(n)) == a
    with pytest.raises(ValueError):
        xor_bytes(b"ab", b"abc")


def test_xor_many():
    assert xor_many([], 3) == b"\x00\x00\x00"
    items = [bytes([i, i + 1]) for i in range(5)]
    acc = bytes(2)
    for item in items:
        acc = xor_bytes(acc, item)
    assert xor_many(items, 2) == acc
    with pytest.raises(ValueError):
        xor_many([b"a", b"bc"], 1)


def test_pack_unpack_roundtrip():
    rng = random.Random(2)
    for _ in range(50):
        nbits = rng.randrange(1, 70)
        bits = [rng.randrange(2) for _ in range(nbits)]
        buf = pack_bits(bits)
        assert len(buf) == bytes_for_bits(nbits)
        assert unpack_bits(buf, nbits) == bits
        assert [bit_get(buf, i) for i in range(nbits)] == bits


def test_take_bits_matches_manual_slice():
    rng = random.Random(3)
    material = rng.randbytes(64)
    whole = int.from_bytes(material, "little")
    for _ in range(100):
        nbits = rng.randrange(0, 90)
        offset = rng.randrange(0, 8 * 64 - nbits + 1)
        expect = (whole >> offset) & ((1 << nbits) - 1)
        got = take_bits(material, offset, nbits)
        assert int.from_bytes(got, "little") == expect
        assert len(got) == bytes_for_bits(nbits)
    with pytest.raises(ValueError):
        take_bits(material, 8 * 64 - 3, 4)
    with pytest.raises(ValueError):
        take_bits(material, -1, 4)


def test_mask_to_positions():
    assert mask_to_positions(0b1011, 4) == [0, 1, 3]
    assert mask_to_positions(0, 4) == []
    assert mask_to_positions(0b1111, 2) == [0, 1]  # clipped to width


def test_pad_value():
    assert pad_value(b"\x05", 13) == b"\x05\x00"
    with pytest.raises(ValueError):
        pad_value(b"\x05\x00\x00", 13)  # too long
    with pytest.raises(ValueError):
        pad_value(b"\x00\xff", 13)  # spare high bits set
