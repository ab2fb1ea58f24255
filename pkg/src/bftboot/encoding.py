"""Canonical byte encodings shared by the crypto, protocol and CLI layers.

Everything that is signed, digested or written to disk goes through the
length-prefixed field packing here, so there is exactly one serialization
convention in the code base.  Prefixes are 4-byte big-endian lengths; there
is no padding and no trailing data allowed.
"""

from __future__ import annotations


class MalformedInput(ValueError):
    """Raised when a byte string does not parse as the expected structure."""


def pack_fields(*fields: bytes) -> bytes:
    """Concatenate fields, each preceded by a 4-byte big-endian length."""
    out = bytearray()
    for field in fields:
        if not isinstance(field, (bytes, bytearray)):
            raise TypeError("fields must be bytes")
        out += len(field).to_bytes(4, "big")
        out += field
    return bytes(out)


def unpack_fields(data: bytes, expected: int | None = None) -> list[bytes]:
    """Inverse of pack_fields.  Rejects truncated or trailing bytes."""
    fields = []
    pos = 0
    total = len(data)
    while pos < total:
        if pos + 4 > total:
            raise MalformedInput("truncated length prefix")
        n = int.from_bytes(data[pos:pos + 4], "big")
        pos += 4
        if pos + n > total:
            raise MalformedInput("field extends past end of data")
        fields.append(bytes(data[pos:pos + n]))
        pos += n
    if expected is not None and len(fields) != expected:
        raise MalformedInput(f"expected {expected} fields, found {len(fields)}")
    return fields


def bits_to_bytes(bits) -> bytes:
    """Pack a 0/1 sequence into bytes, LSB-first within each byte."""
    out = bytearray((len(bits) + 7) // 8)
    for i, bit in enumerate(bits):
        if bit:
            out[i >> 3] |= 1 << (i & 7)
    return bytes(out)


def bytes_to_bits(data: bytes, count: int) -> tuple[int, ...]:
    """Unpack count bits from LSB-first packed bytes; spare bits must be zero."""
    if len(data) != (count + 7) // 8:
        raise MalformedInput("bit vector length mismatch")
    bits = tuple((data[i >> 3] >> (i & 7)) & 1 for i in range(count))
    if count % 8:
        spare = data[-1] >> (count % 8)
        if spare:
            raise MalformedInput("nonzero padding bits")
    return bits
