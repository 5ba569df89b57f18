"""Packed bit sequences.

A :class:`BitStream` stores bits eight per byte, most significant bit first,
with an exact bit count. Padding bits in the final byte are always zero, which
lets word-level statistics ignore the ragged end.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .errors import DomainError

# Default chunk for streaming passes over large sequences: 8 Mbit (1 MiB packed).
DEFAULT_CHUNK_BITS = 1 << 23


def _padding_mask(length: int) -> int:
    rem = length % 8
    return 0 if rem == 0 else (0xFF >> rem)


@dataclass(frozen=True, eq=False)
class BitStream:
    """Immutable packed binary sequence.

    Attributes:
        data: ``uint8`` array of ``ceil(length / 8)`` bytes, MSB-first.
        length: Number of valid bits.
    """

    data: np.ndarray
    length: int

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.uint8).reshape(-1)
        length = int(self.length)
        if length < 0:
            raise DomainError("length must be non-negative")
        if data.size != (length + 7) // 8:
            raise DomainError(
                f"{data.size} bytes cannot hold exactly {length} bits"
            )
        if data.size and data[-1] & _padding_mask(length):
            raise DomainError("padding bits in the final byte must be zero")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "length", length)

    # construction -----------------------------------------------------

    @classmethod
    def from_bits(cls, bits: Iterable[int] | np.ndarray) -> BitStream:
        arr = np.asarray(bits if isinstance(bits, np.ndarray) else list(bits))
        arr = arr.astype(np.uint8, copy=False).reshape(-1)
        if arr.size and arr.max() > 1:
            raise DomainError("bits must be 0 or 1")
        return cls(np.packbits(arr), arr.size)

    @classmethod
    def from_string(cls, text: str) -> BitStream:
        """Parse ``"0110 1001"``; whitespace is ignored."""
        chars = "".join(text.split())
        if set(chars) - {"0", "1"}:
            raise DomainError("bit strings may contain only '0', '1' and spaces")
        return cls.from_bits(np.frombuffer(chars.encode(), dtype=np.uint8) - ord("0"))

    @classmethod
    def from_bytes(cls, payload: bytes, length: int | None = None) -> BitStream:
        data = np.frombuffer(payload, dtype=np.uint8).copy()
        if length is None:
            length = 8 * data.size
        nbytes = (length + 7) // 8
        if nbytes > data.size:
            raise DomainError("payload shorter than requested length")
        data = data[:nbytes]
        if nbytes:
            data[-1] &= ~_padding_mask(length) & 0xFF
        return cls(data, length)

    @classmethod
    def concat(cls, parts: Iterable[BitStream]) -> BitStream:
        parts = list(parts)
        if all(p.length % 8 == 0 for p in parts[:-1]):
            data = np.concatenate([p.data for p in parts]) if parts else np.zeros(0, np.uint8)
            return cls(data, sum(p.length for p in parts))
        return cls.from_bits(np.concatenate([p.to_bits() for p in parts]))

    # access -----------------------------------------------------------

    def __len__(self) -> int:
        return self.length

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitStream):
            return NotImplemented
        return self.length == other.length and np.array_equal(self.data, other.data)

    __hash__ = None

    def __repr__(self) -> str:
        if self.length <= 64:
            return f"BitStream({self.to_string()!r})"
        return f"BitStream(<{self.length} bits>)"

    def to_bits(self) -> np.ndarray:
        """Unpacked ``uint8`` array of 0/1 values."""
        return np.unpackbits(self.data, count=self.length)

    def to_string(self) -> str:
        return (self.to_bits() + ord("0")).tobytes().decode()

    def tobytes(self) -> bytes:
        return self.data.tobytes()

    def count_ones(self) -> int:
        return int(np.bitwise_count(self.data).sum(dtype=np.int64))

    def slice(self, start: int, stop: int) -> BitStream:
        start = max(0, min(start, self.length))
        stop = max(start, min(stop, self.length))
        if start % 8 == 0:
            length = stop - start
            data = self.data[start // 8 : start // 8 + (length + 7) // 8].copy()
            if data.size:
                data[-1] &= ~_padding_mask(length) & 0xFF
            return BitStream(data, length)
        lo, hi = start // 8, (stop + 7) // 8
        bits = np.unpackbits(self.data[lo:hi])[start - 8 * lo : stop - 8 * lo]
        return BitStream.from_bits(bits)

    def chunks(self, chunk_bits: int = DEFAULT_CHUNK_BITS) -> Iterator[BitStream]:
        """Consecutive byte-aligned pieces of at most ``chunk_bits`` bits."""
        if chunk_bits <= 0 or chunk_bits % 8:
            raise DomainError("chunk_bits must be a positive multiple of 8")
        for start in range(0, self.length, chunk_bits):
            yield self.slice(start, start + chunk_bits)
