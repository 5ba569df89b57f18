"""Post-processing of raw bit streams: bias, decimation and debiasing."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .bitstream import DEFAULT_CHUNK_BITS, BitStream
from .errors import DomainError, EmptyStreamError

# keep one bit in 7: consecutive outputs are 7 gates apart, past the k <= 6
# afterpulse correlations of the raw stream
DEFAULT_DECIMATION = 7
DEFAULT_PERES_DEPTH = 32


class BiasReport(NamedTuple):
    p0: float
    p1: float
    bias: float


def measure_bias(stream: BitStream) -> BiasReport:
    """Zero/one frequencies and ``bias = P(0) - 1/2``."""
    if stream.length == 0:
        raise EmptyStreamError("bias of an empty stream is undefined")
    ones = stream.count_ones()
    p1 = ones / stream.length
    p0 = (stream.length - ones) / stream.length
    return BiasReport(p0, p1, p0 - 0.5)


def decimate(stream: BitStream, factor: int = DEFAULT_DECIMATION) -> BitStream:
    """Keep bits at indices ``0, factor, 2*factor, ...``."""
    if int(factor) != factor or factor < 1:
        raise DomainError(f"decimation factor must be a positive integer, got {factor}")
    if factor == 1:
        return stream
    # chunk boundaries on multiples of 8*factor keep input and output byte aligned
    chunk = 8 * factor * max(1, DEFAULT_CHUNK_BITS // (8 * factor))
    parts = [np.packbits(c.to_bits()[::factor]) for c in stream.chunks(chunk)]
    data = np.concatenate(parts) if parts else np.zeros(0, np.uint8)
    return BitStream(data, (stream.length + factor - 1) // factor)


def _von_neumann_bits(bits: np.ndarray) -> np.ndarray:
    first, second = bits[0 : bits.size - 1 : 2], bits[1::2]
    return first[first != second]


def von_neumann(stream: BitStream) -> BitStream:
    """Pairwise debiasing: 01 -> 0, 10 -> 1, 00 and 11 -> nothing."""
    out = [_von_neumann_bits(c.to_bits()) for c in stream.chunks()]
    return BitStream.from_bits(np.concatenate(out) if out else np.zeros(0, np.uint8))


def _peres_bits(bits: np.ndarray, depth: int, out: list) -> None:
    if depth < 1 or bits.size < 2:
        return
    first, second = bits[0 : bits.size - 1 : 2], bits[1::2]
    differ = first != second
    out.append(first[differ])
    _peres_bits(first ^ second, depth - 1, out)
    _peres_bits(first[~differ], depth - 1, out)


def peres(stream: BitStream, max_depth: int = DEFAULT_PERES_DEPTH) -> BitStream:
    """Iterated von Neumann extractor.

    Emits the von Neumann output of the pairs, then recurses on the XOR of
    every pair and on the shared value of each concordant pair. Depth 1 is
    plain von Neumann.
    """
    if int(max_depth) != max_depth or max_depth < 1:
        raise DomainError(f"max_depth must be a positive integer, got {max_depth}")
    out: list[np.ndarray] = []
    _peres_bits(stream.to_bits(), int(max_depth), out)
    return BitStream.from_bits(np.concatenate(out) if out else np.zeros(0, np.uint8))
