"""ENT-style statistics for bit streams.

For binary data the lag-``k`` serial correlation reduces to counts: the number
of ``(1, 1)`` pairs at lag ``k``, the total number of ones, and the ones among
the first and last ``k`` bits. Pair counts are taken 64 bits at a time with
popcounts, and the remaining arithmetic is done in exact integers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .bitstream import BitStream
from .errors import DegenerateError, DomainError, EmptyStreamError, InsufficientDataError

DEFAULT_MAX_LAG = 100
PI_BLOCK_BITS = 48
_PI_COORD_BITS = 24
# 384 = lcm(48, 64, 8): chunks keep Monte Carlo blocks and words aligned
ANALYSIS_CHUNK_BITS = 384 * 21845
_WORD_BLOCK = 1 << 17


def _lag_pair_counts(data: np.ndarray, lags: Sequence[int]) -> np.ndarray:
    """Number of ``(1, 1)`` pairs at each lag in packed, zero-padded ``data``."""
    nwords = (data.size + 7) // 8
    extra = max(lags) // 64 + 2
    buf = np.zeros(8 * (nwords + extra), dtype=np.uint8)
    buf[: data.size] = data
    words = buf.view(">u8").astype(np.uint64)
    counts = np.zeros(len(lags), dtype=np.int64)
    for w0 in range(0, nwords, _WORD_BLOCK):
        w1 = min(nwords, w0 + _WORD_BLOCK)
        base = words[w0:w1]
        for j, k in enumerate(lags):
            q, r = divmod(k, 64)
            shifted = words[w0 + q : w1 + q]
            if r:
                nxt = words[w0 + q + 1 : w1 + q + 1]
                shifted = (shifted << np.uint64(r)) | (nxt >> np.uint64(64 - r))
            counts[j] += int(np.bitwise_count(base & shifted).sum(dtype=np.int64))
    return counts


def _small_pairs(bits: np.ndarray, k: int) -> int:
    return int(np.count_nonzero(bits[:-k] & bits[k:])) if bits.size > k else 0


def _exact_correlation(n: int, ones: int, pairs: int, ones_first_k: int, ones_last_k: int, k: int) -> float:
    """Lag-``k`` serial correlation from counts, in exact integer arithmetic.

    With ``S`` ones among ``N`` bits, the centred numerator times ``N**2`` is
    ``N^2 C - N S (S_head + S_tail) + (N - k) S^2`` and the denominator times
    ``N**2`` is ``N S (N - S)``.
    """
    if ones == 0 or ones == n:
        raise DegenerateError("serial correlation is undefined for a constant stream")
    s_head = ones - ones_last_k
    s_tail = ones - ones_first_k
    num = n * n * pairs - n * ones * (s_head + s_tail) + (n - k) * ones * ones
    return num / (n * ones * (n - ones))


@dataclass
class CorrelationAccumulator:
    """Mergeable summary of a bit segment for serial correlations.

    Holds the bit and one counts, the pair counts for each lag and the first
    and last ``max(lags)`` bits, which are all that a neighbouring segment
    needs to count the pairs straddling the boundary.
    """

    lags: tuple[int, ...]
    n: int = 0
    ones: int = 0
    pairs: np.ndarray = field(default=None)
    head: np.ndarray = field(default=None)
    tail: np.ndarray = field(default=None)

    def __post_init__(self):
        self.lags = tuple(int(k) for k in self.lags)
        if not self.lags or min(self.lags) < 1:
            raise DomainError("lags must be positive integers")
        if self.pairs is None:
            self.pairs = np.zeros(len(self.lags), dtype=np.int64)
        if self.head is None:
            self.head = np.zeros(0, dtype=np.uint8)
        if self.tail is None:
            self.tail = np.zeros(0, dtype=np.uint8)

    @property
    def span(self) -> int:
        return max(self.lags)

    @classmethod
    def of(cls, segment: BitStream, lags: Iterable[int]) -> CorrelationAccumulator:
        lags = tuple(lags)
        span = max(lags)
        return cls(
            lags,
            n=segment.length,
            ones=segment.count_ones(),
            pairs=_lag_pair_counts(segment.data, lags) if segment.length else None,
            head=segment.slice(0, span).to_bits(),
            tail=segment.slice(max(0, segment.length - span), segment.length).to_bits(),
        )

    def merge(self, other: CorrelationAccumulator) -> CorrelationAccumulator:
        """Summary of ``self`` followed by ``other``."""
        if self.lags != other.lags:
            raise DomainError("cannot merge accumulators over different lags")
        joint = np.concatenate([self.tail, other.head])
        cross = np.array(
            [
                _small_pairs(joint, k) - _small_pairs(self.tail, k) - _small_pairs(other.head, k)
                for k in self.lags
            ],
            dtype=np.int64,
        )
        span = self.span
        return CorrelationAccumulator(
            self.lags,
            n=self.n + other.n,
            ones=self.ones + other.ones,
            pairs=self.pairs + other.pairs + cross,
            head=np.concatenate([self.head, other.head])[:span],
            tail=np.concatenate([self.tail, other.tail])[-span:],
        )

    def update(self, chunk: BitStream) -> CorrelationAccumulator:
        merged = self.merge(CorrelationAccumulator.of(chunk, self.lags))
        self.n, self.ones, self.pairs = merged.n, merged.ones, merged.pairs
        self.head, self.tail = merged.head, merged.tail
        return self

    def coefficient(self, k: int) -> float:
        if k not in self.lags:
            raise DomainError(f"lag {k} was not accumulated")
        if not 1 <= k < self.n:
            raise DomainError(f"lag must satisfy 1 <= k < N = {self.n}, got {k}")
        j = self.lags.index(k)
        return _exact_correlation(
            self.n,
            self.ones,
            int(self.pairs[j]),
            int(self.head[:k].sum(dtype=np.int64)),
            int(self.tail[-k:].sum(dtype=np.int64)),
            k,
        )


def _accumulate(stream: BitStream, lags: Sequence[int]) -> CorrelationAccumulator:
    acc = CorrelationAccumulator(tuple(lags))
    for chunk in stream.chunks(ANALYSIS_CHUNK_BITS):
        acc.update(chunk)
    return acc


def serial_correlation(stream: BitStream, k: int = 1) -> float:
    """Lag-``k`` serial correlation coefficient of the stream."""
    if int(k) != k or not 1 <= k < stream.length:
        raise DomainError(f"lag must satisfy 1 <= k < N = {stream.length}, got {k}")
    return _accumulate(stream, [int(k)]).coefficient(int(k))


@dataclass(frozen=True)
class Correlogram:
    entries: list[tuple[int, float]]
    n_bits: int

    def lags(self) -> list[int]:
        return [k for k, _ in self.entries]

    def values(self) -> np.ndarray:
        return np.array([a for _, a in self.entries])

    def to_csv(self) -> str:
        rows = ["k,a_k"] + [f"{k},{a:.12g}" for k, a in self.entries]
        return "\n".join(rows) + "\n"


def correlogram(stream: BitStream, k_max: int = DEFAULT_MAX_LAG) -> Correlogram:
    """Serial correlations for lags ``1..k_max`` from a single pass."""
    if int(k_max) != k_max or not 1 <= k_max < stream.length:
        raise DomainError(f"k_max must satisfy 1 <= k_max < N = {stream.length}, got {k_max}")
    lags = list(range(1, int(k_max) + 1))
    acc = _accumulate(stream, lags)
    return Correlogram([(k, acc.coefficient(k)) for k in lags], stream.length)


def _entropy(n: int, ones: int) -> float:
    h = 0.0
    for c in (ones, n - ones):
        if c:
            p = c / n
            h -= p * math.log2(p)
    return h


def shannon_entropy(stream: BitStream) -> float:
    """Entropy of the bit distribution, in bits per bit."""
    if stream.length == 0:
        raise EmptyStreamError("entropy of an empty stream is undefined")
    return _entropy(stream.length, stream.count_ones())


def chi_square_survival(statistic: float) -> float:
    """P(X > statistic) for a chi-square variable with one degree of freedom."""
    if statistic < 0:
        raise DomainError("chi-square statistic must be non-negative")
    return math.erfc(math.sqrt(statistic / 2.0))


def _chi_square(n: int, ones: int) -> tuple[float, float]:
    diff = 2 * ones - n  # obs1 - obs0
    stat = diff * diff / n
    return stat, chi_square_survival(stat)


def chi_square_bits(stream: BitStream) -> tuple[float, float]:
    """Two-bin chi-square statistic against 50/50 and its exceedance probability."""
    if stream.length == 0:
        raise EmptyStreamError("chi-square of an empty stream is undefined")
    return _chi_square(stream.length, stream.count_ones())


class MonteCarloPi(NamedTuple):
    pi_estimate: float
    error_percent: float
    samples_used: int


def _pi_hits(data: np.ndarray) -> int:
    """Points inside the unit quarter circle for whole 6-byte blocks of ``data``."""
    blocks = data.reshape(-1, 6).astype(np.int64)
    x = (blocks[:, 0] << 16) | (blocks[:, 1] << 8) | blocks[:, 2]
    y = (blocks[:, 3] << 16) | (blocks[:, 4] << 8) | blocks[:, 5]
    return int(np.count_nonzero(x * x + y * y < 1 << (2 * _PI_COORD_BITS)))


def _pi_result(inside: int, samples: int) -> MonteCarloPi:
    if samples == 0:
        raise InsufficientDataError(
            f"Monte Carlo pi needs at least {PI_BLOCK_BITS} bits"
        )
    estimate = 4.0 * inside / samples
    return MonteCarloPi(estimate, 100.0 * abs(estimate - math.pi) / math.pi, samples)


def monte_carlo_pi(stream: BitStream) -> MonteCarloPi:
    """Estimate pi from non-overlapping 48-bit blocks.

    The first 24 bits of a block (big-endian) give ``x``, the next 24 give
    ``y``, both scaled to ``[0, 1)``; the point is inside when
    ``x**2 + y**2 < 1``.
    """
    samples = stream.length // PI_BLOCK_BITS
    return _pi_result(_pi_hits(stream.data[: 6 * samples]), samples)


@dataclass(frozen=True)
class EntReport:
    n_bits: int
    entropy_bits_per_bit: float
    compression_percent: float
    chi_square: float
    chi_square_exceed_prob: float
    arithmetic_mean: float
    monte_carlo_pi: float
    pi_error_percent: float
    serial_correlation_lag1: float

    def to_text(self) -> str:
        p = 100.0 * self.chi_square_exceed_prob
        if p < 0.01:
            exceed = "less than 0.01"
        elif p > 99.99:
            exceed = "more than 99.99"
        else:
            exceed = f"{p:.2f}"
        return (
            f"Entropy = {self.entropy_bits_per_bit:.6f} bits per bit.\n\n"
            "Optimum compression would reduce the size\n"
            f"of this {self.n_bits} bit file by {int(self.compression_percent)} percent.\n\n"
            f"Chi square distribution for {self.n_bits} samples is {self.chi_square:.2f}, and randomly\n"
            f"would exceed this value {exceed} percent of the times.\n\n"
            f"Arithmetic mean value of data bits is {self.arithmetic_mean:.4f} (0.5 = random).\n"
            f"Monte Carlo value for Pi is {self.monte_carlo_pi:.9f} (error {self.pi_error_percent:.2f} percent).\n"
            f"Serial correlation coefficient is {self.serial_correlation_lag1:.6f} "
            "(totally uncorrelated = 0.0).\n"
        )

    def to_keyvalue(self) -> str:
        fields = self.__dataclass_fields__
        return "".join(f"{name}={getattr(self, name)!r}\n" for name in fields)


class EntAccumulator:
    """Sequential accumulator behind :func:`ent_report`; feed chunks in order."""

    def __init__(self):
        self._corr = CorrelationAccumulator((1,))
        self._pi_rest = np.zeros(0, dtype=np.uint8)
        self._inside = 0
        self._samples = 0

    def update(self, chunk: BitStream) -> EntAccumulator:
        self._corr.update(chunk)
        if self._pi_rest.size == 0 and chunk.length % PI_BLOCK_BITS == 0:
            data = chunk.data
            self._pi_rest = np.zeros(0, dtype=np.uint8)
        else:
            bits = np.concatenate([self._pi_rest, chunk.to_bits()])
            usable = bits.size - bits.size % PI_BLOCK_BITS
            data = np.packbits(bits[:usable])
            self._pi_rest = bits[usable:]
        self._inside += _pi_hits(data)
        self._samples += data.size // 6
        return self

    def report(self) -> EntReport:
        n, ones = self._corr.n, self._corr.ones
        if n < PI_BLOCK_BITS:
            raise InsufficientDataError(f"an ENT report needs at least {PI_BLOCK_BITS} bits")
        entropy = _entropy(n, ones)
        chi, prob = _chi_square(n, ones)
        pi = _pi_result(self._inside, self._samples)
        return EntReport(
            n_bits=n,
            entropy_bits_per_bit=entropy,
            compression_percent=min(100.0, max(0.0, 100.0 * (1.0 - entropy))),
            chi_square=chi,
            chi_square_exceed_prob=prob,
            arithmetic_mean=ones / n,
            monte_carlo_pi=pi.pi_estimate,
            pi_error_percent=pi.error_percent,
            serial_correlation_lag1=self._corr.coefficient(1),
        )


def ent_report(stream: BitStream) -> EntReport:
    """Entropy, compression, chi-square, mean, Monte Carlo pi and lag-1 correlation."""
    acc = EntAccumulator()
    for chunk in stream.chunks(ANALYSIS_CHUNK_BITS):
        acc.update(chunk)
    return acc.report()
