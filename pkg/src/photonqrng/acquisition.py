"""Clock-to-clock run engine and the two set-up procedures.

One logical stream is one sequential detector-state thread fed by one seeded
generator. Replicas, scan points and calibration windows get their own
generators, derived from the run seed with :class:`numpy.random.SeedSequence`
spawn keys, so they can run concurrently without changing any result.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterator, NamedTuple

import numpy as np

from .bitstream import BitStream
from .detector import DetectorConfig, GateEngine, gate_overlap_fraction
from .errors import DomainError
from .optics import (
    AttenuatorSetting,
    SourceConfig,
    balance_transmittance,
    pulse_mean_photons,
    target_detected_mean,
)

# Gates simulated per kernel call; a multiple of 8 so chunks pack cleanly.
CHUNK_GATES = 1 << 22

# spawn-key namespaces for derived generators
_REPLICA, _SCAN, _CALIBRATION = 1, 2, 3

_SEED_MASK = (1 << 64) - 1


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for ``seed``; ``key`` selects an independent derived stream."""
    seq = np.random.SeedSequence(int(seed) & _SEED_MASK, spawn_key=tuple(key))
    return np.random.Generator(np.random.PCG64(seq))


@dataclass(frozen=True)
class RunConfig:
    source: SourceConfig
    attenuator: AttenuatorSetting
    detector: DetectorConfig
    n_gates: int
    seed: int = 0

    def __post_init__(self):
        if int(self.n_gates) != self.n_gates or self.n_gates < 1:
            raise DomainError(f"n_gates must be a positive integer, got {self.n_gates}")
        if int(self.seed) != self.seed:
            raise DomainError(f"seed must be an integer, got {self.seed}")

    def effective_mean_photons(self) -> float:
        """Mean photons per gate: pulse mean after attenuation times gate overlap."""
        return pulse_mean_photons(self.source, self.attenuator) * gate_overlap_fraction(
            self.source, self.detector
        )

    def with_transmittance(self, transmittance: float) -> RunConfig:
        return replace(self, attenuator=AttenuatorSetting(transmittance))


class CalibrationResult(NamedTuple):
    transmittance: float
    achieved_bias: float
    iterations: int
    converged: bool


class ScanResult(NamedTuple):
    best_delay_ns: float
    counts: list[tuple[float, int]]


def iter_gate_chunks(
    config: RunConfig, rng: np.random.Generator | None = None, chunk_gates: int = CHUNK_GATES
) -> Iterator[np.ndarray]:
    """Yield the click record of ``config`` as consecutive ``uint8`` chunks."""
    if rng is None:
        rng = make_rng(config.seed)
    engine = GateEngine(config.detector, config.effective_mean_photons())
    remaining = int(config.n_gates)
    while remaining:
        n = min(chunk_gates, remaining)
        yield engine.run(rng.random(2 * n))
        remaining -= n


def _run(config: RunConfig, rng: np.random.Generator | None = None) -> BitStream:
    parts = [np.packbits(chunk) for chunk in iter_gate_chunks(config, rng)]
    return BitStream(np.concatenate(parts), config.n_gates)


def run_stream(config: RunConfig) -> BitStream:
    """Simulate ``config.n_gates`` gates; click -> 1, no click -> 0."""
    return _run(config)


def _count_clicks(config: RunConfig, rng: np.random.Generator) -> int:
    return int(sum(int(np.count_nonzero(c)) for c in iter_gate_chunks(config, rng)))


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def run_replicas(config: RunConfig, replicas: int, threads: int = 1) -> list[BitStream]:
    """Independent streams with seeds derived from ``config.seed`` and the replica index."""
    return _map(
        lambda i: _run(config, make_rng(config.seed, _REPLICA, i)), range(replicas), threads
    )


def scan_delay(
    config: RunConfig,
    delay_min_ns: float,
    delay_max_ns: float,
    step_ns: float,
    gates_per_point: int,
    threads: int = 1,
) -> ScanResult:
    """Sweep the gate delay and return the delay with the most clicks.

    Ties go to the smallest delay.
    """
    if not delay_min_ns < delay_max_ns:
        raise DomainError("delay_min_ns must be smaller than delay_max_ns")
    if not step_ns > 0:
        raise DomainError("step_ns must be positive")
    if gates_per_point < 1:
        raise DomainError("gates_per_point must be positive")
    n_points = int(math.floor((delay_max_ns - delay_min_ns) / step_ns + 1e-9)) + 1
    delays = [delay_min_ns + i * step_ns for i in range(n_points)]

    def point(i):
        det = replace(config.detector, gate_delay_ns=delays[i])
        cfg = replace(config, detector=det, n_gates=gates_per_point)
        return _count_clicks(cfg, make_rng(config.seed, _SCAN, i))

    counts = _map(point, range(n_points), threads)
    best = max(range(n_points), key=lambda i: (counts[i], -i))
    return ScanResult(delays[best], list(zip(delays, counts)))


def calibrate(
    config: RunConfig,
    target_bias: float = 0.0,
    tolerance: float = 1e-3,
    window_gates: int = 10**6,
    max_iters: int = 10,
) -> CalibrationResult:
    """Steer the attenuator until the measured bias is within ``tolerance``.

    Each iteration measures the no-click frequency ``f0`` over a fresh window.
    If the bias is off, the detected mean is estimated by inverting the
    memoryless model, ``eta lambda = -ln(f0 / (1 - p_dark))``, and the
    transmittance is rescaled so the estimate lands on the target. Effects the
    inversion ignores (afterpulses, dead time) are absorbed by iterating.
    """
    if not tolerance > 0:
        raise DomainError("tolerance must be positive")
    if not -0.5 < target_bias < 0.5:
        raise DomainError("target_bias must lie in (-0.5, 0.5)")
    if window_gates < 1 or max_iters < 1:
        raise DomainError("window_gates and max_iters must be positive")
    det = config.detector
    # raises InfeasibleError when even T = 1 cannot reach the target
    balance_transmittance(config.source, det.eta, det.p_dark, target_bias)
    target = target_detected_mean(det.p_dark, target_bias)

    t = config.attenuator.transmittance
    for it in range(1, max_iters + 1):
        window = replace(config, attenuator=AttenuatorSetting(t), n_gates=window_gates)
        clicks = _count_clicks(window, make_rng(config.seed, _CALIBRATION, it))
        f0 = 1.0 - clicks / window_gates
        bias = f0 - 0.5 - target_bias
        if abs(bias) <= tolerance:
            return CalibrationResult(t, bias, it, True)
        # keep the log finite when a window is all clicks or all silence
        floor = 0.5 / window_gates
        f0 = min(max(f0, floor), (1.0 - det.p_dark) * (1.0 - floor))
        estimate = -math.log(f0 / (1.0 - det.p_dark))
        if it == max_iters:
            return CalibrationResult(t, bias, it, False)
        t = min(1.0, t * target / estimate)
