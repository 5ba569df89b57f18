"""Gate-by-gate model of a gated avalanche photodiode.

A gate clicks if any of three independent sources fires: a detected photon
(probability ``1 - (1 - eta)^n`` for ``n`` incident photons), a dark count, or
an afterpulse triggered by earlier clicks. A click may be followed by dead
gates during which nothing registers.

Afterpulse memory is kept as the ages of recent clicks, counted in gates *as
seen by the next gate*: a click in the current gate enters the state with age
1, and every gate that passes adds one. A click of age ``a`` contributes an
afterpulse probability ``alpha * exp(-(a - 1) / tau)`` while ``a <= horizon``.
Dark and afterpulse clicks seed memory like photon clicks; the diode cannot
tell avalanches apart.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels
from .errors import DomainError
from .optics import SourceConfig

DEFAULT_ETA = 0.1
DEFAULT_P_DARK = 1e-5
DEFAULT_GATE_WIDTH_NS = 2.5
DEFAULT_GATE_DELAY_NS = 99.0
# Fitted by Monte Carlo so that a balanced stream shows a lag-1 serial
# correlation of about 3.12e-4 (see tests/test_acceptance.py).
DEFAULT_AP_ALPHA = 6.2e-4
DEFAULT_AP_TAU_GATES = 2.0
DEFAULT_AP_HORIZON_GATES = 20


@dataclass(frozen=True)
class DetectorConfig:
    eta: float = DEFAULT_ETA
    p_dark: float = DEFAULT_P_DARK
    gate_delay_ns: float = DEFAULT_GATE_DELAY_NS
    gate_width_ns: float = DEFAULT_GATE_WIDTH_NS
    dead_time_gates: int = 0
    afterpulse_alpha: float = DEFAULT_AP_ALPHA
    afterpulse_tau_gates: float = DEFAULT_AP_TAU_GATES
    afterpulse_horizon_gates: int = DEFAULT_AP_HORIZON_GATES

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise DomainError(f"eta must lie in [0, 1], got {self.eta}")
        if not 0.0 <= self.p_dark < 1.0:
            raise DomainError(f"p_dark must lie in [0, 1), got {self.p_dark}")
        if not 0.0 <= self.afterpulse_alpha < 1.0:
            raise DomainError(f"afterpulse_alpha must lie in [0, 1), got {self.afterpulse_alpha}")
        if not self.afterpulse_tau_gates > 0.0:
            raise DomainError(f"afterpulse_tau_gates must be > 0, got {self.afterpulse_tau_gates}")
        if not self.gate_delay_ns >= 0.0:
            raise DomainError(f"gate_delay_ns must be >= 0, got {self.gate_delay_ns}")
        if not self.gate_width_ns > 0.0:
            raise DomainError(f"gate_width_ns must be > 0, got {self.gate_width_ns}")
        for name in ("dead_time_gates", "afterpulse_horizon_gates"):
            value = getattr(self, name)
            if int(value) != value or value < 0:
                raise DomainError(f"{name} must be a non-negative integer, got {value}")

    @property
    def memoryless(self) -> bool:
        return self.afterpulse_alpha == 0.0 or self.afterpulse_horizon_gates == 0

    def afterpulse_factors(self) -> np.ndarray:
        """Survival factors ``1 - alpha exp(-(a-1)/tau)`` for ages 1..horizon."""
        ages = np.arange(self.afterpulse_horizon_gates, dtype=float)
        return 1.0 - self.afterpulse_alpha * np.exp(-ages / self.afterpulse_tau_gates)


@dataclass(frozen=True)
class DetectorState:
    recent_click_ages: tuple[int, ...] = field(default_factory=tuple)
    dead_countdown: int = 0

    def validate(self, config: DetectorConfig) -> None:
        if any(a < 1 or a > config.afterpulse_horizon_gates for a in self.recent_click_ages):
            raise DomainError("remembered click ages must lie in [1, horizon]")
        if not 0 <= self.dead_countdown <= config.dead_time_gates:
            raise DomainError("dead countdown exceeds the configured dead time")


@dataclass(frozen=True)
class PoissonTable:
    """Inverse-CDF lookup for Poisson variates on ``[offset, offset + len(cdf))``.

    Far tails holding less than ~1e-25 of the mass are left out; for means up
    to 100 the window starts at 0 and the inversion is exact.
    """

    offset: int
    cdf: np.ndarray
    guide: np.ndarray

    def index(self, u: float) -> int:
        return min(int(np.searchsorted(self.cdf, u, side="right")), self.cdf.size - 1)


def _check_mean(mean_photons: float) -> None:
    if not (math.isfinite(mean_photons) and mean_photons >= 0.0):
        raise DomainError(f"Poisson mean must be finite and >= 0, got {mean_photons}")


@lru_cache(maxsize=64)
def poisson_table(mean_photons: float) -> PoissonTable:
    _check_mean(mean_photons)
    if mean_photons == 0.0:
        cdf = np.array([1.0])
        return PoissonTable(0, cdf, np.zeros(1024, dtype=np.int64))
    spread = 12.0 * math.sqrt(mean_photons)
    lo = max(0, int(mean_photons - spread - 30))
    hi = int(math.ceil(mean_photons + spread + 40))
    # log-weights relative to the mode through p(n) / p(n-1) = mean / n, then
    # normalised over the window; lgamma at large n loses absolute accuracy
    n = np.arange(lo, hi + 1, dtype=float)
    step = np.where(n > 0, np.log(mean_photons / np.maximum(n, 1.0)), 0.0)
    logw = np.cumsum(step)
    logw -= logw.max()
    w = np.exp(logw)
    cdf = np.cumsum(w / math.fsum(w))
    k = max(1024, 4 * cdf.size)
    guide = np.minimum(
        np.searchsorted(cdf, np.arange(k) / k, side="right"), cdf.size - 1
    ).astype(np.int64)
    return PoissonTable(lo, cdf, guide)


def sample_photon_count(mean_photons: float, rng: np.random.Generator) -> int:
    """Poisson variate by CDF inversion; consumes one uniform."""
    table = poisson_table(float(mean_photons))
    return table.offset + table.index(rng.random())


def sample_photon_counts(mean_photons: float, rng: np.random.Generator, size: int) -> np.ndarray:
    """Vector form of :func:`sample_photon_count`; same variates for the same uniforms."""
    table = poisson_table(float(mean_photons))
    idx = np.searchsorted(table.cdf, rng.random(size), side="right")
    return table.offset + np.minimum(idx, table.cdf.size - 1)


def afterpulse_probability(state: DetectorState, config: DetectorConfig) -> float:
    """Combined afterpulse probability of all remembered clicks."""
    survive = 1.0
    for age in state.recent_click_ages:
        if 1 <= age <= config.afterpulse_horizon_gates:
            survive *= 1.0 - config.afterpulse_alpha * math.exp(
                -(age - 1) / config.afterpulse_tau_gates
            )
    return 1.0 - survive


def gate_decision(
    n_photons: int, state: DetectorState, config: DetectorConfig, rng: np.random.Generator
) -> tuple[int, DetectorState]:
    """Decide one gate. Always consumes exactly one uniform from ``rng``.

    Photon, dark and afterpulse clicks are independent, so the gate stays
    silent with probability ``(1-eta)^n (1-p_dark) (1-p_ap)``.
    """
    u = rng.random()
    if state.dead_countdown > 0:
        click, dead = 0, state.dead_countdown - 1
    else:
        q = (1.0 - config.p_dark) * (1.0 - config.eta) ** n_photons
        q *= 1.0 - afterpulse_probability(state, config)
        click = int(u >= q)
        dead = config.dead_time_gates if click else 0
    horizon = config.afterpulse_horizon_gates
    aged = tuple(a + 1 for a in state.recent_click_ages if a + 1 <= horizon)
    if click and horizon >= 1:
        aged = (1,) + aged
    return click, DetectorState(aged, dead)


def gate_overlap_fraction(source: SourceConfig, config: DetectorConfig) -> float:
    """Fraction of a top-hat pulse that falls inside the detection gate."""
    pulse_end = source.pulse_arrival_ns + source.pulse_width_ns
    gate_end = config.gate_delay_ns + config.gate_width_ns
    if config.gate_delay_ns <= source.pulse_arrival_ns and pulse_end <= gate_end:
        return 1.0
    start = max(source.pulse_arrival_ns, config.gate_delay_ns)
    stop = min(
        source.pulse_arrival_ns + source.pulse_width_ns,
        config.gate_delay_ns + config.gate_width_ns,
    )
    return min(1.0, max(0.0, stop - start) / source.pulse_width_ns)


class GateEngine:
    """Compiled gate loop carrying detector state between calls.

    Feeding the same uniforms in any split yields the same bits.
    """

    def __init__(self, config: DetectorConfig, mean_photons: float, state: DetectorState | None = None):
        self.config = config
        self.mean_photons = float(mean_photons)
        table = poisson_table(self.mean_photons)
        self._cdf = table.cdf
        self._guide = table.guide
        n = np.arange(table.offset, table.offset + table.cdf.size, dtype=float)
        self._noclick = (1.0 - config.p_dark) * (1.0 - config.eta) ** n
        horizon = 0 if config.memoryless else config.afterpulse_horizon_gates
        self._horizon = horizon
        self._factors = config.afterpulse_factors()[:horizon].copy()
        self._masked = horizon <= _kernels.MASK_HORIZON_MAX
        if self._masked:
            self._byte_tab, self._nbytes = _kernels.byte_product_table(self._factors)
            self._hmask = (1 << horizon) - 1
            self._mask = 0
        else:
            self._ring = np.zeros(horizon, dtype=np.uint8)
            self._pos = 0
        self._dead = 0
        if state is not None:
            self.state = state

    @property
    def state(self) -> DetectorState:
        if self._masked:
            ages = tuple(a for a in range(1, self._horizon + 1) if self._mask >> (a - 1) & 1)
        else:
            h = self._horizon
            ages = tuple(a for a in range(1, h + 1) if self._ring[(self._pos - a) % h])
        return DetectorState(ages, self._dead)

    @state.setter
    def state(self, state: DetectorState) -> None:
        state.validate(self.config)
        ages = [a for a in state.recent_click_ages if a <= self._horizon]
        if self._masked:
            self._mask = sum(1 << (a - 1) for a in set(ages))
        else:
            self._ring[:] = 0
            for a in ages:
                self._ring[(self._pos - a) % self._horizon] = 1
        self._dead = int(state.dead_countdown)

    def run(self, uniforms: np.ndarray) -> np.ndarray:
        """Simulate ``len(uniforms) // 2`` gates; returns 0/1 ``uint8`` clicks."""
        u = np.ascontiguousarray(uniforms, dtype=np.float64)
        if u.size % 2:
            raise ValueError("each gate consumes two uniforms")
        out = np.empty(u.size // 2, dtype=np.uint8)
        dead_gates = int(self.config.dead_time_gates)
        if self._masked:
            mask, dead = _kernels.gates_masked(
                u, self._cdf, self._guide, self._noclick, self._byte_tab,
                self._nbytes, self._hmask, self._mask, self._dead, dead_gates, out,
            )
            self._mask = int(mask)
        else:
            pos, dead = _kernels.gates_ring(
                u, self._cdf, self._guide, self._noclick, self._factors,
                self._ring, self._pos, self._dead, dead_gates, out,
            )
            self._pos = int(pos)
        self._dead = int(dead)
        return out
