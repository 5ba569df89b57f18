"""Photon statistics of attenuated weak laser pulses.

A coherent pulse with mean photon number ``lambda`` seen by a detector of
efficiency ``eta`` yields a Poissonian count with mean ``eta * lambda``. A
threshold detector reports "no click" with probability ``exp(-eta*lambda)``,
so ``eta * lambda = ln 2`` gives equal probabilities of 0 and 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, InfeasibleError

PLANCK = 6.62607015e-34  # J s, exact SI value
SPEED_OF_LIGHT = 299_792_458.0  # m/s

DEFAULT_WAVELENGTH_NM = 1550.0
DEFAULT_REP_RATE_HZ = 1.0e6
DEFAULT_PULSE_ARRIVAL_NS = 100.0
DEFAULT_PULSE_WIDTH_NS = 0.3

# below this n the factorial form is exact enough and cheaper
_LOG_SPACE_MIN_N = 21


def wavelength_to_frequency(wavelength_nm: float) -> float:
    if not wavelength_nm > 0:
        raise DomainError(f"wavelength must be positive, got {wavelength_nm}")
    return SPEED_OF_LIGHT / (wavelength_nm * 1e-9)


def dbm_to_watts(p_dbm: float) -> float:
    """Convert optical power from dBm to watts."""
    return 10.0 ** (p_dbm / 10.0) * 1e-3


@dataclass(frozen=True)
class SourceConfig:
    """Pulsed laser source.

    Exactly one of ``avg_power_watts`` and ``mean_photons_override`` must be
    set. The override is the mean photon number per pulse at the attenuator
    input, so with ``T = 1`` it is the mean photon number at the detector.
    """

    avg_power_watts: float | None = None
    center_frequency_hz: float = SPEED_OF_LIGHT / (DEFAULT_WAVELENGTH_NM * 1e-9)
    rep_rate_hz: float = DEFAULT_REP_RATE_HZ
    pulse_arrival_ns: float = DEFAULT_PULSE_ARRIVAL_NS
    pulse_width_ns: float = DEFAULT_PULSE_WIDTH_NS
    mean_photons_override: float | None = None

    def __post_init__(self):
        if (self.avg_power_watts is None) == (self.mean_photons_override is None):
            raise DomainError(
                "exactly one of avg_power_watts and mean_photons_override must be set"
            )
        if self.avg_power_watts is not None and not self.avg_power_watts > 0:
            raise DomainError(f"average power must be > 0 W, got {self.avg_power_watts}")
        if self.mean_photons_override is not None and not (
            self.mean_photons_override >= 0 and math.isfinite(self.mean_photons_override)
        ):
            raise DomainError(
                f"mean photon number must be finite and >= 0, got {self.mean_photons_override}"
            )
        for name in ("center_frequency_hz", "rep_rate_hz", "pulse_width_ns"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be > 0, got {getattr(self, name)}")
        if not self.pulse_arrival_ns >= 0:
            raise DomainError(f"pulse_arrival_ns must be >= 0, got {self.pulse_arrival_ns}")

    @classmethod
    def from_wavelength(cls, wavelength_nm: float = DEFAULT_WAVELENGTH_NM, **kwargs) -> SourceConfig:
        return cls(center_frequency_hz=wavelength_to_frequency(wavelength_nm), **kwargs)

    @property
    def photon_energy_joules(self) -> float:
        return PLANCK * self.center_frequency_hz

    def photons_per_pulse(self) -> float:
        """Mean photon number per pulse before attenuation."""
        if self.mean_photons_override is not None:
            return float(self.mean_photons_override)
        return self.avg_power_watts / (self.photon_energy_joules * self.rep_rate_hz)


@dataclass(frozen=True)
class AttenuatorSetting:
    transmittance: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.transmittance <= 1.0:
            raise DomainError(f"transmittance must lie in (0, 1], got {self.transmittance}")

    @property
    def attenuation_db(self) -> float:
        return -10.0 * math.log10(self.transmittance)


def _check_eta_lambda(eta: float, mean_photons: float) -> None:
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"detection efficiency must lie in [0, 1], got {eta}")
    if not (mean_photons >= 0.0 and math.isfinite(mean_photons)):
        raise DomainError(f"mean photon number must be finite and >= 0, got {mean_photons}")


def photon_number_pmf(n: int, eta: float, mean_photons: float) -> float:
    """Probability of detecting exactly ``n`` photons.

    Poisson with mean ``eta * mean_photons``; evaluated through ``lgamma``
    for large ``n`` so the factorial never overflows.
    """
    if int(n) != n or n < 0:
        raise DomainError(f"photon number must be a non-negative integer, got {n}")
    _check_eta_lambda(eta, mean_photons)
    n = int(n)
    mu = eta * mean_photons
    if mu == 0.0:
        return 1.0 if n == 0 else 0.0
    if n < _LOG_SPACE_MIN_N:
        return mu**n * math.exp(-mu) / math.factorial(n)
    return math.exp(n * math.log(mu) - mu - math.lgamma(n + 1))


def click_probability(eta: float, mean_photons: float) -> float:
    """Probability that a threshold detector registers at least one photon."""
    _check_eta_lambda(eta, mean_photons)
    return 1.0 - math.exp(-eta * mean_photons)


@dataclass(frozen=True)
class PhotonStatistics:
    """Detected photon-number distribution for a given ``eta`` and ``lambda``."""

    eta: float
    mean_photons: float

    def __post_init__(self):
        _check_eta_lambda(self.eta, self.mean_photons)

    @property
    def detected_mean(self) -> float:
        return self.eta * self.mean_photons

    def pmf(self, n: int) -> float:
        return photon_number_pmf(n, self.eta, self.mean_photons)

    def click_probability(self) -> float:
        return click_probability(self.eta, self.mean_photons)

    def bias(self) -> float:
        """P(0) - 1/2 for an ideal (dark-count free) threshold detector."""
        return self.pmf(0) - 0.5


def pulse_mean_photons(source: SourceConfig, att: AttenuatorSetting) -> float:
    """Mean photon number per pulse after the attenuator."""
    return source.photons_per_pulse() * att.transmittance


def detected_mean(source: SourceConfig, att: AttenuatorSetting, eta: float) -> float:
    """Mean detected photons per gate, ``P_avg T eta / (h nu0 f_rep)``."""
    if source.avg_power_watts is None:
        raise DomainError("detected_mean needs a source with avg_power_watts")
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"detection efficiency must lie in [0, 1], got {eta}")
    return (
        source.avg_power_watts
        * att.transmittance
        * eta
        / (source.photon_energy_joules * source.rep_rate_hz)
    )


def target_detected_mean(p_dark: float, target_bias: float = 0.0) -> float:
    """``eta * lambda`` at which ``(1 - p_dark) exp(-eta lambda) = 1/2 + target_bias``."""
    p0 = 0.5 + target_bias
    if not 0.0 <= p_dark < 1.0:
        raise DomainError(f"dark-count probability must lie in [0, 1), got {p_dark}")
    if not 0.0 < p0 < 1.0:
        raise DomainError(f"target bias must lie in (-0.5, 0.5), got {target_bias}")
    if p0 > 1.0 - p_dark:
        raise InfeasibleError(
            f"dark counts alone push P(0) below {p0}; no transmittance balances the detector"
        )
    return math.log((1.0 - p_dark) / p0)


def balance_transmittance(
    source: SourceConfig, eta: float, p_dark: float = 0.0, target_bias: float = 0.0
) -> AttenuatorSetting:
    """Transmittance that zeroes the bias of a memoryless detector.

    Dark clicks are OR-ed with photon clicks, so the no-click probability is
    ``(1 - p_dark) exp(-eta lambda_d)``; solving for 1/2 gives
    ``eta lambda_d = ln(2 (1 - p_dark))``.
    """
    if not 0.0 < eta <= 1.0:
        raise DomainError(f"detection efficiency must lie in (0, 1], got {eta}")
    if not 0.0 <= p_dark < 0.5:
        raise DomainError(f"dark-count probability must lie in [0, 0.5), got {p_dark}")
    needed = target_detected_mean(p_dark, target_bias)
    available = eta * source.photons_per_pulse()
    if available <= 0.0:
        raise InfeasibleError("source delivers no photons")
    t = needed / available
    if not 0.0 < t <= 1.0:
        raise InfeasibleError(
            f"balancing needs transmittance {t:.4g} > 1; the source is too weak"
        )
    return AttenuatorSetting(t)
