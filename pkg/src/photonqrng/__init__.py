"""Simulator and analysis toolkit for a weak-pulse photon-number QRNG.

A gated single-photon detector watches attenuated laser pulses and reports
1 when it clicks and 0 otherwise. Tuning the mean detected photon number to
ln 2 balances the two outcomes.
"""
from .acquisition import (
    CalibrationResult,
    RunConfig,
    ScanResult,
    calibrate,
    make_rng,
    run_replicas,
    run_stream,
    scan_delay,
)
from .bitstream import BitStream
from .detector import DetectorConfig, DetectorState
from .errors import (
    DegenerateError,
    DomainError,
    EmptyStreamError,
    InfeasibleError,
    InsufficientDataError,
    QrngError,
)
from .extraction import decimate, measure_bias, peres, von_neumann
from .optics import (
    AttenuatorSetting,
    PhotonStatistics,
    SourceConfig,
    balance_transmittance,
    click_probability,
    dbm_to_watts,
    detected_mean,
    photon_number_pmf,
)
from .stats import (
    correlogram,
    chi_square_bits,
    ent_report,
    monte_carlo_pi,
    serial_correlation,
    shannon_entropy,
)

__version__ = "0.1.0"
