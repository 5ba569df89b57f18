"""Command-line interface.

Settings resolve as: command-line flags, then values from ``--config FILE``,
then built-in defaults. A config file holds ``key = value`` lines whose keys
are the long flag names without the leading dashes; ``#`` starts a comment.

Exit codes: 0 on success, 1 on domain or configuration errors, 2 on I/O errors.
"""
from __future__ import annotations

import argparse
import secrets
import sys
from pathlib import Path

from . import extraction
from .acquisition import RunConfig, calibrate, run_stream, scan_delay
from .bitstream import BitStream
from .detector import (
    DEFAULT_AP_ALPHA,
    DEFAULT_AP_HORIZON_GATES,
    DEFAULT_AP_TAU_GATES,
    DEFAULT_ETA,
    DEFAULT_GATE_DELAY_NS,
    DEFAULT_GATE_WIDTH_NS,
    DEFAULT_P_DARK,
    DetectorConfig,
)
from .errors import DomainError, QrngError
from .optics import (
    DEFAULT_PULSE_ARRIVAL_NS,
    DEFAULT_PULSE_WIDTH_NS,
    DEFAULT_REP_RATE_HZ,
    DEFAULT_WAVELENGTH_NM,
    AttenuatorSetting,
    SourceConfig,
    balance_transmittance,
    dbm_to_watts,
)
from .stats import DEFAULT_MAX_LAG, correlogram, ent_report

DEFAULT_SEED = 0
# mean photons per pulse at the detector in the nominal set-up (eta = 0.1)
DEFAULT_LAMBDA = 6.93

DEFAULTS = {
    "bits": 1_000_000,
    "eta": DEFAULT_ETA,
    "wavelength_nm": DEFAULT_WAVELENGTH_NM,
    "rep_rate_hz": DEFAULT_REP_RATE_HZ,
    "dark": DEFAULT_P_DARK,
    "ap_alpha": DEFAULT_AP_ALPHA,
    "ap_tau": DEFAULT_AP_TAU_GATES,
    "ap_horizon": DEFAULT_AP_HORIZON_GATES,
    "dead_gates": 0,
    "gate_delay_ns": DEFAULT_GATE_DELAY_NS,
    "gate_width_ns": DEFAULT_GATE_WIDTH_NS,
    "pulse_arrival_ns": DEFAULT_PULSE_ARRIVAL_NS,
    "pulse_width_ns": DEFAULT_PULSE_WIDTH_NS,
    "decimate": 1,
    "debias": "none",
    "peres_depth": extraction.DEFAULT_PERES_DEPTH,
    "seed": DEFAULT_SEED,
    "entropy_seed": False,
    "format": None,
    "out": None,
    "truncate": False,
    "kmax": DEFAULT_MAX_LAG,
    "tolerance": 1e-3,
    "window": 1_000_000,
    "max_iters": 10,
    "target_bias": 0.0,
    "delay_min": 95.0,
    "delay_max": 105.0,
    "step": 0.5,
    "gates_per_point": 100_000,
    "threads": 1,
}


class UsageError(QrngError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _bool(text: str) -> bool:
    value = str(text).strip().lower()
    if value in {"1", "true", "yes", "on"}:
        return True
    if value in {"0", "false", "no", "off"}:
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _add(group, flag, **kwargs):
    group.add_argument(flag, default=argparse.SUPPRESS, **kwargs)


def _simulation_flags(p):
    g = p.add_argument_group("simulation")
    _add(g, "--bits", type=int, help="number of gates (raw bits) to simulate")
    _add(g, "--eta", type=float, help="detection efficiency")
    _add(g, "--lambda", dest="lambda_", type=float, help="mean photons per pulse at the detector")
    _add(g, "--power-dbm", type=float, help="average laser power in dBm (instead of --lambda)")
    _add(g, "--wavelength-nm", type=float)
    _add(g, "--rep-rate-hz", type=float)
    _add(g, "--transmittance", type=float, help="attenuator transmittance; power path defaults to the balance point")
    _add(g, "--dark", type=float, help="dark-count probability per gate")
    _add(g, "--ap-alpha", type=float, help="afterpulse amplitude")
    _add(g, "--ap-tau", type=float, help="afterpulse decay constant in gates")
    _add(g, "--ap-horizon", type=int, help="afterpulse memory length in gates")
    _add(g, "--dead-gates", type=int)
    _add(g, "--gate-delay-ns", type=float)
    _add(g, "--gate-width-ns", type=float)
    _add(g, "--pulse-arrival-ns", type=float)
    _add(g, "--pulse-width-ns", type=float)
    _add(g, "--seed", type=int)
    _add(g, "--entropy-seed", action="store_const", const=True, help="draw a fresh seed from the OS and report it")


def _postprocess_flags(p):
    g = p.add_argument_group("post-processing")
    _add(g, "--decimate", type=int, help="keep every N-th bit (7 skips the afterpulse lags)")
    _add(g, "--debias", choices=["none", "vn", "peres"])
    _add(g, "--peres-depth", type=int)


def _output_flags(p, formats):
    g = p.add_argument_group("output")
    _add(g, "--out", help="output path (default: stdout)")
    _add(g, "--format", choices=formats)
    _add(g, "--truncate", action="store_const", const=True, help="drop trailing bits so raw output fills whole bytes")
    _add(g, "--kmax", type=int, help="largest lag for csv correlograms")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(prog="photonqrng", description="Weak-pulse photon-number QRNG simulator and analyser.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    commands = {}

    def command(name, help):
        p = sub.add_parser(name, help=help)
        _add(p, "--config", help="key = value settings file")
        commands[name] = p
        return p

    p = command("simulate", "simulate a raw bit stream")
    _simulation_flags(p)
    _postprocess_flags(p)
    _output_flags(p, ["raw", "csv", "report", "kv"])

    p = command("calibrate", "steer the attenuator to zero bias")
    _simulation_flags(p)
    _add(p, "--tolerance", type=float)
    _add(p, "--window", type=int, help="gates per calibration window")
    _add(p, "--max-iters", type=int)
    _add(p, "--target-bias", type=float)
    _add(p, "--out")

    p = command("scan-delay", "sweep the gate delay for the maximum count rate")
    _simulation_flags(p)
    _add(p, "--delay-min", type=float)
    _add(p, "--delay-max", type=float)
    _add(p, "--step", type=float)
    _add(p, "--gates-per-point", type=int)
    _add(p, "--threads", type=int)
    _add(p, "--out")

    p = command("extract", "decimate and/or debias a raw bit file")
    p.add_argument("input")
    _postprocess_flags(p)
    _output_flags(p, ["raw", "csv", "report", "kv"])

    p = command("analyze", "ENT-style report or correlogram of a raw bit file")
    p.add_argument("input")
    _output_flags(p, ["report", "csv", "kv"])

    p = command("export", "simulate and write a headerless raw file for external test batteries")
    _simulation_flags(p)
    _postprocess_flags(p)
    _add(p, "--out", help="output path (required, from a flag or the config file)")
    return parser, commands


def read_config(path: str | Path, parser: argparse.ArgumentParser) -> dict:
    """Parse a ``key = value`` file, converting values like the matching flags."""
    actions = {
        opt[2:]: action
        for opt, action in parser._option_string_actions.items()
        if opt.startswith("--") and opt not in ("--help", "--config")
    }
    settings = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip().lstrip("-"), value.strip()
        if not sep or key not in actions:
            raise UsageError(f"{path}:{lineno}: unknown setting {key!r}")
        action = actions[key]
        try:
            if action.const is True:
                converted = _bool(value)
            else:
                converted = action.type(value) if action.type else value
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
        if action.choices and converted not in action.choices:
            raise UsageError(f"{path}:{lineno}: {key} must be one of {sorted(action.choices)}")
        settings[action.dest] = converted
    return settings


def resolve_settings(argv, parser=None, commands=None) -> dict:
    """Merge defaults, config file and command-line flags (flags win)."""
    if parser is None:
        parser, commands = build_parser()
    args = vars(parser.parse_args(argv))
    command = args["command"]
    from_file = read_config(args["config"], commands[command]) if "config" in args else {}
    # --lambda and --power-dbm choose the source; a flag overrides the file's choice
    modes = ("lambda_", "power_dbm")
    if any(m in args for m in modes):
        from_file = {k: v for k, v in from_file.items() if k not in modes}
    settings = {**DEFAULTS, **from_file, **args}
    if all(m in settings for m in modes):
        raise UsageError("--lambda and --power-dbm are mutually exclusive")
    return settings


def _seed(settings) -> int:
    if settings["entropy_seed"]:
        seed = secrets.randbits(63)
        print(f"seed={seed}", file=sys.stderr)
        return seed
    return settings["seed"]


def build_run_config(settings, n_gates: int | None = None) -> RunConfig:
    detector = DetectorConfig(
        eta=settings["eta"],
        p_dark=settings["dark"],
        gate_delay_ns=settings["gate_delay_ns"],
        gate_width_ns=settings["gate_width_ns"],
        dead_time_gates=settings["dead_gates"],
        afterpulse_alpha=settings["ap_alpha"],
        afterpulse_tau_gates=settings["ap_tau"],
        afterpulse_horizon_gates=settings["ap_horizon"],
    )
    timing = dict(
        rep_rate_hz=settings["rep_rate_hz"],
        pulse_arrival_ns=settings["pulse_arrival_ns"],
        pulse_width_ns=settings["pulse_width_ns"],
    )
    if "power_dbm" in settings:
        source = SourceConfig.from_wavelength(
            settings["wavelength_nm"], avg_power_watts=dbm_to_watts(settings["power_dbm"]), **timing
        )
        if "transmittance" in settings:
            attenuator = AttenuatorSetting(settings["transmittance"])
        else:
            attenuator = balance_transmittance(source, detector.eta, detector.p_dark)
    else:
        source = SourceConfig.from_wavelength(
            settings["wavelength_nm"],
            mean_photons_override=settings.get("lambda_", DEFAULT_LAMBDA),
            **timing,
        )
        attenuator = AttenuatorSetting(settings.get("transmittance", 1.0))
    return RunConfig(source, attenuator, detector, n_gates or settings["bits"], _seed(settings))


def postprocess(stream: BitStream, settings) -> BitStream:
    if settings["decimate"] != 1:
        stream = extraction.decimate(stream, settings["decimate"])
    if settings["debias"] == "vn":
        stream = extraction.von_neumann(stream)
    elif settings["debias"] == "peres":
        stream = extraction.peres(stream, settings["peres_depth"])
    return stream


def export_raw(stream: BitStream, path, truncate: bool = False) -> None:
    """Write bits as a headerless file, 8 per byte, first bit in the MSB."""
    if stream.length % 8:
        if not truncate:
            raise DomainError(
                f"{stream.length} bits do not fill whole bytes; truncate to export"
            )
        stream = stream.slice(0, stream.length - stream.length % 8)
    _write(path, stream.tobytes())


def import_raw(path) -> BitStream:
    """Read a headerless raw file; every byte contributes 8 bits."""
    return BitStream.from_bytes(Path(path).read_bytes())


def _write(path, payload: bytes | str) -> None:
    if isinstance(payload, str):
        payload = payload.encode()
    if path is None or path == "-":
        sys.stdout.buffer.write(payload)
        sys.stdout.flush()
    else:
        Path(path).write_bytes(payload)


def _emit_stream(stream: BitStream, settings, default_format: str) -> None:
    fmt = settings["format"] or default_format
    if fmt == "raw":
        export_raw(stream, settings["out"], settings["truncate"])
    elif fmt == "csv":
        _write(settings["out"], correlogram(stream, settings["kmax"]).to_csv())
    elif fmt == "report":
        _write(settings["out"], ent_report(stream).to_text())
    else:
        _write(settings["out"], ent_report(stream).to_keyvalue())


def _cmd_simulate(settings):
    stream = postprocess(run_stream(build_run_config(settings)), settings)
    _emit_stream(stream, settings, "raw")


def _cmd_export(settings):
    if settings["out"] in (None, "-"):
        raise UsageError("export needs an output file (--out)")
    stream = postprocess(run_stream(build_run_config(settings)), settings)
    export_raw(stream, settings["out"], truncate=True)


def _cmd_extract(settings):
    stream = postprocess(import_raw(settings["input"]), settings)
    _emit_stream(stream, settings, "raw")


def _cmd_analyze(settings):
    _emit_stream(import_raw(settings["input"]), settings, "report")


def _cmd_calibrate(settings):
    config = build_run_config(settings, n_gates=settings["window"])
    result = calibrate(
        config,
        target_bias=settings["target_bias"],
        tolerance=settings["tolerance"],
        window_gates=settings["window"],
        max_iters=settings["max_iters"],
    )
    lines = [f"{name}={getattr(result, name)!r}" for name in result._fields]
    _write(settings["out"], "\n".join(lines) + "\n")


def _cmd_scan_delay(settings):
    config = build_run_config(settings, n_gates=settings["gates_per_point"])
    result = scan_delay(
        config,
        settings["delay_min"],
        settings["delay_max"],
        settings["step"],
        settings["gates_per_point"],
        threads=settings["threads"],
    )
    rows = ["delay_ns,clicks"] + [f"{d:.6g},{c}" for d, c in result.counts]
    rows.append(f"# best_delay_ns={result.best_delay_ns:.6g}")
    _write(settings["out"], "\n".join(rows) + "\n")


_COMMANDS = {
    "simulate": _cmd_simulate,
    "calibrate": _cmd_calibrate,
    "scan-delay": _cmd_scan_delay,
    "extract": _cmd_extract,
    "analyze": _cmd_analyze,
    "export": _cmd_export,
}


def main(argv=None) -> int:
    try:
        settings = resolve_settings(argv)
        _COMMANDS[settings["command"]](settings)
    except QrngError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
