import argparse

import pytest

from photonqrng.bitstream import BitStream
from photonqrng.cli import DEFAULTS, build_parser, export_raw, import_raw, main, resolve_settings
from photonqrng.errors import DomainError

SIM = ["--bits", "20000", "--eta", "0.1", "--lambda", "6.93", "--seed", "42"]


def run(*argv):
    return main([str(a) for a in argv])


def _sample_value(action, variant):
    """Two distinct valid values for a flag, neither equal to its default."""
    if action.const is True:
        return "true"
    if action.choices:
        options = [c for c in action.choices if c != DEFAULTS.get(action.dest)]
        return options[variant % len(options)]
    if action.type is int:
        return str(3 + variant)
    if action.type is float:
        return str(0.25 + 0.125 * variant)
    return f"path{variant}.bin"


def _flag_cases():
    _, commands = build_parser()
    cases = []
    for name, p in commands.items():
        for action in p._actions:
            flags = [o for o in action.option_strings if o.startswith("--")]
            if not flags or flags[0] in ("--help", "--config"):
                continue
            cases.append(pytest.param(name, flags[0], id=f"{name}{flags[0]}"))
    return cases


def _positional(command):
    return ["in.bin"] if command in ("extract", "analyze") else []


def _required(command, flag):
    return ["--out", "o.bin"] if command == "export" and flag != "--out" else []


class TestConfigPrecedence:
    @pytest.mark.parametrize("command, flag", _flag_cases())
    def test_flag_beats_file_beats_default(self, tmp_path, command, flag):
        _, commands = build_parser()
        action = commands[command]._option_string_actions[flag]
        key = flag[2:]
        cfg = tmp_path / "run.cfg"
        cfg.write_text(f"# experiment\n{key} = {_sample_value(action, 0)}\n")
        base = [command, *_positional(command), *_required(command, flag)]

        from_default = resolve_settings(base)
        from_file = resolve_settings(base + ["--config", str(cfg)])
        want_file = resolve_settings(base + [flag] if action.const is True else base + [flag, _sample_value(action, 0)])
        assert from_file[action.dest] == want_file[action.dest]
        if action.dest in DEFAULTS:
            assert from_default[action.dest] == DEFAULTS[action.dest]
        if action.const is not True:
            flagged = resolve_settings(base + ["--config", str(cfg), flag, _sample_value(action, 1)])
            want_flag = resolve_settings(base + [flag, _sample_value(action, 1)])
            assert flagged[action.dest] == want_flag[action.dest] != from_file[action.dest]

    def test_unknown_key(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("warp = 9\n")
        assert run("simulate", "--config", cfg, "--out", tmp_path / "x") == 1

    def test_bad_value(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("eta = fast\n")
        assert run("simulate", "--config", cfg) == 1

    def test_flag_source_overrides_file_source(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("power-dbm = -35\n")
        s = resolve_settings(["simulate", "--config", str(cfg), "--lambda", "3"])
        assert s["lambda_"] == 3.0 and "power_dbm" not in s

    def test_both_sources_rejected(self):
        assert run("simulate", "--lambda", "3", "--power-dbm", "-35") == 1


class TestExport:
    def test_msb_first(self, tmp_path):
        export_raw(BitStream.from_string("10000000"), tmp_path / "a")
        assert (tmp_path / "a").read_bytes() == b"\x80"

    def test_zeros(self, tmp_path):
        export_raw(BitStream.from_string("0" * 16), tmp_path / "a")
        assert (tmp_path / "a").read_bytes() == b"\x00\x00"

    def test_round_trip(self, tmp_path):
        s = BitStream.from_string("1011001110001111" * 5)
        export_raw(s, tmp_path / "a")
        assert import_raw(tmp_path / "a") == s

    def test_ragged_length(self, tmp_path):
        with pytest.raises(DomainError):
            export_raw(BitStream.from_string("101"), tmp_path / "a")
        export_raw(BitStream.from_string("1000000011"), tmp_path / "a", truncate=True)
        assert (tmp_path / "a").read_bytes() == b"\x80"

    def test_export_command_truncates(self, tmp_path):
        out = tmp_path / "e.bin"
        assert run("export", "--bits", 1003, "--seed", 1, "--out", out) == 0
        assert len(out.read_bytes()) == 125


class TestCommands:
    def test_simulate_twice_identical(self, tmp_path):
        a, b = tmp_path / "a.bin", tmp_path / "b.bin"
        assert run("simulate", *SIM, "--out", a) == 0
        assert run("simulate", *SIM, "--out", b) == 0
        assert a.read_bytes() == b.read_bytes()
        assert len(a.read_bytes()) == 2500
        assert run("simulate", *SIM[:-1], "43", "--out", b) == 0
        assert a.read_bytes() != b.read_bytes()

    def test_analyze_report(self, tmp_path, capsys):
        raw = tmp_path / "s.bin"
        assert run("simulate", *SIM, "--out", raw) == 0
        assert run("analyze", raw, "--format", "report") == 0
        text = capsys.readouterr().out
        assert text.startswith("Entropy = ")
        assert "Chi square distribution for 20000 samples" in text
        assert "Serial correlation coefficient is" in text

    def test_analyze_csv(self, tmp_path):
        raw, csv = tmp_path / "s.bin", tmp_path / "c.csv"
        run("simulate", *SIM, "--out", raw)
        assert run("analyze", raw, "--format", "csv", "--kmax", 5, "--out", csv) == 0
        lines = csv.read_text().splitlines()
        assert lines[0] == "k,a_k" and len(lines) == 6

    def test_simulate_postprocess_matches_extract(self, tmp_path):
        raw, direct, later = tmp_path / "r", tmp_path / "d", tmp_path / "l"
        run("simulate", *SIM, "--out", raw)
        assert run("simulate", *SIM, "--decimate", 7, "--debias", "peres", "--truncate", "--out", direct) == 0
        assert run("extract", raw, "--decimate", 7, "--debias", "peres", "--truncate", "--out", later) == 0
        assert direct.read_bytes() == later.read_bytes()

    def test_negative_lambda(self, capsys):
        assert run("simulate", "--lambda", -1, "--bits", 8) == 1
        err = capsys.readouterr().err
        assert err.startswith("error:") and len(err.strip().splitlines()) == 1

    def test_unknown_flag(self):
        assert run("simulate", "--warp", 9) == 1

    def test_missing_input(self, tmp_path):
        assert run("analyze", tmp_path / "nope.bin") == 2

    def test_unwritable_output(self, tmp_path):
        assert run("simulate", *SIM, "--out", tmp_path / "no" / "dir" / "x.bin") == 2

    def test_ragged_raw_output(self, tmp_path):
        assert run("simulate", "--bits", 9, "--out", tmp_path / "x") == 1
        assert run("simulate", "--bits", 9, "--truncate", "--out", tmp_path / "x") == 0

    def test_calibrate(self, tmp_path):
        out = tmp_path / "cal.txt"
        assert run("calibrate", "--power-dbm", -35, "--transmittance", 1e-5, "--seed", 3, "--out", out) == 0
        kv = dict(line.split("=", 1) for line in out.read_text().splitlines())
        assert kv["converged"] == "True"
        assert abs(float(kv["achieved_bias"])) <= 1e-3

    def test_scan_delay_thread_invariant(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["scan-delay", "--power-dbm", -35, "--delay-min", 97, "--delay-max", 101, "--step", 0.5,
                "--gates-per-point", 5000, "--seed", 9]
        assert run(*args, "--threads", 1, "--out", a) == 0
        assert run(*args, "--threads", 4, "--out", b) == 0
        assert a.read_bytes() == b.read_bytes()
        lines = a.read_text().splitlines()
        assert lines[0] == "delay_ns,clicks"
        best = float(lines[-1].split("=")[1])
        assert 97.8 <= best <= 100.0

    def test_entropy_seed_reported(self, tmp_path, capsys):
        out = tmp_path / "x"
        assert run("simulate", "--bits", 800, "--entropy-seed", "--out", out) == 0
        seed = int(capsys.readouterr().err.strip().split("=")[1])
        again = tmp_path / "y"
        assert run("simulate", "--bits", 800, "--seed", seed, "--out", again) == 0
        assert out.read_bytes() == again.read_bytes()

    def test_module_entry_point(self):
        import subprocess
        import sys

        r = subprocess.run([sys.executable, "-m", "photonqrng", "--help"], capture_output=True, text=True)
        assert r.returncode == 0 and "simulate" in r.stdout


def test_export_requires_out(tmp_path):
    assert run("export", "--bits", 16) == 1
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"out = {tmp_path / 'f.bin'}\nbits = 16\n")
    assert run("export", "--config", cfg) == 0
    assert len((tmp_path / "f.bin").read_bytes()) == 2
