"""Command-line interface: parsing, exit codes and output files."""

import json

import numpy as np
import pytest

from ftme.cli import (
    EXIT_CHECK_FAILED,
    EXIT_CONFIG,
    EXIT_OK,
    ConfigError,
    _parse_grid,
    main,
)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_grid():
    g = _parse_grid("-2:2:-1:1:11x21")
    assert (g.x_min, g.x_max, g.y_min, g.y_max) == (-2.0, 2.0, -1.0, 1.0)
    assert (g.nx, g.ny) == (11, 21)
    for bad in ("1:2:3:4", "a:2:3:4:5x5", "1:2:3:4:5", "2:1:0:1:5x5"):
        with pytest.raises(ConfigError):
            _parse_grid(bad)


def test_field_command_writes_outputs(tmp_path, capsys):
    csv = tmp_path / "f.csv"
    pgm = tmp_path / "f.pgm"
    code, out, _ = run(capsys, "field", "--kind", "ftle-forward",
                       "--system", "linear-saddle",
                       "--grid=-1:1:-1:1:11x11", "--T", "1",
                       "--csv", str(csv), "--pgm", str(pgm))
    assert code == EXIT_OK
    summary = json.loads(out.strip().splitlines()[-1])
    assert summary["kind"] == "ftle-forward"
    assert summary["valid"] == 121
    assert csv.exists() and pgm.exists()
    # the saddle FTLE field is constant
    assert abs(summary["max"] - summary["min"]) <= 1e-9


def test_field_command_bad_grid_is_config_error(capsys):
    code, _, err = run(capsys, "field", "--kind", "ftle-forward",
                       "--grid", "nonsense")
    assert code == EXIT_CONFIG
    assert err.strip()


def test_field_command_bad_T(capsys):
    code, _, _ = run(capsys, "field", "--kind", "ftle-forward", "--T=-1")
    assert code == EXIT_CONFIG


def test_verify_pesin_quick(capsys):
    code, out, _ = run(capsys, "verify", "pesin", "--draws", "25")
    assert code == EXIT_OK
    assert json.loads(out.strip())["pass"] is True


def test_verify_mc_quick(capsys):
    code, out, _ = run(capsys, "verify", "mc", "--samples", "200000")
    assert code == EXIT_OK
    assert json.loads(out.strip())["pass"] is True


def test_invalid_threads_env(monkeypatch, capsys):
    monkeypatch.setenv("FTME_THREADS", "zero")
    code, _, err = run(capsys, "verify", "pesin", "--draws", "1")
    assert code == EXIT_CONFIG
    assert "FTME_THREADS" in err


def test_valid_threads_env(monkeypatch, capsys):
    monkeypatch.setenv("FTME_THREADS", "2")
    code, _, _ = run(capsys, "verify", "pesin", "--draws", "5")
    assert code == EXIT_OK


def test_figures_outputs(tmp_path, capsys):
    out_dir = tmp_path / "figs"
    code, out, _ = run(capsys, "figures", "--out", str(out_dir),
                       "--grid-size", "11", "--T", "1")
    assert code == EXIT_OK
    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert len(manifest["outputs"]) == 6  # 2 systems x 3 field kinds
    for entry in manifest["outputs"]:
        assert (out_dir / entry["csv"]).exists()
        assert (out_dir / entry["pgm"]).exists()
