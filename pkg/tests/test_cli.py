import json
import subprocess
import sys

import numpy as np
import pytest

from wardlab.cli import main
from wardlab.io import read_snapshot, read_trajectory
from wardlab.monodromy import Truncated, default_thetas, null_monodromy_sweep
from wardlab.solitons import SolitonSpec, one_pole

SMALL = ["--grid", "17,17", "--extent=-2,2,-2,2"]


def run(tmp_path, name, *argv):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, out


class TestMake:
    def test_snapshot_deterministic(self, tmp_path):
        _, a = run(tmp_path, "a", "make", "--builtin", "moving-lump", *SMALL, "--t", "0.5")
        _, b = run(tmp_path, "b", "make", "--builtin", "moving-lump", *SMALL, "--t", "0.5")
        assert (a / "field.wdf").read_bytes() == (b / "field.wdf").read_bytes()
        assert read_snapshot(a / "field.wdf").t == 0.5

    def test_soliton_file(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(SolitonSpec(0.5 + 1j).to_json())
        code, out = run(tmp_path, "s", "make", "--spec", str(spec), *SMALL)
        assert code == 0
        ref = one_pole(SolitonSpec(0.5 + 1j))
        f = read_snapshot(out / "field.wdf")
        X, Y = f.grid.mesh()
        assert np.array_equal(f.data, ref.evaluate(X, Y, np.zeros_like(X)))

    def test_trajectory_and_slice(self, tmp_path):
        _, out = run(tmp_path, "t", "make", "--builtin", "lump", *SMALL, "--steps", "3")
        traj = read_trajectory(out / "index.json")
        assert len(traj.trajectory) == 4
        code, s = run(tmp_path, "s", "slice", "--input", str(out / "index.json"), "--index", "2")
        assert code == 0
        assert (s / "slice.wdf").read_bytes() == (out / "slice_00002.wdf").read_bytes()

    def test_manifest(self, tmp_path):
        _, out = run(tmp_path, "m", "make", "--builtin", "identity", *SMALL)
        m = json.loads((out / "manifest.json").read_text())
        assert m["command"] == "make" and m["outputs"] == ["field.wdf"]
        assert len(m["config_hash"]) == 64


class TestDiagnostics:
    def test_residual_identity_zero(self, tmp_path):
        _, out = run(tmp_path, "r", "residual", "--builtin", "identity", *SMALL, "--refine", "2")
        rows = (out / "residual.csv").read_text().splitlines()
        assert rows[0] == "h,sup_residual,l2_residual"
        assert rows[1:] == ["0.25,0.0,0.0", "0.125,0.0,0.0"]

    def test_snapshot_grid_inferred(self, tmp_path):
        _, snap = run(tmp_path, "s", "make", "--builtin", "lump", *SMALL)
        code, out = run(tmp_path, "r", "residual", "--snapshot", str(snap / "field.wdf"))
        assert code == 0
        rows = (out / "residual.csv").read_text().splitlines()
        # static lump: the snapshot is the solution; grid shrinks by two nodes
        h, sup, _ = rows[1].split(",")
        assert float(h) == 0.25 and float(sup) < 0.3

    def test_reports_repeatable(self, tmp_path):
        argv = ["monodromy", "--builtin", "lump", "--n-theta", "4", "--mode", "truncated:20"]
        _, a = run(tmp_path, "a", *argv)
        _, b = run(tmp_path, "b", *argv)
        assert (a / "monodromy.csv").read_bytes() == (b / "monodromy.csv").read_bytes()
        ma = json.loads((a / "manifest.json").read_text())
        mb = json.loads((b / "manifest.json").read_text())
        assert ma["config_hash"] == mb["config_hash"]

    def test_monodromy_csv_matches_library(self, tmp_path):
        _, out = run(tmp_path, "m", "monodromy", "--builtin", "lump", "--n-theta", "4",
                     "--mode", "truncated:20", "--offsets", "0,0;1,-1")
        rep = null_monodromy_sweep(one_pole(SolitonSpec(1j)), 0.0, default_thetas(4),
                                   [(0, 0), (1, -1)], Truncated(20.0))
        assert (out / "monodromy.csv").read_text() == rep.to_csv()

    @pytest.mark.parametrize("argv,files", [
        (["energy", "--builtin", "diagonal-wave"], ["energy.csv"]),
        (["gauge-check", "--builtin", "lump", "--refine", "2"], ["gauge.csv"]),
        (["lax-check", "--builtin", "moving-lump"], ["lax.csv"]),
        (["evolve", "--builtin", "moving-lump", "--steps", "6"], ["index.json", "diagnostics.csv"]),
        (["frame", "--builtin", "lump", "--theta", "1.0"], ["frame.wdf"]),
        (["decay", "--builtin", "lump"], ["decay.csv", "decay.json"]),
        (["radon-u1", "--scalar", "bump", "--theta", "0.5"], ["radon.json"]),
    ])
    def test_commands(self, tmp_path, argv, files):
        code, out = run(tmp_path, "c", *argv, *SMALL)
        assert code == 0
        m = json.loads((out / "manifest.json").read_text())
        assert m["outputs"] == files
        for f in files:
            assert (out / f).stat().st_size > 0

    def test_charge_constant(self, tmp_path, capsys):
        code, out = run(tmp_path, "q", "charge", "--builtin", "constant", *SMALL, "--n-theta", "8",
                        "--json")
        assert code == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["Q"] == 0.0 and summary["nearest_integer"] == 0
        assert json.loads((out / "charge.json").read_text()) == summary


class TestErrors:
    def test_json_error_configuration(self, tmp_path, capsys):
        code, _ = run(tmp_path, "e", "residual", "--builtin", "lump", "--grid", "17,33", "--json")
        assert code == 2
        err = json.loads(capsys.readouterr().out)
        assert err["error"] == "UsageError" and err["field"] == "grid"

    def test_json_error_format(self, tmp_path, capsys):
        bad = tmp_path / "bad.wdf"
        bad.write_bytes(b"nope")
        code, _ = run(tmp_path, "e", "slice", "--input", str(bad), "--json")
        assert code == 1
        err = json.loads(capsys.readouterr().out)
        assert err["error"] == "FormatError" and err["offset"] == 0

    def test_source_required(self, tmp_path, capsys):
        code, _ = run(tmp_path, "e", "energy", *SMALL)
        assert code == 2
        assert "exactly one" in capsys.readouterr().err

    def test_bad_soliton_file(self, tmp_path, capsys):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"mu": {"re": 1.0, "im": 0.0}, "f_num": [[0, 0], [1, 0]]}))
        code, _ = run(tmp_path, "e", "make", "--spec", str(spec), *SMALL, "--json")
        assert code == 2 and json.loads(capsys.readouterr().out)["field"] == "mu"

    def test_unknown_flag(self, tmp_path):
        assert run(tmp_path, "e", "energy", "--frobnicate")[0] == 2


class TestConfig:
    def test_defaults_from_file(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"builtin": "identity", "grid": "9,9", "extent": "0,1,0,1"}))
        code, out = run(tmp_path, "c", "make", "--config", str(cfg))
        assert code == 0
        assert read_snapshot(out / "field.wdf").grid.nx == 9

    def test_command_line_wins(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"builtin": "identity", "grid": "9,9", "extent": "0,1,0,1"}))
        _, out = run(tmp_path, "c", "make", "--config", str(cfg), "--grid", "17,17",
                     "--extent", "0,2,0,2")
        assert read_snapshot(out / "field.wdf").grid.nx == 17

    def test_unknown_key(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"colour": "red"}))
        code, _ = run(tmp_path, "c", "make", "--config", str(cfg), "--json")
        assert code == 2 and json.loads(capsys.readouterr().out)["field"] == "colour"


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "wardlab.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("wardlab ")
