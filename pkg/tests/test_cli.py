import json
import shutil

import numpy as np
import pytest
from scipy import constants

from traplab.cli import main
from traplab.geometry import data_path
from traplab.io import read_xyz
from traplab.potentials import SR88


def _manifest(d):
    return json.loads((d / "manifest.json").read_text())


def test_characterize_unstable_set_reports_height(tmp_path, capsys):
    out = tmp_path / "a"
    assert main(["characterize", "--voltages", "set_a", "--out", str(out), "--no-depth"]) == 3
    text = (out / "report.txt").read_text()
    height = float(text.split("ion height")[1].split()[0])
    assert height == pytest.approx(504, rel=0.03)
    assert "not confining along z" in capsys.readouterr().err


def test_characterize_shallow_set_c(tmp_path):
    out = tmp_path / "c"
    assert main(["characterize", "--voltages", "set_c", "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert any("shallow trap" in w for w in rep["warnings"])
    head = (out / "cross_section.csv").read_text().splitlines()[:4]
    assert "# isolevel_spacing_meV: 10" in head
    assert head[3] == "x_um,y_um,energy_meV"
    assert rep["trap_depth_meV"] == pytest.approx(13, rel=0.15)


def test_missing_file_exit_2(tmp_path, capsys):
    out = tmp_path / "m"
    assert main(["characterize", "--voltages", str(tmp_path / "nope.json"), "--out", str(out)]) == 2
    assert "not found" in capsys.readouterr().err
    # the manifest precedes any computation, so it exists even here
    assert _manifest(out)["command"] == "characterize"


def test_bad_argument_exit_2(tmp_path):
    assert main(["scan", "--voltages", "set_c", "--vrf", "100", "50", "3", "--out", str(tmp_path)]) == 2
    assert main(["crystallize", "--bogus"]) == 2


def test_scan_rows_and_all_unstable(tmp_path):
    good = tmp_path / "good"
    assert main(["scan", "--voltages", "scan_axial", "--vrf", "80", "160", "5", "--out", str(good)]) == 0
    lines = (good / "scan.csv").read_text().splitlines()
    assert lines[0] == "V_rf_V,f_x_kHz,f_y_kHz,f_z_kHz,stable,note"
    assert len(lines) == 6
    bad = tmp_path / "bad"
    assert main(["scan", "--voltages", "set_a", "--vrf", "100", "140", "3", "--out", str(bad)]) == 3
    rows = (bad / "scan.csv").read_text().splitlines()[1:]
    assert len(rows) == 3 and all(r.split(",")[4] == "0" for r in rows)


def test_crystallize_two_ions_and_reproducible(tmp_path):
    args = ["crystallize", "--harmonic", "624", "624", "156", "--n", "2", "--seed", "5",
            "--steps-per-rung", "300"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    d0 = (constants.e**2 / (2 * np.pi * constants.epsilon_0 * SR88.mass * (2 * np.pi * 156e3) ** 2)) ** (1 / 3)
    rep = json.loads((a / "report.json").read_text())
    assert rep["nn_mean"] == pytest.approx(d0, rel=1e-4)
    assert rep["nn_mean"] == pytest.approx(14.9e-6, rel=0.01)
    for name in ("frames.xyz", "nn_histogram.csv", "report.json", "report.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    m = _manifest(a)
    assert m["seed"] == 5 and m["tool_version"]
    frames = read_xyz(a / "frames.xyz")
    assert frames[-1][1].shape == (2, 3)


def test_classify_subcommand(tmp_path):
    src = tmp_path / "run"
    assert main(["crystallize", "--harmonic", "300", "300", "100", "--n", "6", "--steps-per-rung", "300",
                 "--out", str(src)]) == 0
    out = tmp_path / "cls"
    assert main(["classify", str(src / "frames.xyz"), "--out", str(out)]) == 0
    got = json.loads((out / "report.json").read_text())
    ref = json.loads((src / "report.json").read_text())
    # the XYZ round trip keeps positions to 1e-12 m
    assert got["class"] == ref["class"] == "chain-1D"
    assert got["layer_count"] == ref["layer_count"]
    assert got["nn_mean"] == pytest.approx(ref["nn_mean"], rel=1e-8)


def test_compensate_subcommand(tmp_path):
    out = tmp_path / "comp"
    code = main(["compensate", "--voltages", "set_c", "--stray", "70", "0", "0", "--axes", "xy",
                 "--out", str(out)])
    assert code == 0
    assert "residual" in (out / "compensation.txt").read_text()
    # z is not controllable with the default electrodes
    assert main(["compensate", "--voltages", "set_c", "--stray", "70", "0", "0", "--out", str(tmp_path / "z")]) == 2


def test_data_directory_override(tmp_path, monkeypatch):
    alt = tmp_path / "data"
    shutil.copytree(data_path("."), alt)
    cfg = json.loads((alt / "set_c.json").read_text())
    cfg["rf_amplitude_V"] = 140.0
    (alt / "set_c.json").write_text(json.dumps(cfg))
    monkeypatch.setenv("TRAPLAB_DATA", str(alt))
    out = tmp_path / "o"
    assert main(["characterize", "--voltages", "set_c", "--no-depth", "--out", str(out)]) == 0
    assert _manifest(out)["config_paths"]["voltages"] == str(alt / "set_c.json")
