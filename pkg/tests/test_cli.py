import csv
import io
import json
import math

import pytest
from scipy.optimize import minimize_scalar

from bilat.cli import DELTA_COLUMNS, RunManifest, cmd_validate, main
from bilat.device import ConfigError, build_biperiodic, reference_half_cell
from bilat.tmatrix import transmission_direct
from bilat.transmission import SweepRecord

REFERENCE = {"biperiodic": {"well_wide_nm": 4.3, "well_narrow_nm": 3.8, "barrier_nm": 3.8,
                      "barrier_meV": 288.09, "half_cells": 6, "order": "wide_first"}}


@pytest.fixture
def ref_file(tmp_path):
    path = tmp_path / "reference.json"
    path.write_text(json.dumps(REFERENCE))
    return str(path)


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_manifest_validation():
    with pytest.raises(ConfigError):
        RunManifest("sweep", "x", 1.0, 2.0, 1)
    with pytest.raises(ConfigError):
        RunManifest("sweep", "x", 2.0, 1.0, 10)
    assert len(RunManifest("sweep", "x", 1.0, 2.0, 5).grid()) == 5


def test_sweep_csv(ref_file, capsys):
    code, out, _ = run(["sweep", "--device", ref_file, "--emin", "85", "--emax", "130",
                        "--points", "4501"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == SweepRecord.columns()
    t = [float(r["T_N"]) for r in rows]
    e = [float(r["energy"]) for r in rows]
    # local maxima reaching 1 in the lower band
    peaks = [i for i in range(1, len(t) - 1)
             if t[i] >= t[i - 1] and t[i] >= t[i + 1] and t[i] > 0.999 and 91.5 < e[i] < 97]
    assert len(peaks) == 3
    # the 0.01 meV grid samples each peak slightly off its top; refine
    dev = build_biperiodic(reference_half_cell(), 6)
    for i in peaks:
        res = minimize_scalar(lambda x: -transmission_direct(dev, x), bounds=(e[i - 1], e[i + 1]),
                              method="bounded", options={"xatol": 1e-10})
        assert -res.fun == pytest.approx(1.0, abs=1e-6)
    assert float(rows[1]["energy"]) == 85.01


def test_sweep_deterministic(ref_file, tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert main(["sweep", "--device", ref_file, "--emin", "90", "--emax", "120",
                     "--points", "301", "--out", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()
    first = a.read_text().splitlines()[1].split(",")
    assert first[0] == "90"
    assert len(first[2]) > 15


def test_sweep_odd_env(ref_file, capsys):
    code, out, _ = run(["sweep", "--device", ref_file, "--half-cells", "7", "--emin", "95",
                        "--emax", "96.8", "--points", "50", "--format", "json"], capsys)
    assert code == 0
    rows = json.loads(out)
    assert all(r["env_max"] < 1 for r in rows)


def test_sweep_free_device(tmp_path, capsys):
    path = tmp_path / "free.json"
    path.write_text(json.dumps({"layers": [{"width_nm": 5.0, "potential_meV": 0.0, "mass": 0.07}]}))
    code, out, _ = run(["sweep", "--device", str(path), "--emin", "1", "--emax", "2", "--points", "2"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 2
    assert all(float(r["T_N"]) == pytest.approx(1.0, abs=1e-12) for r in rows)


def test_bands(ref_file, capsys):
    code, out, _ = run(["bands", "--device", ref_file], capsys)
    doc = json.loads(out)
    assert code == 0
    assert abs(doc["gap"]["lo"] - 98) < 3 and abs(doc["gap"]["hi"] - 112) < 3
    assert doc["transparent"]["band"] == "lower"
    code, out, _ = run(["bands", "--device", ref_file, "--order", "narrow"], capsys)
    assert json.loads(out)["transparent"]["band"] == "upper"


def test_bands_symmetric(tmp_path, capsys):
    doc = json.loads(json.dumps(REFERENCE))
    doc["biperiodic"].update(well_wide_nm=4.05, well_narrow_nm=4.05)
    path = tmp_path / "sym.json"
    path.write_text(json.dumps(doc))
    code, out, _ = run(["bands", "--device", str(path), "--emin", "80", "--emax", "130"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["gap"]["hi"] - rep["gap"]["lo"] < 1e-6
    assert rep["transparent"] is None


def test_delta_columns(capsys):
    code, out, _ = run(["delta", "--omega-d-pi", "1.403", "--asym", "0.1", "--kdmin-pi", "0.05",
                        "--kdmax-pi", "1", "--points", "96"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and list(rows[0]) == DELTA_COLUMNS and len(rows) == 96


def test_delta_symmetric_z2(capsys):
    code, out, _ = run(["delta", "--omega-d-pi", "1.403", "--asym", "0", "--points", "50"], capsys)
    for row in csv.DictReader(io.StringIO(out)):
        z2, z2t = float(row["Z2"]), float(row["Z2_tilde"])
        assert z2 == z2t or (math.isinf(z2) and math.isinf(z2t))


def test_delta_edges(capsys):
    code, out, _ = run(["delta", "--omega-d-pi", "1.403", "--asym", "0.1", "--kdmin-pi", "0.5",
                        "--kdmax-pi", "1", "--edges"], capsys)
    rep = json.loads(out)
    assert abs(rep["gap_over_pi"]["lo"] - 0.77) < 0.01 and abs(rep["gap_over_pi"]["hi"] - 0.89) < 0.01


def test_validate_default():
    buf = io.StringIO()
    assert cmd_validate(out=buf) == 0
    text = buf.getvalue()
    assert "PASS" in text and "mu = eta - alpha" in text
    resid = float(text.split("max residual ")[1].split()[0])
    assert resid < 1e-9


def test_validate_coarse_fails(capsys):
    code, out, _ = run(["validate", "--slice-widths", "1"], capsys)
    assert code == 1 and "FAIL" in out


@pytest.mark.parametrize("args", [
    ["sweep", "--device", "/nonexistent.json", "--emin", "1", "--emax", "2"],
    ["delta", "--omega-d-pi", "-1"],
    ["validate", "--slice-widths", "0"],
])
def test_config_errors(args, capsys):
    code, _, err = run(args, capsys)
    assert code == 2 and "config error" in err


def test_bad_config_file(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"layers": [}')
    code, _, err = run(["sweep", "--device", str(path), "--emin", "1", "--emax", "2"], capsys)
    assert code == 2 and "line 1" in err


def test_numerical_failure(capsys):
    code, _, err = run(["delta", "--omega-d-pi", "1.403", "--asym", "0.1", "--kdmin-pi", "0.1",
                        "--kdmax-pi", "0.2", "--edges"], capsys)
    assert code == 3 and "numerical failure" in err


def test_argparse_errors():
    with pytest.raises(SystemExit) as info:
        main(["sweep"])
    assert info.value.code == 2
