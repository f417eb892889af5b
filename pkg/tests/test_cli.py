import json
import os

import numpy as np
import pytest
import yaml

from jsmd.analytic import jsmd_matrix
from jsmd.cli import main, matrix_csv, read_matrix_csv, thin_crystal_report
from jsmd.config import ConfigError, load_config, parse_length


def write_config(tmp_path, doc, name="run.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(doc))
    return str(path)


WAIST_1P35 = {"geometry": {"pump_waist": "2 mm diameter", "signal_waist": "1.35 mm diameter",
                           "idler_waist": "1.35 mm diameter"}}


# config

def test_parse_length_units_and_qualifiers():
    assert parse_length("2 mm diameter", "w", waist=True) == pytest.approx(1e-3)
    assert parse_length("750 um radius", "w", waist=True) == pytest.approx(750e-6)
    assert parse_length("405 nm", "lam") == pytest.approx(405e-9)
    with pytest.raises(ConfigError, match="qualifier"):
        parse_length("2 mm", "w", waist=True)
    with pytest.raises(ConfigError):
        parse_length(2.0, "w")
    with pytest.raises(ConfigError):
        parse_length("2 furlongs", "w")


def test_default_geometry_is_diameter_based():
    cfg = load_config(None)
    assert cfg.geometry.w_p == pytest.approx(1e-3)
    assert cfg.geometry.w_s == pytest.approx(0.675e-3)
    assert cfg.geometry.gamma_s == pytest.approx(2 / 1.35)


def test_gamma_geometry():
    cfg = load_config({"geometry": {"pump_waist": "1 mm radius", "gamma": 2.03}})
    assert cfg.geometry.gamma_s == pytest.approx(2.03)
    assert cfg.geometry.gamma_i == pytest.approx(2.03)


def test_unknown_key_is_named():
    with pytest.raises(ConfigError) as exc:
        load_config({"jsmd": {"l_rnage": [-1, 1]}})
    assert exc.value.field == "jsmd.l_rnage"


def test_simulate_section_builds_experiment():
    cfg = load_config({"simulate": {"rng_seed": 7, "aperture": "0.5 mm radius",
                                    "seed_modes": {"l_range": [-2, 2]},
                                    "projection_modes": [[2, 0], [-2, 0]],
                                    "dark_rate_hz": "1e2"}})
    exp = cfg.experiment()
    assert exp.rng_seed == 7 and exp.aperture_radius == pytest.approx(5e-4)
    assert len(exp.seed_modes) == 5 and len(exp.projection_modes) == 2
    assert exp.dark_rate_hz == 100.0
    assert cfg.experiment(99).rng_seed == 99


# exit codes

def test_empty_l_range_is_config_error(tmp_path, capsys):
    path = write_config(tmp_path, {"jsmd": {"l_range": [3, 1]}})
    assert main(["jsmd", "--config", path, "--out", str(tmp_path)]) == 2
    assert "l_range" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["jsmd", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_quadrature_failure_exit_code(tmp_path):
    path = write_config(tmp_path, {"validate": {"l_max": 2, "p_max": 2, "gammas": [0.5]},
                                   "quadrature": {"radial_nodes": 8, "max_radial_nodes": 16,
                                                  "target_rel_tol": 1e-14}})
    # Non-converged cells are recorded in the report, which then fails validation.
    assert main(["validate", "--config", path, "--out", str(tmp_path), "--no-metadata"]) == 4


# jsmd

def test_jsmd_default_grid_csv(tmp_path):
    path = write_config(tmp_path, WAIST_1P35)
    assert main(["jsmd", "--config", path, "--out", str(tmp_path), "--format", "csv"]) == 0
    l_values, values = read_matrix_csv((tmp_path / "jsmd.csv").read_text())
    assert values.shape == (13, 13)
    assert list(l_values) == list(range(-6, 7))
    assert values.max() == 1.0
    assert (tmp_path / "jsmd.meta.json").exists()
    assert not (tmp_path / "jsmd.json").exists()


def test_jsmd_reruns_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["jsmd", "--out", str(d), "--no-metadata"]) == 0
    assert sorted(os.listdir(a)) == ["jsmd.csv", "jsmd.json"]
    for name in os.listdir(a):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_csv_round_trip_precision():
    m = jsmd_matrix(load_config({"geometry": {"pump_waist": "1 mm radius",
                                              "gamma": 0.77}}).geometry)
    _, values = read_matrix_csv(matrix_csv(m))
    np.testing.assert_allclose(values, m.values, rtol=1e-14, atol=0)
    for row in matrix_csv(m).splitlines()[:3]:
        assert row.startswith("#")


def test_jsmd_json_metadata(tmp_path):
    main(["jsmd", "--out", str(tmp_path), "--format", "json", "--no-metadata"])
    doc = json.loads((tmp_path / "jsmd.json").read_text())
    assert doc["metadata"]["normalization"] == "global-max"
    assert len(doc["values"]) == 13


# spectrum

def test_spectrum_outputs(tmp_path):
    path = write_config(tmp_path, {"spectrum": {"gammas": [2.03],
                                                "sweep": {"start": 0.5, "stop": 4, "num": 20}}})
    assert main(["spectrum", "--config", path, "--out", str(tmp_path), "--format", "csv"]) == 0
    rows = [r for r in (tmp_path / "spectrum.csv").read_text().splitlines()
            if not r.startswith("#")]
    assert rows[0] == "gamma,l,weight"
    assert len(rows) == 1 + 7
    l1 = float(rows[2].split(",")[2])
    assert l1 == pytest.approx(0.79531, abs=1e-5)
    sweep = np.genfromtxt(tmp_path / "spectrum_sweep.csv", delimiter=",", comments="#",
                          skip_header=2)
    assert sweep.shape == (20, 4)
    assert np.all(np.diff(sweep[:, 1:], axis=0) > 0)


# validate

def test_validate_passes_and_writes_report(tmp_path):
    path = write_config(tmp_path, {"validate": {"l_max": 3, "p_max": 1}})
    assert main(["validate", "--config", path, "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "validation.json").read_text())
    assert doc["passed"] is True


def test_validate_unattainable_tolerance(tmp_path):
    path = write_config(tmp_path, {"validate": {"l_max": 2, "p_max": 1, "tolerance": 1e-30}})
    assert main(["validate", "--config", path, "--out", str(tmp_path)]) == 4
    doc = json.loads((tmp_path / "validation.json").read_text())
    assert doc["passed"] is False
    assert 0 < doc["max_deviation"] < 1e-9


# simulate

def test_simulate_seed_echo_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--seed", "42", "--out", str(a), "--no-metadata"]) == 0
    assert main(["simulate", "--seed", "42", "--out", str(b), "--no-metadata",
                 "--workers", "4"]) == 0
    for name in ("simulate.csv", "simulate.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    doc = json.loads((a / "simulate.json").read_text())
    assert doc["metadata"]["rng_seed"] == 42
    assert np.max(doc["normalized"]) == 1.0
    assert "# rng_seed=42" in (a / "simulate.csv").read_text()


def test_simulate_sidecar_has_seed(tmp_path):
    main(["simulate", "--seed", "5", "--out", str(tmp_path), "--format", "json"])
    meta = json.loads((tmp_path / "simulate.meta.json").read_text())
    assert meta["rng_seed"] == 5 and "created_utc" in meta


def test_bad_seed_is_config_error():
    assert main(["simulate", "--seed", "-1"]) == 2


# thin crystal

def test_thin_crystal_valid(tmp_path, capsys):
    path = write_config(tmp_path, {"geometry": {"pump_waist": "2 mm radius"}})
    assert main(["thin-crystal", "--config", path]) == 0
    out = capsys.readouterr().out
    assert "= 70.27" in out
    assert "approximation: valid" in out
    assert "94.8" in out


def test_thin_crystal_invalid():
    cfg = load_config({"geometry": {"pump_waist": "0.1 mm radius", "crystal_length": "200 mm"}})
    report = thin_crystal_report(cfg)
    assert "= 0.35" in report
    assert "approximation: invalid" in report
