import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from fcifem import results
from fcifem.experiments import (ExperimentConfig, ghost_layers_for,
                                load_config, periodic2d_source, run)
from fcifem.fields import DivertorField


def write_cfg(tmp_path, data):
    p = tmp_path / "cfg.yaml"
    with open(p, "w") as fh:
        yaml.safe_dump(data, fh)
    return p


TINY_2D = {
    "problem": "periodic2d",
    "spline_order": 2,
    "mapping": "straight",
    "field": {"kind": "straight", "bz": 1.0, "bzeta": 1.0},
    "source": {"n": 10},
    "geometry": {"z0": 0.0, "z1": 2 * np.pi, "zeta1": 2 * np.pi},
    "scan": [{"n_z": 43, "n_zeta": 4}, {"n_z": 86, "n_zeta": 8}],
    "quadrature": {"refine_r": 1, "refine_z": 6, "refine_zeta": 6},
    "solver": {"method": "cg", "tol": 1e-12},
}


def test_config_roundtrip_and_overrides(tmp_path):
    p = write_cfg(tmp_path, TINY_2D)
    cfg = load_config(p, overrides=["source.n=7", "solver.tol=1e-9"])
    assert cfg.source["n"] == 7
    assert cfg.solver.tol == 1e-9
    assert cfg.quadrature.refine_z == 6


def test_unknown_config_keys_rejected(tmp_path):
    bad = dict(TINY_2D)
    bad["frobnicate"] = 1
    p = write_cfg(tmp_path, bad)
    with pytest.raises(ValueError, match="frobnicate"):
        load_config(p)


def test_periodic2d_source_modes():
    rho, modes = periodic2d_source(10)
    zz = np.linspace(0, 2 * np.pi, 40)
    qq = np.linspace(0, 2 * np.pi, 41)[:40]
    want = np.zeros_like(zz)
    for kz, kq, a in modes:
        want = want + np.real(a * np.exp(1j * (kz * zz + kq * qq)))
    assert np.abs(rho(0, zz, qq) - want).max() < 1e-14


def test_ghost_layers_cover_displacement():
    fld = DivertorField()
    gr, gz = ghost_layers_for(fld, (0, 2, -1, 1.5), 1.5 * np.pi / 20,
                              0.02, 0.025)
    # corner excursions approach two units in R for this field
    assert gr >= 80
    assert gz >= 25


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny2d")
    cfg = ExperimentConfig.from_dict(
        {**TINY_2D, "out_dir": str(out)})
    payload = run(cfg)
    return cfg, payload, out


def test_periodic2d_runs_and_converges(tiny_run):
    _, payload, out = tiny_run
    pts = payload["metrics"]["points"]
    assert pts[0]["l2_error"] > pts[1]["l2_error"]
    assert payload["metrics"]["fit_slope"] < -2.5
    assert (out / "result.json").exists()
    header, data = results.read_series(out / "series.csv")
    assert header == ["n_z", "n_zeta", "dofs", "l2_error"]
    assert data.shape == (2, 4)


def test_rerun_is_bit_identical(tiny_run):
    cfg, _, out = tiny_run
    first = (out / "result.json").read_bytes()
    run(cfg)
    assert (out / "result.json").read_bytes() == first


def test_config_echo_written(tiny_run):
    cfg, _, out = tiny_run
    with open(out / "config_echo.yaml") as fh:
        echo = yaml.safe_load(fh)
    assert echo["problem"] == "periodic2d"
    assert echo["scan"][1]["n_z"] == 86
    # the echo reloads into an equivalent config
    cfg2 = ExperimentConfig.from_dict(echo)
    assert cfg2.to_dict() == cfg.to_dict()


def test_result_json_schema(tiny_run):
    _, _, out = tiny_run
    doc = json.loads((out / "result.json").read_text())
    assert doc["schema"] == "fcifem-result-v1"
    assert set(doc) >= {"config", "metrics", "artifacts", "problem"}
    for rel in doc["artifacts"].values():
        assert (out / rel).exists()


def test_mapping_error_tiny(tmp_path):
    cfg = ExperimentConfig.from_dict({
        "problem": "mapping_error",
        "field": {"kind": "divertor", "b0": 1.0},
        "grid": {"n_r": 24, "n_z": 24, "n_zeta": 1},
        "out_dir": str(tmp_path / "me"),
    })
    payload = run(cfg)
    m = payload["metrics"]
    assert 0.0 < m["rms"] < m["max"]
    assert m["kept"] < m["total_seeds"]
    # errors concentrate at large |Z| where the flux gradients blow up
    assert m["top_decile_mean_abs_z"] > m["all_mean_abs_z"]
    header, data = results.read_series(tmp_path / "me" / "per_seed.csv")
    assert header == ["r", "z", "error", "kept"]
    assert len(data) == m["total_seeds"]


def test_array_roundtrip(tmp_path):
    arr = np.linspace(0, 1, 24).reshape(4, 6)
    results.write_array(tmp_path, "f", arr, [("R", 0.0, 2.0), ("Z", -1.0, 1.5)])
    back, axes = results.read_array(tmp_path / "f.csv")
    assert np.array_equal(back, arr)
    assert axes[0] == ("R", 0.0, 2.0, 4)


def test_array_reader_rejects_unknown_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("# fcifem-array-v1\n# shape: 1 1\n# axis: R 0 1 1\n"
                 "# wibble: 3\n1.0\n")
    with pytest.raises(ValueError, match="wibble"):
        results.read_array(p)


def test_fit_loglog():
    x = np.array([1.0, 2.0, 4.0])
    slope, _, resid = results.fit_loglog(x, 5.0 * x ** -3)
    assert slope == pytest.approx(-3.0, abs=1e-12)
    assert resid < 1e-12


def test_cli_round_trip(tmp_path, capsys):
    from fcifem.cli import main
    p = write_cfg(tmp_path, {**TINY_2D,
                             "scan": [{"n_z": 20, "n_zeta": 2},
                                      {"n_z": 40, "n_zeta": 4}]})
    rc = main(["run", str(p), "--out", str(tmp_path / "o"),
               "--override", "solver.tol=1e-10", "--threads", "1"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["problem"] == "periodic2d"
    assert (tmp_path / "o" / "result.json").exists()


def test_tokamak_filament_smoke(tmp_path):
    cfg = ExperimentConfig.from_dict({
        "problem": "tokamak_filament",
        "spline_order": 2,
        "mapping": "taylor",
        "field": {"kind": "divertor", "b0": 1.0},
        "grid": {"n_r": 20, "n_z": 20, "n_zeta": 1},
        "source": {"start": [0.36, -1.0, 0.0], "line_samples": 12},
        "quadrature": {"refine_r": 4, "refine_z": 4, "refine_zeta": 4},
        "solver": {"method": "cg", "tol": 1e-10},
        "out_dir": str(tmp_path / "fil"),
    })
    payload = run(cfg)
    m = payload["metrics"]
    assert 0.2 < m["rms_displacement"] < 0.4
    assert payload["matrix_stats"]["bandwidth_rcm"] <= \
        payload["matrix_stats"]["bandwidth"]
    out = tmp_path / "fil"
    for art in payload["artifacts"].values():
        assert (out / art).exists()
    phi, axes = results.read_array(out / "phi_slice.csv")
    assert phi.shape == (60, 60)
    vox, _ = results.read_array(out / "phi_voxel.csv")
    assert vox.ndim == 3


def test_cartesian3d_smoke(tmp_path):
    cfg = ExperimentConfig.from_dict({
        "problem": "cartesian_compare",
        "spline_order": 2,
        "mapping": "identity",
        "field": {"kind": "divertor", "b0": 1.0},
        "grid": {"n_r": 16, "n_z": 16, "n_zeta": 4},
        "source": {"start": [0.36, -1.0, 0.0], "mode": "3d",
                   "line_samples": 12},
        "quadrature": {"refine_r": 4, "refine_z": 4, "refine_zeta": 4},
        "solver": {"method": "cg", "tol": 1e-9},
        "out_dir": str(tmp_path / "c3"),
    })
    payload = run(cfg)
    assert payload["metrics"]["dofs"] > 0
    assert payload["matrix_stats"]["mean_nnz_per_row"] <= 125.0
    assert (tmp_path / "c3" / "phi_voxel.csv").exists()
