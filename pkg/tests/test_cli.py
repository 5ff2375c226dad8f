import csv
import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from mqcwit import runner
from mqcwit.cli import PRESETS, main, preset_text
from mqcwit.config import parse_config
from mqcwit.dicke import prepare_ghz
from mqcwit.exact import FullDensityMatrix, dicke_to_full

SUMMARY_HEADER = [
    "point", "parameter", "value", "N", "J", "Omega", "twist", "t", "Jt",
    "gamma_ud", "gamma_du", "gamma_el", "gamma_total", "N_gamma_t", "backend",
    "axis_x", "axis_y", "axis_z", "spectrum_source", "calibrated", "purity",
    "f_i", "f_i_over_N", "qfi", "qfi_over_N", "f_i_over_qfi", "depth_f_i", "depth_qfi",
    "squeezing_xi2", "N_over_xi2", "n_violations", "max_violation_ratio",
    "protocol_direct_max_diff", "imag_residue", "error",
]
SPECTRUM_HEADER = [
    "point", "value", "m", "intensity", "intensity_direct", "separable_bound",
    "violation_ratio", "violation", "qfi_over_N",
]


def write_config(tmp_path, obj, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def read_csv(path):
    lines = path.read_text().splitlines()
    comments = [l for l in lines if l.startswith("#")]
    rows = list(csv.reader(l for l in lines if not l.startswith("#")))
    return comments, rows[0], rows[1:]


SMALL = {"model": {"N": 4, "J": 1.0}, "protocol": {"t": 0.7, "axis": "optimize"},
         "analysis": {"entropies": [0, 2]}}


def test_simulate_writes_golden_tables(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["simulate", "--config", write_config(tmp_path, SMALL), "--out", str(out)]) == 0
    assert "1 point(s)" in capsys.readouterr().out
    comments, header, rows = read_csv(out / "summary.csv")
    assert header == SUMMARY_HEADER
    assert [c.split("=")[0] for c in comments] == ["# code_version", "# config_hash"]
    cfg = parse_config(json.dumps(SMALL), check_output=False)
    assert comments[1] == f"# config_hash={runner.config_hash(cfg)}"
    assert len(rows) == 1 and rows[0][SUMMARY_HEADER.index("error")] == ""
    _, header, rows = read_csv(out / "spectrum.csv")
    assert header == SPECTRUM_HEADER and len(rows) == 9
    _, header, rows = read_csv(out / "echo.csv")
    assert header == ["point", "value", "phi", "fidelity"] and len(rows) == 20
    _, header, rows = read_csv(out / "entropies.csv")
    assert header == ["point", "value", "n_traced", "von_neumann", "renyi2"] and len(rows) == 2
    for f in out.iterdir():
        if f.is_file():
            assert b"\r" not in f.read_bytes()
    report = json.loads((out / "report.json").read_text())
    assert list(report) == sorted(report)
    assert report["config_hash"] == runner.config_hash(cfg)
    assert report["config"]["model"]["N"] == 4


def test_summary_values_are_physical(tmp_path):
    out = tmp_path / "out"
    main(["simulate", "--config", write_config(tmp_path, SMALL), "--out", str(out), "--format", "json"])
    s = json.loads((out / "report.json").read_text())["points"][0]["summary"]
    assert s["purity"] == pytest.approx(1.0)
    assert s["f_i"] == pytest.approx(s["qfi"], rel=1e-8)
    assert s["calibrated"] is True and s["backend"] == "dicke_pure"
    assert s["protocol_direct_max_diff"] < 1e-10
    assert not (out / "summary.csv").exists()


def test_numbers_round_trip_through_csv():
    for x in (0.1, 1 / 3, 6.02214076e23, 1e-300, -2.5, 0.0):
        assert float(runner.format_number(x)) == x
    assert runner.format_number(True) == "true" and runner.format_number(None) == ""
    assert runner.format_number(np.int64(7)) == "7"


def sweep_config(directory):
    return {"model": {"N": 5, "J": 1.0}, "protocol": {"t": 0.2, "axis": "optimize"},
            "sweep": {"parameter": "Jt", "linspace": [0.2, 1.4, 4]},
            "outputs": {"directory": str(directory)}}


def test_sweep_is_identical_across_worker_counts(tmp_path, monkeypatch):
    a, b = tmp_path / "a", tmp_path / "b"
    path = write_config(tmp_path, sweep_config(a))
    assert main(["sweep", "--config", path, "--workers", "1"]) == 0
    monkeypatch.setenv("MQC_WORKERS", "3")
    assert runner.worker_count() == 3
    assert main(["sweep", "--config", path, "--out", str(b)]) == 0
    names = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    assert names == sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    assert len([n for n in names if n.parts[0] == "points"]) == 4
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes()


def test_one_point_sweep_matches_single_run(tmp_path):
    single = dict(SMALL, protocol={"t": 0.7, "axis": "optimize"})
    sweep = dict(single, sweep={"parameter": "t", "values": [0.7]})
    main(["simulate", "--config", write_config(tmp_path, single, "a.json"), "--out", str(tmp_path / "a")])
    main(["sweep", "--config", write_config(tmp_path, sweep, "b.json"), "--out", str(tmp_path / "b")])
    ra = json.loads((tmp_path / "a" / "report.json").read_text())["points"][0]
    rb = json.loads((tmp_path / "b" / "report.json").read_text())["points"][0]
    assert ra["spectrum"] == rb["spectrum"]
    assert ra["echo"] == rb["echo"]
    for key in set(ra["summary"]) - {"parameter", "value"}:
        assert ra["summary"][key] == rb["summary"][key], key


def test_simulate_refuses_sweeps(tmp_path, capsys):
    path = write_config(tmp_path, sweep_config(tmp_path / "x"))
    assert main(["simulate", "--config", path]) == 2
    assert "sweep" in capsys.readouterr().err


def test_per_point_failures_exit_nonzero(tmp_path, capsys, monkeypatch):
    def boom(pt, analysis):
        if pt.index == 1:
            raise RuntimeError("synthetic failure")
        return real(pt, analysis)

    real = runner.compute_point
    monkeypatch.setattr(runner, "compute_point", boom)
    path = write_config(tmp_path, sweep_config(tmp_path / "x"))
    assert main(["sweep", "--config", path, "--workers", "1"]) == 1
    assert "synthetic failure" in capsys.readouterr().err
    _, header, rows = read_csv(tmp_path / "x" / "summary.csv")
    assert "synthetic failure" in rows[1][header.index("error")]
    assert rows[0][header.index("error")] == ""


def test_validate_config(tmp_path, capsys):
    path = write_config(tmp_path, {"N": 4, "J": 1, "t": 1})
    assert main(["validate-config", "--config", path, "--out", str(tmp_path), "--print"]) == 0
    out = capsys.readouterr().out
    assert "ok, 1 point(s), backend dicke_pure" in out
    assert json.loads(out[out.index("{"):])["model"]["N"] == 4


def test_validate_rejects_out_of_range_oracle_request(tmp_path, capsys):
    obj = {"model": {"N": 48, "J": 2900.0, "Omega": 1450.0}, "rates": {"total": 60.0}, "protocol": {"t": 6e-4}}
    assert main(["validate-config", "--config", write_config(tmp_path, obj)]) == 2
    err = capsys.readouterr().err
    assert "config error" in err and "N <= 6" in err


def test_validate_reports_parse_position(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"N": 4,\n "J": }')
    assert main(["validate-config", "--config", str(path)]) == 2
    assert "line 2" in capsys.readouterr().err


@pytest.mark.parametrize("preset", sorted(PRESETS))
def test_presets_validate(preset, capsys, tmp_path):
    assert main(["validate-config", "--preset", preset, "--out", str(tmp_path)]) == 0
    assert main(["validate-config", "--preset", preset, "--ci", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.count(": ok,") == 2 * len(PRESETS[preset])


def test_fig3_preset_matches_figure_parameters():
    for name, jt in (("fig3a", 1.74), ("fig3b", 6.96)):
        cfg = parse_config(preset_text(name), check_output=False)
        assert cfg.model.N == 48 and cfg.model.twist == "z"
        assert cfg.t * cfg.model.J == pytest.approx(jt)
        assert cfg.sweep.parameter == "gamma_scaled" and cfg.sweep.ratio == (1.0, 1.0, 10.0)
        assert cfg.axis == "optimize-pure"


def test_fig2_preset_grid():
    cfg = parse_config(preset_text("fig2-ising"), check_output=False)
    assert cfg.sweep.parameter == "Jt" and len(cfg.sweep.values) == 200
    assert cfg.sweep.values[0] == 0.0 and cfg.sweep.values[-1] == 3.0
    field = parse_config(preset_text("fig2-field"), check_output=False)
    assert field.model.Omega == pytest.approx(field.model.J / 2)


def test_preset_ci_sweep_runs(tmp_path):
    assert main(["sweep", "--preset", "fig3", "--ci", "--out", str(tmp_path)]) == 0
    for label in ("fig3a-ci", "fig3b-ci"):
        report = json.loads((tmp_path / label / "report.json").read_text())
        ratios = [p["summary"]["f_i_over_qfi"] for p in report["points"]]
        assert ratios[0] == pytest.approx(1.0, abs=1e-8)
        assert all(b < a for a, b in zip(ratios, ratios[1:]))


def test_mqc_from_state_file(tmp_path, capsys):
    np.save(tmp_path / "ghz.npy", prepare_ghz(4).amps)
    assert main(["mqc", "--state", str(tmp_path / "ghz.npy"), "--axis", "z"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["f_i"] == pytest.approx(16.0) and d["violations"][-1]
    rho = FullDensityMatrix.from_pure(4, dicke_to_full(prepare_ghz(4))).rho
    np.save(tmp_path / "rho.npy", rho)
    assert main(["mqc", "--state", str(tmp_path / "rho.npy"), "--axis", "0,0,1", "--format", "csv"]) == 0
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert float(rows[-1]["intensity"]) == pytest.approx(0.25)
    np.save(tmp_path / "bad.npy", np.zeros((3, 3)))
    assert main(["mqc", "--state", str(tmp_path / "bad.npy")]) == 2
    assert main(["mqc"]) == 2


def test_mqc_from_config(tmp_path, capsys):
    assert main(["mqc", "--config", write_config(tmp_path, SMALL), "--out", str(tmp_path / "m")]) == 0
    d = json.loads((tmp_path / "m" / "spectrum.json").read_text())
    assert sum(d["intensities"]) == pytest.approx(1.0)
    assert d["config_hash"]


def test_witness_from_run_outputs(tmp_path, capsys):
    out = tmp_path / "s"
    main(["sweep", "--config", write_config(tmp_path, sweep_config(out)), "--workers", "1"])
    capsys.readouterr()
    assert main(["witness", "--spectrum", str(out / "spectrum.csv"), "--point", "3", "--qfi", "20"]) == 0
    from_csv = json.loads(capsys.readouterr().out)
    assert main(["witness", "--spectrum", str(out / "report.json"), "--point", "3", "--qfi", "20"]) == 0
    from_json = json.loads(capsys.readouterr().out)
    assert from_csv["N"] == 5 and from_csv["qfi"] == 20.0
    assert np.allclose(from_csv["intensities"], from_json["intensities"], atol=1e-15)
    bad = tmp_path / "bad.csv"
    bad.write_text("m,intensity\n0,1\n2,0\n")
    assert main(["witness", "--spectrum", str(bad)]) == 2


def test_console_script_is_installed(tmp_path):
    exe = shutil.which("mqcwit")
    cmd = [exe] if exe else [sys.executable, "-m", "mqcwit.cli"]
    res = subprocess.run(cmd + ["--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for sub in ("simulate", "mqc", "witness", "sweep", "validate-config"):
        assert sub in res.stdout
