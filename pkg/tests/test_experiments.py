import json
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lfplab.errors import ConfigError, NumericalGateError
from lfplab.experiments import (
    RunConfig,
    SweepConfig,
    higher_order_correction,
    run,
    scaling_sweep,
    validate_run_config,
)
from lfplab.experiments.artifacts import (
    METRICS_HEADER,
    MetricsWriter,
    read_metrics,
    read_snapshot,
    write_snapshot,
)
from lfplab.phasespace import build_grid


def base_config(**over):
    cfg = {
        "params": {"h": 2**-4, "gamma": 1.0},
        "grid": {"n_points": 128, "halfwidth": 3.0},
        "hamiltonian": {"coeffs": [[1, 1, 1.0]]},
        "jumps": {"components": [[1, 0, 0], [0, 1, 0]]},
        "initial": {"components": [{"weight": 1.0, "center": [0.3, 0.0], "pure": True}]},
        "time": {"dt": 0.005, "t_final": 0.5, "snapshot_every": 0.25},
    }
    cfg.update(over)
    return cfg


def test_config_rejects_unknown_keys():
    cfg = base_config()
    cfg["surprise"] = 1
    with pytest.raises(Exception):
        RunConfig.model_validate(cfg)
    cfg = base_config()
    cfg["params"]["hbar"] = 1.0
    with pytest.raises(Exception):
        RunConfig.model_validate(cfg)


def test_config_validation_gates():
    cfg = RunConfig.model_validate(base_config())
    warnings = validate_run_config(cfg)
    assert isinstance(warnings, list)

    bad = base_config()
    bad["jumps"] = {"components": [[1, 0, 0]]}  # degenerate
    with pytest.raises(ConfigError):
        validate_run_config(RunConfig.model_validate(bad))

    bad = base_config()
    bad["initial"]["components"][0]["weight"] = 0.5
    with pytest.raises(Exception):
        RunConfig.model_validate(bad)

    bad = base_config()
    bad["solver"] = {"lindblad_method": "eig-closed"}
    with pytest.raises(ConfigError):
        validate_run_config(RunConfig.model_validate(bad))

    bad = base_config()
    bad["thresholds"] = {"memory_cap_mb": 1.0}
    with pytest.raises(ConfigError):
        validate_run_config(RunConfig.model_validate(bad))


# ---------------------------------------------------------------------------
# artifacts


@given(st.integers(0, 10**6), st.sampled_from(["field", "operator"]))
@settings(max_examples=10, deadline=None)
def test_snapshot_roundtrip(tmp_path_factory, seed, kind):
    rng = np.random.default_rng(seed)
    g = build_grid(16, 1.0, 0.5)
    arr = rng.normal(size=(16, 16))
    if kind == "operator":
        arr = arr + 1j * rng.normal(size=(16, 16))
    path = tmp_path_factory.mktemp("snap") / "s.snap"
    write_snapshot(path, kind, 0.5, 1.0, 0.25, g, arr)
    header, back = read_snapshot(path)
    assert header["kind"] == kind
    assert header["grid"] == {"n": 16, "L": 1.0}
    assert header["layout"] == "row-major"
    assert np.array_equal(back, arr.astype(back.dtype))


def test_snapshot_magic_and_header_bytes(tmp_path):
    g = build_grid(16, 1.0, 0.5)
    path = tmp_path / "s.snap"
    write_snapshot(path, "field", 0.5, 1.0, 0.0, g, np.zeros((16, 16)))
    raw = path.read_bytes()
    assert raw[:8] == b"LFPSNP01"
    hlen = int.from_bytes(raw[8:16], "little")
    header = json.loads(raw[16:16 + hlen])
    assert header["dtype"] == "f64le"
    assert len(raw) == 16 + hlen + 16 * 16 * 8


def test_metrics_format(tmp_path):
    w = MetricsWriter()
    w.add(0.0, 1e-3, 2e-3, complex(1.0, 1e-17), 1e-12, -1e-9, 0.39269908169872414, 0.4, 0.5)
    w.add(0.25, 2e-3, 3e-3, complex(1.0, 0.0), 1e-12, -1e-9, 0.39269908169872414, 0.4, 0.5)
    path = tmp_path / "metrics.csv"
    w.write(path)
    text = path.read_text().splitlines()
    assert text[0] == METRICS_HEADER
    assert "0.39269908169872414" in text[1]  # 17 significant digits survive
    back = read_metrics(path)
    assert back["t"].tolist() == [0.0, 0.25]
    with pytest.raises(ValueError):
        w.add(0.2, *([0.0] * 7), 0.0)  # non-increasing t


# ---------------------------------------------------------------------------
# runner


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = RunConfig.model_validate(base_config())
    art = run(cfg, out)
    return cfg, art


def test_run_artifacts_complete(small_run):
    cfg, art = small_run
    assert not art.failed
    assert len(art.times) == 3
    names = {p.name for p in art.out_dir.iterdir()}
    for i in range(3):
        for kind in ("field", "operator", "wigner"):
            assert f"{kind}_{i:04d}.snap" in names
    assert "metrics.csv" in names and "provenance.json" in names


def test_run_initial_consistency(small_run):
    _, art = small_run
    assert art.trace_dists[0] <= 1e-6


def test_run_gates_in_metrics(small_run):
    _, art = small_run
    m = read_metrics(art.metrics_path)
    tr0 = m["trace_re"][0]
    for t, tr, herm, mass, l1 in zip(m["t"], m["trace_re"], m["herm_defect"],
                                     m["mass"], m["l1_norm"]):
        assert abs(tr - tr0) <= 1e-8 * (1 + t)
        assert herm <= 1e-8
        assert abs(mass - m["mass"][0]) <= 1e-8 * (1 + t) * abs(m["mass"][0])
        assert l1 <= m["l1_norm"][0] + 1e-8
    assert np.all(np.diff(m["t"]) > 0)


def test_run_quadratic_floor_flag(small_run):
    _, art = small_run
    prov = json.loads(art.provenance_path.read_text())
    assert prov["quadratic_floor"] is True
    assert prov["failed"] is False


def test_run_determinism(tmp_path):
    cfg = RunConfig.model_validate(base_config())
    a = run(cfg, tmp_path / "a")
    b = run(cfg, tmp_path / "b")
    for i in range(3):
        for kind in ("field", "operator", "wigner"):
            fa = (tmp_path / "a" / f"{kind}_{i:04d}.snap").read_bytes()
            fb = (tmp_path / "b" / f"{kind}_{i:04d}.snap").read_bytes()
            assert fa == fb
    assert (tmp_path / "a" / "metrics.csv").read_bytes() == \
        (tmp_path / "b" / "metrics.csv").read_bytes()


def test_run_failure_marker(tmp_path):
    cfg = base_config()
    cfg["params"]["gamma"] = 0.0
    cfg["initial"]["components"][0]["center"] = [0.8, 0.0]
    cfg["time"] = {"dt": 0.005, "t_final": 2.0, "snapshot_every": 0.25}
    with pytest.raises(NumericalGateError):
        run(RunConfig.model_validate(cfg), tmp_path)
    assert (tmp_path / "failure.json").exists()
    assert (tmp_path / "metrics.csv").exists()  # partial artifacts retained


# ---------------------------------------------------------------------------
# sweep


def test_sweep_quadratic_floor(tmp_path):
    cfg = SweepConfig.model_validate({
        "base": base_config(),
        "h_values": [2**-4, 2**-5],
        "t_eval": 0.5,
    })
    report = scaling_sweep(cfg, tmp_path)
    assert report["h_sweep"]["at_discretization_floor"] is True
    assert "meaningless" in report["h_sweep"]["note"]
    assert (tmp_path / "points.csv").exists()


def test_sweep_octave_guard(tmp_path):
    cfg = SweepConfig.model_validate({
        "base": base_config(),
        "h_values": [2**-4, 2**-4.5, 2**-5, 2**-5.5],
    })
    with pytest.raises(ValueError):
        scaling_sweep(cfg, tmp_path)


# ---------------------------------------------------------------------------
# correction


def test_correction_order1_passthrough(small_run):
    _, art = small_run
    res = higher_order_correction(art.out_dir, order=1)
    assert res["corrected"] == res["uncorrected"]


def test_correction_respects_quadratic_floor(small_run):
    _, art = small_run
    res = higher_order_correction(art.out_dir, order=2)
    assert res["quadratic_floor"] is True
    assert res["corrected"] == res["uncorrected"]


# ---------------------------------------------------------------------------
# CLI


def _cli(*args):
    return subprocess.run([sys.executable, "-m", "lfplab.cli", *args],
                          capture_output=True, text=True)


def test_cli_validate_ok(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(base_config()))
    r = _cli("validate", "--config", str(p))
    assert r.returncode == 0, r.stderr
    assert "valid" in r.stdout


def test_cli_validate_rejects(tmp_path):
    cfg = base_config()
    cfg["grid"]["n_points"] = 100
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    r = _cli("validate", "--config", str(p))
    assert r.returncode == 1


def test_cli_run_and_gate_failure(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(base_config()))
    r = _cli("run", "--config", str(p), "--out", str(tmp_path / "out"), "--threads", "2")
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "out" / "metrics.csv").exists()

    bad = base_config()
    bad["params"]["gamma"] = 0.0
    bad["initial"]["components"][0]["center"] = [0.8, 0.0]
    bad["time"] = {"dt": 0.005, "t_final": 2.0, "snapshot_every": 0.25}
    p2 = tmp_path / "bad.json"
    p2.write_text(json.dumps(bad))
    r = _cli("run", "--config", str(p2), "--out", str(tmp_path / "out2"))
    assert r.returncode == 2


# ---------------------------------------------------------------------------
# service


def test_service_endpoints(tmp_path):
    from fastapi.testclient import TestClient

    from lfplab.service.app import create_app

    app = create_app(workdir=tmp_path, max_workers=1)
    client = TestClient(app)

    r = client.get("/health")
    assert r.status_code == 200 and r.json()["status"] == "ok"

    r = client.post("/validate", json={"config": base_config()})
    assert r.status_code == 200 and r.json()["valid"] is True

    bad = base_config()
    bad["jumps"] = {"components": [[1, 0, 0]]}
    r = client.post("/validate", json={"config": bad})
    assert r.json()["valid"] is False and r.json()["errors"]

    r = client.post("/jobs", json={"kind": "run", "run_config": base_config()})
    assert r.status_code == 200
    job_id = r.json()["job_id"]
    import time

    for _ in range(600):
        st_ = client.get(f"/jobs/{job_id}").json()
        if st_["status"] in ("done", "failed"):
            break
        time.sleep(0.1)
    assert st_["status"] == "done", st_
    assert st_["summary"]["trace_dists"][0] <= 1e-6

    files = client.get(f"/jobs/{job_id}/artifacts").json()["files"]
    assert "metrics.csv" in files
    metrics = client.get(f"/jobs/{job_id}/metrics")
    assert metrics.status_code == 200
    assert metrics.text.splitlines()[0] == METRICS_HEADER
    snap = client.get(f"/jobs/{job_id}/artifacts/field_0000.snap")
    assert snap.status_code == 200 and snap.content[:8] == b"LFPSNP01"

    assert client.get("/jobs/nope").status_code == 404


def test_parametrix_report_heat_row(tmp_path):
    from lfplab.experiments import ParametrixCaseConfig, parametrix_report

    cfg = ParametrixCaseConfig(case="heat", eps_values=[0.25], times=[0.5], n_points=128)
    report = parametrix_report(cfg, tmp_path)
    assert report["ok"]
    row = report["rows"][0]
    assert row["R1_note"] == "identically zero"
    assert row["R1_l1"] <= 1e-6
    assert (tmp_path / "parametrix_heat.csv").exists()


def test_cli_figure1_floor_gives_acceptance_exit(tmp_path):
    """Quadratic figure1: both distances at the floor, ordering gate fails -> exit 3."""
    cfg = base_config()
    cfg["time"] = {"dt": 0.005, "t_final": 0.25, "snapshot_every": 0.25}
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    r = _cli("figure1", "--config", str(p), "--out", str(tmp_path / "f1"))
    assert r.returncode == 3
    assert (tmp_path / "f1" / "figure1_summary.json").exists()


def test_cli_parametrix_check(tmp_path):
    cfg = {"case": "heat", "eps_values": [0.25], "times": [0.5], "n_points": 128}
    p = tmp_path / "pm.json"
    p.write_text(json.dumps(cfg))
    r = _cli("parametrix-check", "--config", str(p), "--out", str(tmp_path / "pm"))
    assert r.returncode == 0, r.stderr


def test_cli_correct_subcommand(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(base_config()))
    r = _cli("run", "--config", str(p), "--out", str(tmp_path / "out"))
    assert r.returncode == 0
    r = _cli("correct", "--run-dir", str(tmp_path / "out"), "--order", "1")
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "out" / "correction.json").exists()


def test_service_parametrix_job(tmp_path):
    import time

    from fastapi.testclient import TestClient

    from lfplab.service.app import create_app

    client = TestClient(create_app(workdir=tmp_path, max_workers=1))
    r = client.post("/jobs", json={
        "kind": "parametrix",
        "parametrix_config": {"case": "heat", "eps_values": [0.25], "times": [0.5], "n_points": 128},
    })
    job_id = r.json()["job_id"]
    for _ in range(600):
        st_ = client.get(f"/jobs/{job_id}").json()
        if st_["status"] in ("done", "failed"):
            break
        time.sleep(0.1)
    assert st_["status"] == "done", st_
    assert st_["summary"]["ok"] is True
