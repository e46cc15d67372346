import json
import subprocess
import sys

import pytest

from dsrl.cli import main
from dsrl.harness import presets, read_csv


def run_cli(*args, env=None):
    return subprocess.run([sys.executable, "-m", "dsrl", *args], capture_output=True, text=True, env=env)


@pytest.fixture
def small_config(tmp_path):
    doc = presets()["fig1_outliers"].to_dict()
    doc.update(trials=2, iterations=100, curve_stride=50, name="tiny")
    doc["scenario"]["sweep"] = {"values": [0.2, 0.6]}
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(doc))
    return path


def test_missing_config_exits_nonzero(tmp_path):
    proc = run_cli("sweep", "--config", str(tmp_path / "missing.file"))
    assert proc.returncode != 0
    assert "config not found" in proc.stderr


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code != 0
    with pytest.raises(SystemExit):
        main(["simulate", "--preset", "nope"])
    assert main(["sweep"]) == 2


def test_invalid_config_reports_field(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"trials": 5, "colour": "red"}))
    assert main(["sweep", "--config", str(path)]) == 2
    assert "colour" in capsys.readouterr().err


def test_strict_schedule_rejects_published_values(small_config, capsys):
    assert main(["sweep", "--config", str(small_config), "--strict-schedule"]) == 2
    assert "schedule" in capsys.readouterr().err


def test_presets_listing(tmp_path, capsys):
    assert main(["presets", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    for name in ("fig1_outliers", "fig2_laplace", "fig3_cauchy"):
        line = next(l for l in out.splitlines() if l.startswith(name))
        assert "L=31" in line and "radius=1.75" in line and "trials=1000" in line
        assert "alpha=0.3/k^0.55" in line and "beta=3.5/k^0.5" in line
        assert (tmp_path / f"{name}.json").is_file()


def test_simulate_is_byte_identical(tmp_path):
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["simulate", "--seed", "7", "--preset", "fig1_outliers", "--value", "0.3",
                     "--iters", "200", "--wide", "--cadence", "100", "--out", str(out)]) == 0
        outs.append(out)
    for name in ("trace.csv", "instance.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    rows = read_csv(outs[0] / "trace.csv")
    assert {r["solver"] for r in rows} == {"dsrl", "l1", "l2"}
    assert len(rows) == 3 * 201
    header = (outs[0] / "trace.csv").read_text().splitlines()[0]
    prov = json.loads(header[2:])
    assert prov["seed"] == 7 and prov["sweep_value"] == 0.3


def test_sweep_cli_writes_outputs(small_config, tmp_path, capsys):
    out = tmp_path / "res"
    assert main(["sweep", "--config", str(small_config), "--out", str(out), "--solvers", "dsrl,l2"]) == 0
    rows = read_csv(out / "sweep.csv")
    assert [(r["sweep_value"], r["solver"]) for r in rows] == [
        ("0.2", "dsrl"), ("0.2", "l2"), ("0.6", "dsrl"), ("0.6", "l2")]
    assert all(r["trials_ok"] == "2" for r in rows)
    assert "p=0.2 dsrl" in capsys.readouterr().out


def test_sweep_byte_identical_across_thread_settings(small_config, tmp_path):
    import os
    outs = []
    for threads in ("1", "0", "2"):
        out = tmp_path / f"t{threads}"
        env = dict(os.environ, DSRL_THREADS=threads)
        proc = run_cli("sweep", "--config", str(small_config), "--out", str(out), "--seed", "11", env=env)
        assert proc.returncode == 0, proc.stderr
        outs.append(out)
    for name in ("sweep.csv", "trials.csv", "curves.csv", "sweep.meta.json"):
        blobs = {(o / name).read_bytes() for o in outs}
        assert len(blobs) == 1, name


def test_validate_passes(capsys):
    assert main(["validate"]) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 4
