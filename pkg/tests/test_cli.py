import json
import subprocess
import sys
from pathlib import Path

import pytest

from nctorus import __version__
from nctorus.cli import main


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def load(tmp_path, name):
    return json.loads((Path(tmp_path) / f"{name}.json").read_text())


def test_cf_example(tmp_path):
    assert run(tmp_path, "cf", "--theta", "golden", "--depth", "2") == 0
    out = load(tmp_path, "cf")
    assert [int(q) for q in out["results"]["q"]] == [3, 5, 21, 34]
    assert out["version"] == __version__
    assert out["config"]["theta"] == "golden" and out["passed"]


def test_proj_example(tmp_path, golden1):
    assert run(tmp_path, "proj", "--theta", "golden", "--level", "1",
               "--modes", "256", "--window", "512") == 0
    res = load(tmp_path, "proj")["results"]
    assert abs(float(res["e_beta"]["trace"]) - float(golden1.beta)) < 1e-10


def test_embed_example(tmp_path):
    assert run(tmp_path, "embed", "--theta", "golden", "--level", "1",
               "--samples", "20", "--seed", "7") == 0
    res = load(tmp_path, "embed")["results"]
    assert res["trace_pullback"]["matrix"] == [["5", "3"], ["3", "2"]]
    assert res["trace_pullback"]["det"] == "1"


def test_bump_outputs(tmp_path):
    assert run(tmp_path, "bump", "--theta", "silver", "--level", "1", "--mode", "corrected") == 0
    assert (tmp_path / "bump_samples.csv").read_text().startswith("x,f,g")
    assert (tmp_path / "bump_report.csv").exists()


def test_cohom_and_report(tmp_path):
    assert run(tmp_path, "cohom") == 0
    res = load(tmp_path, "cohom")["results"]
    assert res["hp"]["M2"] == {"even": "1", "odd": "0"}
    assert run(tmp_path, "report") == 0
    summary = load(tmp_path, "summary")
    assert "cohom" in summary["results"]["artifacts"]


def test_usage_errors_exit_two(tmp_path):
    assert main(["nonsense"]) == 2
    assert run(tmp_path, "proj", "--modes", "-3") == 2
    assert run(tmp_path, "proj", "--tol", "proj.trace=1e-30") == 2
    assert run(tmp_path, "cf", "--theta", "not-a-number") == 2


def test_tolerance_failure_exit_one(tmp_path, capsys):
    assert run(tmp_path, "proj", "--modes", "16", "--window", "128") == 1
    err = capsys.readouterr().err
    assert "proj.idempotent" in err or "idempotent" in err
    assert not load(tmp_path, "proj")["passed"]


def test_library_error_exit_one(tmp_path):
    assert run(tmp_path, "cf", "--theta", "0.375", "--depth", "2") == 1


def test_config_file_env_and_flags(tmp_path, monkeypatch):
    monkeypatch.setenv("NCT_PRECISION_BITS", "160")
    assert run(tmp_path, "cf", "--depth", "1") == 0
    assert load(tmp_path, "cf")["config"]["precision_bits"] == "160"
    conf = tmp_path / "run.conf"
    conf.write_text("# comment\ntheta = silver\nprecision = 192\ndepth=1\n")
    assert run(tmp_path, "cf", "--config", str(conf)) == 0
    cfg = load(tmp_path, "cf")["config"]
    assert cfg["theta"] == "silver" and cfg["precision_bits"] == "192"
    assert run(tmp_path, "cf", "--config", str(conf), "--precision-bits", "224") == 0
    assert load(tmp_path, "cf")["config"]["precision_bits"] == "224"


@pytest.mark.parametrize("argv", [("cf", "--depth", "2"), ("bump",), ("embed", "--seed", "3"),
                                  ("cohom",), ("proj",)])
def test_byte_identical_reruns(tmp_path, argv):
    assert run(tmp_path, *argv) == 0
    first = {p.name: p.read_bytes() for p in sorted(tmp_path.iterdir())}
    assert run(tmp_path, *argv) == 0
    second = {p.name: p.read_bytes() for p in sorted(tmp_path.iterdir())}
    assert first == second


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "nctorus.cli", "cf", "--depth", "1",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert load(tmp_path, "cf")["command"] == "cf"
