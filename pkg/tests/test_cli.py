import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from iscm import cli


def write_cfg(tmp_path, **kw):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(kw))
    return str(p)


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_generate_single_chain(tmp_path):
    cfg = write_cfg(tmp_path, kind="generate", graph="chain", d=10, regimes=["iscm"], replicates=1)
    out = tmp_path / "o"
    assert cli.main(["generate", "--config", cfg, "--seed", "3", "--out", str(out)]) == 0
    X = np.loadtxt(out / "iscm_rep0000.csv", delimiter=",", skiprows=1)
    assert X.shape == (1000, 10)
    side = json.loads((out / "iscm_rep0000.json").read_text())
    assert side["seed"] == 3 and side["n"] == 1000 and side["regime"] == "iscm"


def test_generate_is_byte_identical_and_names_replicates(tmp_path):
    cfg = write_cfg(tmp_path, graph="er", d=8, regimes=["raw", "iscm"], n=50)
    runs = []
    for name, workers in (("a", "1"), ("b", "2")):
        out = tmp_path / name
        assert cli.main(["generate", "--config", cfg, "--seed", "11", "--replicates", "20",
                         "--workers", workers, "--out", str(out)]) == 0
        runs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert runs[0] == runs[1]
    assert sorted(n for n in runs[0] if n.startswith("iscm") and n.endswith(".csv")) == \
        [f"iscm_rep{r:04d}.csv" for r in range(20)]


def test_chain_corr_two_nodes(tmp_path):
    assert cli.main(["chain-corr", "--seed", "0", "--out", str(tmp_path), "--replicates", "200"]) == 0
    cfg = write_cfg(tmp_path, d=2)
    out = tmp_path / "two"
    assert cli.main(["chain-corr", "--config", cfg, "--seed", "0", "--out", str(out), "--replicates", "200"]) == 0
    rows = read_rows(out / "chain_corr.csv")
    assert len(rows) == 1 and rows[0]["standardized"] == rows[0]["iscm"]


def test_validation_errors_exit_1(tmp_path, capsys):
    assert cli.main(["sortability", "--out", str(tmp_path)]) == 1  # no seed
    bad = write_cfg(tmp_path, kind="sortability", graph="ring")
    assert cli.main(["sortability", "--config", bad, "--seed", "0"]) == 1
    other = write_cfg(tmp_path, kind="benchmark")
    assert cli.main(["sortability", "--config", other, "--seed", "0"]) == 1
    unknown = write_cfg(tmp_path, colour="blue")
    assert cli.main(["sortability", "--config", unknown, "--seed", "0"]) == 1
    assert cli.main(["sortability", "--config", str(tmp_path / "missing.json"), "--seed", "0"]) == 1
    with pytest.raises(SystemExit) as e:
        cli.main(["verify", "nope", "--seed", "0"])
    assert e.value.code == 1
    assert "invalid configuration" in capsys.readouterr().err


def test_verify_pass_and_fail(tmp_path, monkeypatch):
    assert cli.main(["verify", "theorem1", "--seed", "0", "--replicates", "50", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "verify_theorem1.json").read_text())
    assert report["passed"] and report["failures"] == 0 and len(report["cases"]) == 50

    def broken(seed, cases=None):
        return [{"case": 0, "passed": False}]

    monkeypatch.setitem(cli.ex.SUITES, "theorem1", broken)
    assert cli.main(["verify", "theorem1", "--seed", "0", "--out", str(tmp_path)]) == 3


def test_runtime_failure_exit_2(tmp_path, monkeypatch):
    def boom(cfg):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr(cli.ex, "run_noise_transfer", boom)
    assert cli.main(["noise-transfer", "--seed", "0", "--out", str(tmp_path)]) == 2


def test_sortability_small_run(tmp_path):
    cfg = write_cfg(tmp_path, graph="er", d=10, regimes=["raw", "standardized", "iscm"], replicates=5, n=200)
    assert cli.main(["sortability", "--config", cfg, "--seed", "1", "--out", str(tmp_path)]) == 0
    summary = read_rows(tmp_path / "sortability.csv")
    assert {r["regime"] for r in summary} == {"raw", "standardized", "iscm"}
    assert len(read_rows(tmp_path / "sortability_replicates.csv")) == 15


def test_console_script_module_entry(tmp_path):
    res = subprocess.run([sys.executable, "-m", "iscm.cli", "verify", "trek", "--seed", "0",
                          "--replicates", "5", "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert "trek: PASS" in res.stdout
