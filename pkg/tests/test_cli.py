import json
import subprocess
import sys

import pytest

from sparsejt import __version__
from sparsejt.cli import main
from sparsejt.harness import CSV_COLUMNS, read_rows

SMALL = ["--n", "8", "--k", "2", "--m", "10", "--sigma-sq", "0.1", "--delta", "0.04", "--trials", "20"]


def test_version(capsys):
    assert main(["version"]) == 0
    assert capsys.readouterr().out.strip() == __version__


def test_simulate_csv(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["simulate", *SMALL, "--out", str(out)]) == 0
    rows = read_rows(out)
    assert [r["metric"] for r in rows] == ["d1", "d2", "d3"]
    assert out.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)


def test_simulate_json_stdout(capsys):
    assert main(["simulate", *SMALL, "--format", "json", "--seed", "5"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert len(rows) == 3 and rows[0]["seed"] == 5


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_grid": [8], "k_grid": [2], "m_grid": [10], "sigma_sq": 0.1,
                               "delta": 0.04, "trials": 10}))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sweep", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["sweep", "--config", str(cfg), "--trials", "12", "--out", str(b)]) == 0
    assert read_rows(a)[0]["trials"] == 10 and read_rows(b)[0]["trials"] == 12


def test_sweep_workers_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["sweep", *SMALL[:-2], "--trials", "30", "--m", "6", "10"]
    assert main([*args, "--workers", "1", "--out", str(a)]) == 0
    assert main([*args, "--workers", "4", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_bounds_json(capsys):
    assert main(["bounds", "--n", "1024", "--k", "16", "--m", "100", "--sigma-sq", "1"]) == 0
    (rec,) = json.loads(capsys.readouterr().out)
    assert rec["converse"]["gaussian"]["single_user_term"] == 12.0
    assert rec["interpretation"]["c0"].startswith("unquantified")


def test_verify_concentration(capsys):
    argv = ["verify-concentration", "--n", "10", "--k", "2", "--m", "30", "--sigma-sq", "1",
            "--trials", "2000", "--normalization", "raw", "--overlap", "1"]
    assert main(argv) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["meta"]["overlap"] == 1 and rep["gamma1"] == 28
    assert rep["g_identity"]["max_g_error"] < 1e-8


def test_parameter_errors(capsys):
    assert main(["simulate", "--k", "5", "--m", "3"]) == 2
    assert main(["simulate", "--mode", "strict", "--alpha", "1.5"]) == 2
    assert main(["verify-concentration", "--overlap", "9"]) == 2
    assert "parameter error" in capsys.readouterr().err


def test_bad_config_is_parameter_error(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["sweep", "--config", str(p)]) == 2


def test_budget_errors(tmp_path):
    assert main(["simulate", "--n", "40", "--k", "8", "--m", "10", "--max-subsets", "100"]) == 3
    out = tmp_path / "partial.csv"
    code = main(["sweep", *SMALL, "--n", "8", "40", "--max-subsets", "500", "--out", str(out)])
    assert code == 3
    assert {r["n"] for r in read_rows(out)} == {8}


def test_io_errors(tmp_path):
    assert main(["simulate", *SMALL, "--out", str(tmp_path / "nope" / "x.csv")]) == 4
    assert main(["sweep", "--config", str(tmp_path / "absent.json")]) == 4


def test_unknown_subcommand_exits_two():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sparsejt.cli", "version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == __version__
