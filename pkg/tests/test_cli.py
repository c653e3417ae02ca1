import csv
import subprocess
import sys

import numpy as np

from tailvi.cli import main
from tailvi.experiment import CSV_COLUMNS, SUMMARY_COLUMNS


def _small_args(out):
    return ["gmm", "--dim", "2", "--scale", "1", "--batch", "16", "--iters", "10", "--eval-every", "5",
            "--trials", "2", "--target-components", "2", "--proposal-components", "3",
            "--eval-samples", "200", "--out", str(out)]


def test_gmm_writes_both_tables(tmp_path, capsys):
    out = tmp_path / "res.csv"
    assert main(_small_args(out) + ["--spec", "tail-adaptive:-1", "--spec", "alpha:0.5"]) == 0
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 1 + 2 * 2 * 3
    assert {r[1] for r in rows[1:]} == {"tail-adaptive:-1", "alpha:0.5"}
    with open(tmp_path / "res_summary.csv") as fh:
        summary = list(csv.reader(fh))
    assert tuple(summary[0]) == SUMMARY_COLUMNS and len(summary) == 3
    assert "wrote 12 rows" in capsys.readouterr().out


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("dim = 3\niters = 10\neval_every = 10\nspec = kl-forward\ntrials = 5\n")
    out = tmp_path / "o.csv"
    args = ["gmm", "--config", str(cfg), "--trials", "1", "--batch", "8", "--eval-samples", "100",
            "--target-components", "2", "--proposal-components", "2", "--out", str(out)]
    assert main(args) == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert {r["trial"] for r in rows} == {"0"}
    assert {r["spec"] for r in rows} == {"kl-forward"}
    assert [r["iteration"] for r in rows] == ["0", "10"]


def test_gmm_rejects_bad_spec(tmp_path, capsys):
    assert main(_small_args(tmp_path / "x.csv") + ["--spec", "alpha:nope"]) == 2
    assert "error" in capsys.readouterr().err


def test_gmm_reports_unwritable_path(tmp_path, capsys):
    (tmp_path / "f").write_text("")
    assert main(_small_args(tmp_path / "f" / "x.csv")) == 2
    assert "x.csv" in capsys.readouterr().err


def test_tail_gaussian(capsys):
    assert main(["tail", "--gaussian", "2", "1", "-n", "20000", "--moment", "1"]) == 0
    out = capsys.readouterr().out
    assert "k = 380" in out
    assert "analytic tail index = 1.33333" in out
    hill = float(out.split("hill tail index = ")[1].split()[0])
    assert 1.0 < hill < 2.0


def test_tail_file(tmp_path, capsys):
    path = tmp_path / "lw.txt"
    np.savetxt(path, [4.0, 0.0, 2.0, 1.0])
    assert main(["tail", str(path), "-k", "2"]) == 0
    assert "hill tail index = 0.5" in capsys.readouterr().out


def test_tail_missing_file(tmp_path, capsys):
    assert main(["tail", str(tmp_path / "none.txt")]) == 2


def test_validate_subprocess():
    res = subprocess.run([sys.executable, "-m", "tailvi", "validate"], capture_output=True, text=True)
    assert res.returncode == 0, res.stdout + res.stderr
    lines = res.stdout.strip().splitlines()
    assert lines and all(line.startswith("[PASS]") for line in lines)
