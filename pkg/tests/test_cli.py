import csv
import json
import math
import subprocess
import sys

import pytest

from npl_mmd.cli import OUTPUT_ENV, main, read_config_file, ConfigError

FAST = ["--steps", "5", "--n-resample", "16"]


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_run_writes_one_row_per_draw(tmp_path):
    out = tmp_path / "out"
    code = main(["run", "--model", "gaussian", "--n", "200", "--epsilon", "0.1", "--alpha", "0",
                 "--B", "512", "--seed", "7", "--output", str(out)] + FAST)
    assert code == 0
    rows = _rows(out / "posterior.csv")
    assert rows[0] == ["b", "theta_0", "theta_1", "theta_2", "theta_3", "loss", "seed"]
    assert len(rows) == 1 + 512
    summary = json.loads((out / "summary.json").read_text())
    assert summary["B"] == 512 and summary["n"] == 200 and "nmse" in summary
    assert len(summary["quantiles"]["q50"]) == 4
    config = json.loads((out / "config.json").read_text())
    assert config["T"] == 200 and config["command"] == "run"


def test_rerun_is_byte_identical(tmp_path):
    args = ["run", "--B", "6", "--n", "50", "--seed", "3"] + FAST
    assert main(args + ["--output", str(tmp_path / "a")]) == 0
    assert main(args + ["--output", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a/posterior.csv").read_bytes() == (tmp_path / "b/posterior.csv").read_bytes()


def test_float_format_and_newlines(tmp_path):
    main(["run", "--B", "3", "--n", "30", "--output", str(tmp_path)] + FAST)
    text = (tmp_path / "posterior.csv").read_text()
    assert text.endswith("\n") and "\r" not in text
    for row in _rows(tmp_path / "posterior.csv")[1:]:
        for cell in row[1:-1]:
            assert cell == format(float(cell), ".17g")


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# small run\nmodel = gaussian\nn = 40\nB = 2  # draws\nsteps = 5\n"
                   "n_resample = 16\nseed = 1\n")
    assert main(["run", "--config", str(cfg), "--B", "3", "--output", str(tmp_path / "o")]) == 0
    assert len(_rows(tmp_path / "o/posterior.csv")) == 4
    config = json.loads((tmp_path / "o/config.json").read_text())
    assert config["n"] == 40 and config["B"] == 3


def test_config_errors_name_the_line(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("model = gaussian\nfoo = 1\n")
    assert main(["run", "--config", str(cfg)]) == 2
    assert "bad.cfg:2: unknown key 'foo'" in capsys.readouterr().err
    cfg.write_text("n = 10\nB = many\n")
    assert main(["run", "--config", str(cfg)]) == 2
    assert "bad.cfg:2: bad value for 'B'" in capsys.readouterr().err
    cfg.write_text("just words\n")
    with pytest.raises(ConfigError, match=":1:"):
        read_config_file(cfg)


def test_invalid_values_exit_2(tmp_path):
    assert main(["run", "--model", "lotka", "--output", str(tmp_path)]) == 2
    assert main(["run", "--B", "0", "--output", str(tmp_path)]) == 2
    assert main(["run", "--epsilon", "2", "--output", str(tmp_path)]) == 2
    assert main(["run", "--n", "1", "--output", str(tmp_path)]) == 2
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_runtime_failure_exit_1(tmp_path, capsys):
    blocker = tmp_path / "taken"
    blocker.write_text("not a directory")
    assert main(["run", "--B", "2", "--n", "20", "--output", str(blocker)] + FAST) == 1
    assert "FileExistsError" in capsys.readouterr().err


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    assert main(["run", "--B", "2", "--n", "30"] + FAST) == 0
    assert (tmp_path / "env/posterior.csv").exists()


def test_sweep_three_rows(tmp_path):
    code = main(["sweep", "--parameter", "alpha", "--grid", "0.01,1,100", "--B", "2",
                 "--n", "30", "--output", str(tmp_path)] + FAST)
    assert code == 0
    rows = _rows(tmp_path / "sweep.csv")
    assert rows[0] == ["value", "nmse"] and len(rows) == 4
    assert [float(r[0]) for r in rows[1:]] == [0.01, 1.0, 100.0]


def test_sweep_errors(tmp_path):
    assert main(["sweep", "--parameter", "alpha", "--grid", "", "--output", str(tmp_path)]) == 2
    assert main(["sweep", "--parameter", "alpha", "--output", str(tmp_path)]) == 2
    assert main(["sweep", "--parameter", "beta", "--grid", "1", "--output", str(tmp_path)]) == 2
    assert main(["sweep", "--parameter", "T", "--grid", "2.5", "--output", str(tmp_path)]) == 2


def test_bound_check_file(tmp_path):
    code = main(["bound-check", "--model", "gaussian", "--n-grid", "64,128", "--runs", "2",
                 "--sample-size", "300", "--B", "2", "--output", str(tmp_path)] + FAST)
    assert code == 0
    rows = _rows(tmp_path / "bound.csv")
    assert rows[0] == ["n", "mmd_estimate", "bound_2_over_sqrt_n"]
    assert [r[0] for r in rows[1:]] == ["64", "128"]
    for n, est, bound in rows[1:]:
        assert abs(float(bound) - 2 / math.sqrt(int(n))) <= 1e-12
        assert 0 <= float(est) < math.inf


def test_bound_check_errors(tmp_path):
    assert main(["bound-check", "--n-grid", "1", "--output", str(tmp_path)]) == 2
    assert main(["bound-check", "--runs", "0", "--output", str(tmp_path)]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "npl_mmd", "run", "--B", "2", "--n", "20",
                           "--steps", "3", "--n-resample", "8", "--output", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "summary.json").exists()
