import subprocess
import sys

import pytest

from onebit_gc.cli import main

CONFIG = """dataset = rosenbrock
methods = onebit-gc
m = 5
n = 4
d = 2
p = 0.25
schedule = fixed
gamma = 0.0001
T = 10
seeds = 0, 1
"""


def test_run_and_seed_override(tmp_path, capsys):
    cfg = tmp_path / "c.txt"
    cfg.write_text(CONFIG)
    assert main(["run", str(cfg), "--out", str(tmp_path / "o"), "--seed", "7"]) == 0
    assert sorted(p.name for p in (tmp_path / "o").iterdir()) == ["runs.csv", "summary.csv", "trace_onebit-gc_seed7.csv"]
    assert "seed=7" in capsys.readouterr().out
    assert main(["run", str(cfg), "--out", str(tmp_path / "q"), "--quiet"]) == 0
    assert capsys.readouterr().out == ""


def test_missing_config_is_a_usage_error(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["run", str(tmp_path / "absent.txt")])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.txt"
    cfg.write_text(CONFIG.replace("p = 0.25", "p = 1.5"))
    assert main(["run", str(cfg)]) == 2
    assert "line 6" in capsys.readouterr().err


def test_divergence_exit_code(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text(CONFIG.replace("gamma = 0.0001", "gamma = 10"))
    assert main(["run", str(cfg), "--out", str(tmp_path / "o"), "--quiet"]) == 1


def test_missing_idx_file_is_a_runtime_error(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("dataset = idx\nidx_images = nowhere\nidx_labels = nowhere\nclass_a = 0\nclass_b = 1\n"
                   "m = 5\nn = 2\nd = 1\np = 0\nmethods = sgc\nschedule = fixed\ngamma = 0.1\nT = 1\nseeds = 0\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 1


def test_bounds_names_the_bad_field(tmp_path, capsys):
    cfg = tmp_path / "b.txt"
    cfg.write_text("C = 1\nlambda = -1\nm = 10\nn = 5\nw = 3\np = 0.1\nT = 100\nd = 2\n")
    assert main(["bounds", str(cfg)]) == 2
    assert "lambda" in capsys.readouterr().err
    cfg.write_text("C = 1\nlambda = 1\nm = 10\nn = 5\nw = 3\np = 0.1\nT = 100\nd = 2\n")
    assert main(["bounds", str(cfg), "--out", str(tmp_path / "b.csv")]) == 0
    assert (tmp_path / "b.csv").read_text().startswith("bound,C,lambda")


def test_verify_passes_via_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "onebit_gc", "verify"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    lines = proc.stdout.strip().splitlines()
    assert len(lines) == 7 and all(line.startswith("PASS") for line in lines)
