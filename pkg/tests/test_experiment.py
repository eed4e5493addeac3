import numpy as np
import pytest

from onebit_gc.errors import ConfigParseError
from onebit_gc.experiment import (
    BOUNDS_HEADER,
    SUMMARY_HEADER,
    TRACE_HEADER,
    RunRecord,
    parse_bounds_config,
    parse_config,
    read_trace,
    run_bounds,
    run_experiment,
    step_value,
    summarize,
)
from onebit_gc.idx import write_idx
from onebit_gc.quantization import Method
from onebit_gc.simulation import FixedGamma, InverseLambdaT, TraceRow

SMALL = """
# tiny synthetic run
dataset = synthetic-regression
methods = onebit-gc, sgc
m = 30
feature_dim = 4
feature_std = 1
noise_std = 0.1
n = 6
d = 2
p = 0.2
schedule = fixed
gamma = 0.005
T = 20
seeds = 0,1
"""


def test_sec5a_preset_expansion():
    cfg = parse_config('preset = "sec5a"')
    assert (cfg.m, cfg.n, cfg.p, cfg.feature_dim) == (1000, 100, 0.1, 100)
    assert list(cfg.spec().d) == [20] * 1000
    assert cfg.make_schedule(10) == InverseLambdaT(1e5)
    assert cfg.iterations(Method.ONE_BIT_GC, 100) == 328000 // 164
    assert cfg.iterations(Method.SGC, 100) == 328000 // 6400
    assert cfg.methods == [Method.ONE_BIT_GC, Method.SGC, Method.IGNORE_STRAGGLERS_1BIT]


def test_sec5c_preset_and_overrides():
    cfg = parse_config("preset = sec5c-mnist\nidx_images = a\nidx_labels = b\np = 0.2\nd = 1,3")
    assert (cfg.n, cfg.m, cfg.p, cfg.class_a, cfg.class_b) == (10, 100, 0.2, 0, 2)
    assert cfg.make_schedule(1) == InverseLambdaT(1000.0)
    assert list(cfg.spec().d) == [1] * 50 + [3] * 50


def test_preset_rosenbrock():
    cfg = parse_config("preset = sec5b")
    assert cfg.dataset == "rosenbrock" and cfg.make_schedule(5) == FixedGamma(1e-5)


@pytest.mark.parametrize(
    "text, needle",
    [
        ("", "required keys"),
        ("preset = nope", "line 1"),
        (SMALL + "p = 0.3\n", "duplicate"),
        (SMALL + "colour = red\n", "unknown key"),
        (SMALL.replace("p = 0.2", "p = 1.0"), "line 11: p"),
        (SMALL.replace("d = 2", "d = 7"), "d:"),
        (SMALL.replace("m = 30", "m = 3.5"), "integer"),
        (SMALL.replace("gamma = 0.005", "gamma = fast"), "gamma"),
        (SMALL.replace("T = 20", "max_bits = 100\nT = 20"), "either T or max_bits"),
        (SMALL.replace("methods = onebit-gc, sgc", "methods = qsgd"), "unknown method"),
        (SMALL.replace("seeds = 0,1", "seeds = a"), "seeds"),
        (SMALL + "just some words\n", "key = value"),
        (SMALL.replace("schedule = fixed", "schedule = decaying").replace("gamma = 0.005", "S = 10\ngamma0 = 0.1"), "gamma0"),
    ],
)
def test_config_errors(text, needle):
    with pytest.raises(ConfigParseError, match=needle):
        parse_config(text)


def test_missing_keys_are_listed():
    with pytest.raises(ConfigParseError) as info:
        parse_config("dataset = rosenbrock\n")
    for key in ("methods", "seeds", "T or max_bits"):
        assert key in str(info.value)


def test_run_writes_traces_summary_and_runs(tmp_path):
    result = run_experiment(parse_config(SMALL), tmp_path, log=None)
    assert result.exit_code == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["runs.csv", "summary.csv", "trace_onebit-gc_seed0.csv", "trace_onebit-gc_seed1.csv",
                     "trace_sgc_seed0.csv", "trace_sgc_seed1.csv"]
    text = (tmp_path / "trace_sgc_seed1.csv").read_bytes().decode("utf-8")
    assert text.splitlines()[0] == ",".join(TRACE_HEADER)
    assert "\r" not in text
    rows = read_trace(tmp_path / "trace_sgc_seed1.csv")
    assert len(rows) == 21 and rows[-1]["cumulative_bits"] == str(20 * 4 * 64)
    assert rows[0]["loss"].count("e") == 1 and "." in rows[0]["loss"]
    summary = (tmp_path / "summary.csv").read_text().splitlines()
    assert summary[0] == ",".join(SUMMARY_HEADER)
    # both methods stop at 20 iterations, so the grid ends at the 1-bit total
    assert summary[-1].split(",")[1] == str(20 * (4 + 64))


def test_identical_seeds_give_identical_bytes(tmp_path):
    cfg = parse_config(SMALL)
    run_experiment(cfg, tmp_path / "a", log=None)
    run_experiment(cfg, tmp_path / "b", log=None)
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_idx_dataset_has_empty_param_error(tmp_path):
    rng = np.random.default_rng(0)
    labels = np.repeat(np.arange(3, dtype=np.uint8), 8)
    write_idx(tmp_path / "i", rng.integers(0, 256, (24, 3, 3), dtype=np.uint8))
    write_idx(tmp_path / "l", labels)
    text = (f"dataset = idx\nidx_images = {tmp_path / 'i'}\nidx_labels = {tmp_path / 'l'}\nclass_a = 0\n"
            "class_b = 2\nm = 10\nn = 4\nd = 2\np = 0.1\nmethods = onebit-gc\nschedule = inverse-t\n"
            "lambda = 1000\nT = 5\nseeds = 3\n")
    run_experiment(parse_config(text), tmp_path / "out", log=None)
    rows = read_trace(tmp_path / "out" / "trace_onebit-gc_seed3.csv")
    assert all(r["param_error"] == "" for r in rows)


def test_rosenbrock_preset_flags_ignore_stragglers_as_divergent(tmp_path):
    cfg = parse_config("preset = sec5b\nmethods = onebit-gc, ignore-stragglers\nseeds = 0\nmax_bits = 53250\n")
    result = run_experiment(cfg, tmp_path, log=None)
    by_method = {r.method: r for r in result.records}
    assert by_method[Method.IGNORE_STRAGGLERS_1BIT].diverged
    assert not by_method[Method.ONE_BIT_GC].diverged
    assert by_method[Method.ONE_BIT_GC].rows[-1].t == 50
    assert result.exit_code == 1
    runs = (tmp_path / "runs.csv").read_text().splitlines()
    assert runs[0] == "method,seed,iterations,final_bits,diverged,diverged_at"
    assert runs[2].startswith("ignore-stragglers,0,") and ",1," in runs[2]
    allowed = parse_config("preset = sec5b\nmethods = ignore-stragglers\nseeds = 0\nT = 20\nallow_divergence = true\n")
    assert run_experiment(allowed, tmp_path / "b", log=None).exit_code == 0


def row(t, bits, loss):
    return TraceRow(t, bits, loss, float(np.sqrt(2 * loss)), None, 0.0)


def test_summary_step_alignment_never_extrapolates():
    a = RunRecord(Method.ONE_BIT_GC, 0, [row(0, 0, 8.0), row(1, 10, 2.0), row(2, 20, 0.5)])
    b = RunRecord(Method.ONE_BIT_GC, 1, [row(0, 0, 4.0), row(1, 10, 4.0)])
    c = RunRecord(Method.SGC, 0, [row(0, 0, 8.0), row(1, 15, 1.0)])
    assert step_value(a.rows, 14, "loss") == 2.0
    assert step_value(a.rows, 20, "loss") == 0.5
    out = summarize([a, b, c], checkpoints=3)
    assert [r["checkpoint_bits"] for r in out] == [0, 5, 10] * 2
    assert out[2]["loss_mean"] == 3.0 and out[2]["n_runs"] == 2
    assert out[5]["loss_mean"] == 8.0
    assert out[0]["param_error_mean"] is None


def test_bounds_config_and_sweep(tmp_path):
    params, spec, Ts, out = parse_bounds_config("C = 2\nlambda = 3\nm = 10\nn = 5\nw = 4\np = 0.1\nD = 2\nT = 100, 10000\nd = 2\n")
    assert Ts == [100, 10000] and out == "bounds.csv" and list(spec.d) == [2] * 10
    rows = run_bounds(params, spec, Ts, tmp_path / "b.csv")
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == ",".join(BOUNDS_HEADER) and len(lines) == 1 + len(rows) == 8
    with pytest.raises(ConfigParseError, match="lambda"):
        parse_bounds_config("C = 2\nlambda = 0\nm = 10\nn = 5\nw = 4\np = 0.1\nT = 100\n")
    with pytest.raises(ConfigParseError, match="T"):
        parse_bounds_config("C = 2\nS = 100\ngamma0 = 0.001\nm = 10\nn = 5\nw = 4\np = 0.1\nT = 3\n")
