"""Experiment configs, presets, trace files and multi-seed summaries.

Config files are UTF-8 ``key = value`` lines; ``#`` starts a comment and
values may be quoted.  A ``preset`` line fills in defaults that later keys
override.  Keys:

=================  =========================================================
preset             sec5a | sec5b | sec5c-mnist | sec5c-fashion
dataset            synthetic-regression | rosenbrock | idx
methods            comma list of onebit-gc, sgc, ignore-stragglers
m                  number of samples (the subset size for idx)
n, p               workers, straggler probability (0 <= p < 1)
d                  redundancy: ``15`` for all samples, or ``10,20`` for
                   the first half / second half
zeta               bits per transmitted real scalar (default 64)
schedule           inverse-t (key lambda) | fixed (gamma) |
                   constant (S; horizon = iterations) | decaying (S, gamma0)
T / max_bits       iterations, or a bit budget giving floor(max_bits / rho)
                   iterations per method
seeds              comma list of run seeds
data_seed          seed for synthetic data / idx subset (default 0)
feature_dim, feature_std, noise_std       synthetic-regression only
idx_images, idx_labels, class_a, class_b  idx only
out                output directory (default ``out``)
allow_divergence   true | false (default false)
checkpoints        summary grid size (default 101)
=================  =========================================================
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distribution import RedundancySpec
from .errors import ConfigParseError, DivergenceError, InvalidConfigError
from .idx import load_idx_subset
from .losses import LossKind, LossModel, generate_regression_data, rosenbrock_dataset
from .quantization import BitBudget, Method, payload_bits
from .simulation import (
    ConstantRate,
    DecayingRate,
    FixedGamma,
    InverseLambdaT,
    SimConfig,
    TraceRow,
    run,
)
from .theory import TheoryParams, bound_sweep

TRACE_HEADER = ["method", "seed", "t", "cumulative_bits", "loss", "sqrt_two_loss", "param_error", "grad_norm_sq"]

PRESETS = {
    "sec5a": {
        "dataset": "synthetic-regression", "m": "1000", "feature_dim": "100",
        "feature_std": "10", "noise_std": "1", "n": "100", "d": "20", "p": "0.1",
        "schedule": "inverse-t", "lambda": "100000", "zeta": "64",
        "methods": "onebit-gc,sgc,ignore-stragglers", "max_bits": "328000",
        "seeds": "0,1,2,3,4",
    },
    "sec5b": {
        "dataset": "rosenbrock", "m": "1000", "n": "100", "d": "10", "p": "0.1",
        "schedule": "fixed", "gamma": "0.00001", "zeta": "64",
        "methods": "onebit-gc,sgc,ignore-stragglers", "max_bits": "1640000",
        "seeds": "0,1,2,3,4",
    },
    "sec5c-mnist": {
        "dataset": "idx", "class_a": "0", "class_b": "2", "m": "100", "n": "10",
        "d": "2", "p": "0.1", "schedule": "inverse-t", "lambda": "1000", "zeta": "64",
        "methods": "onebit-gc,sgc,ignore-stragglers", "max_bits": "1640000",
        "seeds": "0,1,2,3,4",
    },
    "sec5c-fashion": {
        "dataset": "idx", "class_a": "0", "class_b": "1", "m": "100", "n": "10",
        "d": "2", "p": "0.1", "schedule": "inverse-t", "lambda": "1000", "zeta": "64",
        "methods": "onebit-gc,sgc,ignore-stragglers", "max_bits": "1640000",
        "seeds": "0,1,2,3,4",
    },
}

_EXPERIMENT_KEYS = {
    "preset", "dataset", "methods", "m", "n", "p", "d", "zeta", "schedule", "lambda",
    "gamma", "S", "gamma0", "T", "max_bits", "seeds", "data_seed", "feature_dim",
    "feature_std", "noise_std", "idx_images", "idx_labels", "class_a", "class_b",
    "out", "allow_divergence", "checkpoints",
}
_REQUIRED = ["dataset", "methods", "m", "n", "p", "d", "schedule", "seeds", "T or max_bits"]
_SCHEDULE_KEYS = {"inverse-t": ["lambda"], "fixed": ["gamma"], "constant": ["S"], "decaying": ["S", "gamma0"]}
_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")


def _parse_lines(text: str, allowed: set) -> tuple[dict, dict]:
    values, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        match = _LINE.match(line)
        if not match:
            raise ConfigParseError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = match.groups()
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        if key not in allowed:
            raise ConfigParseError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigParseError(f"duplicate key {key!r}", lineno)
        values[key], lines[key] = value, lineno
    return values, lines


class _Reader:
    """Typed access to parsed values; errors carry the key's line number."""

    def __init__(self, values: dict, lines: dict):
        self.values, self.lines = values, lines

    def error(self, key: str, message: str) -> ConfigParseError:
        return ConfigParseError(f"{key}: {message}", self.lines.get(key))

    def has(self, key: str) -> bool:
        return key in self.values

    def str(self, key: str, default=None) -> str:
        if key not in self.values:
            if default is None:
                raise self.error(key, "missing required key")
            return default
        return self.values[key]

    def num(self, key: str, kind=float, default=None):
        if key not in self.values and default is not None:
            return default
        raw = self.str(key)
        try:
            value = kind(float(raw)) if kind is int and re.fullmatch(r"[0-9.eE+-]+", raw) else kind(raw)
        except ValueError:
            raise self.error(key, f"invalid {kind.__name__} {raw!r}") from None
        if kind is int and float(raw) != value:
            raise self.error(key, f"expected an integer, got {raw!r}")
        if kind is float and not math.isfinite(value):
            raise self.error(key, "must be finite")
        return value

    def int_list(self, key: str) -> list[int]:
        try:
            items = [int(tok) for tok in self.str(key).split(",") if tok.strip()]
        except ValueError:
            raise self.error(key, "expected a comma-separated list of integers") from None
        if not items:
            raise self.error(key, "empty list")
        return items


@dataclass
class ExperimentConfig:
    dataset: str
    methods: list
    m: int
    n: int
    p: float
    d_low: int
    d_high: int
    schedule: str
    schedule_params: dict
    seeds: list
    T: int | None = None
    max_bits: int | None = None
    zeta: int = 64
    data_seed: int = 0
    feature_dim: int = 100
    feature_std: float = 10.0
    noise_std: float = 1.0
    idx_images: str | None = None
    idx_labels: str | None = None
    class_a: int = 0
    class_b: int = 2
    out: str = "out"
    allow_divergence: bool = False
    checkpoints: int = 101
    preset: str | None = None
    lines: dict = field(default_factory=dict, repr=False)

    def spec(self) -> RedundancySpec:
        if self.d_low == self.d_high:
            return RedundancySpec.homogeneous(self.m, self.d_low)
        return RedundancySpec.two_level(self.m, self.d_low, self.d_high)

    def iterations(self, method: Method, w: int) -> int:
        if self.T is not None:
            return self.T
        return self.max_bits // payload_bits(method, BitBudget(w, self.zeta))

    def make_schedule(self, iterations: int):
        sp = self.schedule_params
        if self.schedule == "inverse-t":
            return InverseLambdaT(sp["lambda"])
        if self.schedule == "fixed":
            return FixedGamma(sp["gamma"])
        if self.schedule == "constant":
            return ConstantRate(sp["S"], iterations)
        return DecayingRate(sp["S"], sp["gamma0"])


def parse_config(text: str) -> ExperimentConfig:
    values, lines = _parse_lines(text, _EXPERIMENT_KEYS)
    if not values:
        raise ConfigParseError("empty config; required keys: " + ", ".join(_REQUIRED))
    if "preset" in values:
        preset = values["preset"]
        if preset not in PRESETS:
            raise ConfigParseError(f"preset: unknown preset {preset!r}", lines["preset"])
        defaults = dict(PRESETS[preset])
        if "T" in values or "max_bits" in values:
            # an explicit run length replaces the preset's, whichever form it takes
            defaults.pop("T", None)
            defaults.pop("max_bits", None)
        values = {**defaults, **values}
    r = _Reader(values, lines)
    missing = [k for k in _REQUIRED if " or " not in k and k not in values]
    if "T" not in values and "max_bits" not in values:
        missing.append("T or max_bits")
    if missing:
        raise ConfigParseError("missing required keys: " + ", ".join(missing))

    dataset = r.str("dataset")
    if dataset not in ("synthetic-regression", "rosenbrock", "idx"):
        raise r.error("dataset", f"unknown dataset {dataset!r}")
    methods = []
    for tok in r.str("methods").split(","):
        try:
            methods.append(Method(tok.strip()))
        except ValueError:
            raise r.error("methods", f"unknown method {tok.strip()!r}") from None
    m, n, p = r.num("m", int), r.num("n", int), r.num("p")
    if m < 1:
        raise r.error("m", "must be >= 1")
    if n < 1:
        raise r.error("n", "must be >= 1")
    if not 0.0 <= p < 1.0:
        raise r.error("p", f"must satisfy 0 <= p < 1, got {p}")
    d_tokens = [tok.strip() for tok in r.str("d").split(",")]
    try:
        d_vals = [int(tok) for tok in d_tokens]
    except ValueError:
        raise r.error("d", "expected an integer or 'low,high'") from None
    if len(d_vals) not in (1, 2) or min(d_vals) < 1 or max(d_vals) > n:
        raise r.error("d", f"redundancy must be 1..n (n={n}), one value or 'low,high'")
    d_low, d_high = d_vals[0], d_vals[-1]

    schedule = r.str("schedule")
    if schedule not in _SCHEDULE_KEYS:
        raise r.error("schedule", f"unknown schedule {schedule!r}")
    sched_params = {k: r.num(k) for k in _SCHEDULE_KEYS[schedule]}
    if schedule == "inverse-t" and not sched_params["lambda"] > 0:
        raise r.error("lambda", "must be positive")
    if schedule == "fixed" and sched_params["gamma"] < 0:
        raise r.error("gamma", "must be nonnegative")
    if schedule in ("constant", "decaying") and sched_params["S"] < 0:
        raise r.error("S", "must be nonnegative")
    if schedule == "decaying":
        S, g0 = sched_params["S"], sched_params["gamma0"]
        if not g0 > 0 or (S > 0 and not g0 < 1 / (2 * S)):
            raise r.error("gamma0", "must satisfy 0 < gamma0 < 1/(2S)")

    cfg = ExperimentConfig(
        dataset=dataset, methods=methods, m=m, n=n, p=p, d_low=d_low, d_high=d_high,
        schedule=schedule, schedule_params=sched_params, seeds=r.int_list("seeds"),
        T=r.num("T", int) if r.has("T") else None,
        max_bits=r.num("max_bits", int) if r.has("max_bits") else None,
        zeta=r.num("zeta", int, 64), data_seed=r.num("data_seed", int, 0),
        out=r.str("out", "out"), checkpoints=r.num("checkpoints", int, 101),
        preset=values.get("preset"), lines=lines,
    )
    if cfg.T is not None and cfg.max_bits is not None:
        raise r.error("max_bits", "give either T or max_bits, not both")
    if cfg.T is not None and cfg.T < 0:
        raise r.error("T", "must be >= 0")
    if cfg.max_bits is not None and cfg.max_bits < 0:
        raise r.error("max_bits", "must be >= 0")
    if cfg.zeta < 1:
        raise r.error("zeta", "must be >= 1")
    if cfg.checkpoints < 2:
        raise r.error("checkpoints", "must be >= 2")
    if any(s < 0 for s in cfg.seeds):
        raise r.error("seeds", "seeds must be nonnegative")
    if cfg.data_seed < 0:
        raise r.error("data_seed", "must be nonnegative")
    flag = r.str("allow_divergence", "false").lower()
    if flag not in ("true", "false"):
        raise r.error("allow_divergence", "expected true or false")
    cfg.allow_divergence = flag == "true"

    if dataset == "synthetic-regression":
        cfg.feature_dim = r.num("feature_dim", int, 100)
        cfg.feature_std = r.num("feature_std", float, 10.0)
        cfg.noise_std = r.num("noise_std", float, 1.0)
        if cfg.feature_dim < 1:
            raise r.error("feature_dim", "must be >= 1")
        if cfg.feature_std < 0 or cfg.noise_std < 0:
            raise r.error("feature_std" if cfg.feature_std < 0 else "noise_std", "must be >= 0")
    elif dataset == "idx":
        cfg.idx_images, cfg.idx_labels = r.str("idx_images"), r.str("idx_labels")
        cfg.class_a, cfg.class_b = r.num("class_a", int), r.num("class_b", int)
    if schedule == "constant":
        for method in methods:
            iters = cfg.iterations(method, 1)
            if 4.0 * sched_params["S"] / (iters + 1) ** 0.75 > 1.0:
                raise r.error("S", f"constant rate needs T > (4S)^(4/3) - 1 (T={iters})")
    return cfg


# -- data --------------------------------------------------------------------

@dataclass
class Problem:
    model: LossModel
    dataset: object
    beta_star: np.ndarray | None


def build_problem(cfg: ExperimentConfig) -> Problem:
    if cfg.dataset == "synthetic-regression":
        ds, beta_star = generate_regression_data(cfg.m, cfg.feature_dim, cfg.feature_std, cfg.noise_std, cfg.data_seed)
        return Problem(LossModel(LossKind.LINEAR_REGRESSION, cfg.feature_dim), ds, beta_star)
    if cfg.dataset == "rosenbrock":
        return Problem(LossModel(LossKind.ROSENBROCK, cfg.m + 1), rosenbrock_dataset(cfg.m), np.ones(cfg.m + 1))
    ds = load_idx_subset(cfg.idx_images, cfg.idx_labels, cfg.class_a, cfg.class_b, cfg.m, cfg.data_seed)
    return Problem(LossModel(LossKind.LOGISTIC, ds.feature_dim), ds, None)


# -- CSV ---------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17e")


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    path.write_bytes(buf.getvalue().encode("utf-8"))


def trace_rows(method: Method, seed: int, rows: list[TraceRow]):
    for r in rows:
        yield [method.value, seed, r.t, r.cumulative_bits, r.loss, r.sqrt_two_loss, r.param_error, r.grad_norm_sq]


def write_trace(path, method: Method, seed: int, rows: list[TraceRow]) -> None:
    _write_csv(Path(path), TRACE_HEADER, trace_rows(method, seed, rows))


def read_trace(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- runs and summary --------------------------------------------------------

@dataclass
class RunRecord:
    method: Method
    seed: int
    rows: list
    diverged: bool = False
    diverged_at: int | None = None

    @property
    def final_bits(self) -> int:
        return self.rows[-1].cumulative_bits


def step_value(rows: list[TraceRow], bits: int, metric: str):
    """Metric of the last row with ``cumulative_bits <= bits``."""
    idx = np.searchsorted([r.cumulative_bits for r in rows], bits, side="right") - 1
    return getattr(rows[idx], metric)


def summarize(records: list[RunRecord], checkpoints: int = 101) -> list[dict]:
    """Seed-averaged step-function metrics on a shared grid of bit counts.

    The grid spans ``[0, B]`` where ``B`` is the largest bit count reached by
    every non-divergent run; a run contributes to a checkpoint only if it
    reached it.
    """
    finished = [r for r in records if not r.diverged] or records
    limit = min(r.final_bits for r in finished)
    grid = np.unique(np.linspace(0, limit, checkpoints).astype(np.int64))
    out = []
    for method in dict.fromkeys(r.method for r in records):
        runs = [r for r in records if r.method is method]
        for b in grid:
            live = [r for r in runs if r.final_bits >= b]
            row = {"method": method.value, "checkpoint_bits": int(b), "n_runs": len(live)}
            for metric in ("sqrt_two_loss", "param_error", "loss", "grad_norm_sq"):
                vals = [step_value(r.rows, b, metric) for r in live]
                row[metric + "_mean"] = None if not vals or vals[0] is None else float(np.mean(vals))
            out.append(row)
    return out


SUMMARY_HEADER = [
    "method", "checkpoint_bits", "n_runs", "sqrt_two_loss_mean", "param_error_mean", "loss_mean", "grad_norm_sq_mean",
]


@dataclass
class ExperimentResult:
    records: list
    summary: list
    exit_code: int


def run_experiment(cfg: ExperimentConfig, out_dir=None, log=print) -> ExperimentResult:
    out = Path(out_dir if out_dir is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    problem = build_problem(cfg)
    records = []
    for method in cfg.methods:
        iters = cfg.iterations(method, problem.model.w)
        for seed in cfg.seeds:
            sim = SimConfig(
                method=method, model=problem.model, dataset=problem.dataset, spec=cfg.spec(),
                n=cfg.n, p=cfg.p, schedule=cfg.make_schedule(iters), T=iters, seed=seed,
                budget=BitBudget(problem.model.w, cfg.zeta), beta_star=problem.beta_star,
            )
            try:
                rec = RunRecord(method, seed, run(sim))
            except DivergenceError as exc:
                rec = RunRecord(method, seed, exc.rows, diverged=True, diverged_at=exc.iteration)
            write_trace(out / f"trace_{method.value}_seed{seed}.csv", method, seed, rec.rows)
            if log:
                status = f"DIVERGED at t={rec.diverged_at}" if rec.diverged else "ok"
                last = rec.rows[-1]
                log(f"{method.value} seed={seed} T={iters} final sqrt(2L)={last.sqrt_two_loss:.6g} {status}")
            records.append(rec)
    summary = summarize(records, cfg.checkpoints)
    _write_csv(out / "summary.csv", SUMMARY_HEADER, ([row[k] for k in SUMMARY_HEADER] for row in summary))
    _write_csv(
        out / "runs.csv",
        ["method", "seed", "iterations", "final_bits", "diverged", "diverged_at"],
        ([r.method.value, r.seed, r.rows[-1].t, r.final_bits, int(r.diverged), r.diverged_at] for r in records),
    )
    diverged = any(r.diverged for r in records)
    return ExperimentResult(records, summary, 1 if diverged and not cfg.allow_divergence else 0)


# -- bounds ------------------------------------------------------------------

_BOUND_KEYS = {"C", "lambda", "S", "m", "n", "w", "p", "D", "gamma0", "L0", "Lstar", "T", "d", "out"}


def parse_bounds_config(text: str):
    """Parse a bound-sweep config; returns ``(params, spec_or_None, Ts, out)``."""
    values, lines = _parse_lines(text, _BOUND_KEYS)
    r = _Reader(values, lines)
    missing = [k for k in ("C", "m", "n", "w", "p", "T") if k not in values]
    if missing:
        raise ConfigParseError("missing required keys: " + ", ".join(missing))
    params = TheoryParams(
        C=r.num("C"), lam=r.num("lambda", float, 1.0), S=r.num("S", float, 1.0),
        m=r.num("m", int), n=r.num("n", int), w=r.num("w", int), p=r.num("p"),
        D=r.num("D", float, 1.0), gamma0=r.num("gamma0", float, 0.1),
        L0=r.num("L0", float, 0.0), Lstar=r.num("Lstar", float, 0.0),
    )
    checks = [
        ("C", params.C > 0, "must be positive"),
        ("lambda", params.lam > 0, "must be positive (strong-convexity constant)"),
        ("p", 0.0 <= params.p < 1.0, "must satisfy 0 <= p < 1"),
        ("m", params.m >= 1, "must be >= 1"),
        ("n", params.n >= 1, "must be >= 1"),
        ("w", params.w >= 1, "must be >= 1"),
        ("D", params.D >= 1, "must be >= 1"),
        ("S", params.S >= 0, "must be nonnegative"),
        ("gamma0", params.gamma0 > 0 and (params.S == 0 or params.gamma0 < 1 / (2 * params.S)),
         "must satisfy 0 < gamma0 < 1/(2S)"),
        ("L0", params.L0 >= params.Lstar, "must be >= Lstar"),
    ]
    for key, ok, message in checks:
        if not ok:
            raise r.error(key, message)
    Ts = r.int_list("T")
    for T in Ts:
        if T < 1 or 4.0 * params.S / (T + 1) ** 0.75 > 1.0:
            raise r.error("T", f"every T must be >= 1 and exceed (4S)^(4/3) - 1; got {T}")
    spec = None
    if "d" in values:
        d = r.str("d").split(",")
        try:
            d_vals = [int(tok) for tok in d]
        except ValueError:
            raise r.error("d", "expected an integer or 'low,high'") from None
        if len(d_vals) not in (1, 2) or min(d_vals) < 1 or max(d_vals) > params.n:
            raise r.error("d", "redundancy must be 1..n, one value or 'low,high'")
        spec = (RedundancySpec.homogeneous(params.m, d_vals[0]) if len(d_vals) == 1
                else RedundancySpec.two_level(params.m, d_vals[0], d_vals[1]))
    return params, spec, Ts, r.str("out", "bounds.csv")


BOUNDS_HEADER = ["bound", "C", "lambda", "S", "m", "n", "w", "p", "D", "gamma0", "L0", "Lstar", "T", "value"]


def write_bounds(path, rows) -> None:
    _write_csv(Path(path), BOUNDS_HEADER, ([row[k] for k in BOUNDS_HEADER] for row in rows))


def run_bounds(params, spec, Ts, path) -> list[dict]:
    rows = bound_sweep(params, spec, Ts)
    write_bounds(path, rows)
    return rows
