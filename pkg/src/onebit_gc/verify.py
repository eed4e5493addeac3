"""Self-check suite run by ``onebit-gc verify``.

Each check returns ``(name, passed, detail)``.  Monte-Carlo sizes are kept
small enough for the whole suite to finish in a few seconds.
"""

from __future__ import annotations

import math

import numpy as np

from .distribution import Assignment, RedundancySpec, assign_uniform_random
from .losses import (
    LossKind,
    LossModel,
    finite_difference_grad,
    generate_regression_data,
    rosenbrock_dataset,
    sample_grad_norms_sq,
    total_grad,
    total_loss,
    Dataset,
)
from .quantization import WorkerPayload, decode_payload, encode_payload
from .simulation import ConstantRate, DecayingRate, encode_all, learning_rate
from .theory import TheoryParams, bound_second_moment, exact_second_moment, sample_global_updates


def _tiny_instance(seed: int):
    rng = np.random.default_rng(seed)
    ds = Dataset(rng.standard_normal((2, 2)), rng.standard_normal(2))
    model = LossModel(LossKind.LINEAR_REGRESSION, 2)
    spec = RedundancySpec.homogeneous(2, 2)
    assignment = Assignment(((0, 1), (0, 1)), n=2, m=2)
    beta = rng.standard_normal(2)
    return model, ds, spec, assignment, beta


def check_unbiasedness(seed=0, draws=400_000, p=0.3):
    model, ds, spec, assignment, beta = _tiny_instance(seed)
    fs = encode_all(assignment, spec, p, model, ds, beta)
    rng = np.random.default_rng(seed + 1)
    total = np.zeros(2)
    total_sq = np.zeros(2)
    for chunk in sample_global_updates(fs, p, draws, rng):
        total += chunk.sum(axis=0)
        total_sq += (chunk**2).sum(axis=0)
    mean = total / draws
    se = np.sqrt((total_sq / draws - mean**2) / draws)
    grad = total_grad(model, ds, beta)
    z = np.abs(mean - grad) / se
    return "unbiasedness", bool(np.all(z < 4)), f"max |z| = {z.max():.2f}"


def check_exact_moment(seed=0, draws=400_000, p=0.3):
    model, ds, spec, assignment, beta = _tiny_instance(seed)
    fs = encode_all(assignment, spec, p, model, ds, beta)
    rng = np.random.default_rng(seed + 2)
    acc = 0.0
    for chunk in sample_global_updates(fs, p, draws, rng):
        acc += float(np.sum(chunk**2))
    mc = acc / draws
    exact = exact_second_moment(fs, p, 2)
    rel = abs(mc - exact) / exact
    return "exact second moment", rel < 0.01, f"relative gap {rel:.2e}"


def check_bound(seed=0, draws=100_000, p=0.3):
    model, ds, spec, assignment, beta = _tiny_instance(seed)
    fs = encode_all(assignment, spec, p, model, ds, beta)
    C = float(np.max(sample_grad_norms_sq(model, ds, beta)))
    bound = bound_second_moment(TheoryParams(C=C, m=2, n=2, w=2, p=p), spec)
    mc = np.mean([np.sum(c**2, axis=1).mean() for c in sample_global_updates(fs, p, draws, np.random.default_rng(seed))])
    return "second-moment bound", mc <= bound, f"MC {mc:.4g} <= bound {bound:.4g}"


def check_schedules():
    worst = 0.0
    for S in (0.0, 0.1, 1.0, 5.0):
        for T in (100, 1000, 10**5):
            if 4 * S / (T + 1) ** 0.75 > 1:
                continue
            g = learning_rate(ConstantRate(S, T), 0)
            target = (T + 1) ** -0.75
            worst = max(worst, abs(g - g * g * S - target) / target)
        for frac in (0.1, 0.3, 0.49):
            g0 = frac / S if S > 0 else 0.05
            sched = DecayingRate(S, g0)
            for t in (0, 1, 10, 10**4):
                g = learning_rate(sched, t)
                target = (g0 - g0 * g0 * S) / math.sqrt(t + 1)
                worst = max(worst, abs(g - g * g * S - target) / target)
    return "learning-rate identities", worst < 1e-12, f"max relative error {worst:.2e}"


def check_gradients(seed=0, points=10):
    rng = np.random.default_rng(seed)
    worst = 0.0
    lin, _ = generate_regression_data(5, 4, 1.0, 1.0, seed)
    logi = Dataset(rng.standard_normal((5, 4)), rng.choice([-1.0, 1.0], 5))
    cases = [
        (LossModel(LossKind.LINEAR_REGRESSION, 4), lin, 1.0),
        (LossModel(LossKind.LOGISTIC, 4), logi, 1.0),
        (LossModel(LossKind.ROSENBROCK, 5), rosenbrock_dataset(4), 1.0),
    ]
    for model, ds, scale in cases:
        for _ in range(points):
            beta = scale * rng.standard_normal(model.w)
            fd = finite_difference_grad(lambda b: total_loss(model, ds, b), beta)
            an = total_grad(model, ds, beta)
            worst = max(worst, np.linalg.norm(fd - an) / max(np.linalg.norm(an), 1e-12))
    return "gradient finite differences", worst < 1e-5, f"max relative error {worst:.2e}"


def check_codec(seed=0, count=2000):
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(count):
        w = int(rng.integers(1, 70))
        p = WorkerPayload(rng.choice(np.array([-1, 1], dtype=np.int8), w), float(rng.exponential()))
        bad += decode_payload(encode_payload(p), w) != p
    return "payload codec round trip", bad == 0, f"{bad} mismatches in {count}"


def check_assignment(seed=0):
    spec = RedundancySpec.homogeneous(200, 20)
    a = assign_uniform_random(200, 100, spec, seed)
    exact = np.array_equal(a.sample_counts, spec.d)
    again = assign_uniform_random(200, 100, spec, seed) == a
    return "assignment replication", exact and again, "counts exact, deterministic" if exact and again else "mismatch"


CHECKS = [
    check_unbiasedness,
    check_exact_moment,
    check_bound,
    check_schedules,
    check_gradients,
    check_codec,
    check_assignment,
]


def run_all(seed: int = 0):
    return [check(seed=seed) if "seed" in check.__code__.co_varnames else check() for check in CHECKS]
