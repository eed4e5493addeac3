"""Learning stage of 1-bit gradient coding and its two baselines.

One iteration ``t`` (1-based) does::

    mask   <- Bernoulli(1 - p) per worker          (stream: seed, STRAGGLER, t)
    f_j    <- sum_{i in S_j} grad_i / (d_i (1 - p))
    g_hat  <- sum_j mask_j * decode(quantize(f_j))  (stream: seed, QUANTIZE, t, j)
              or sum_j mask_j * f_j for SGC
    beta   <- beta - gamma_t * g_hat

Straggler draw ``j`` of iteration ``t`` is the ``j``-th uniform of the
``(seed, STRAGGLER, t)`` stream and worker ``j`` quantizes with its own
``(seed, QUANTIZE, t, j)`` stream, so nothing depends on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, ClassVar, Optional, Sequence

import numpy as np

from .distribution import Assignment, RedundancySpec, assign_uniform_random
from .errors import DivergenceError, InvalidConfigError, InvalidInputError
from .losses import Dataset, LossModel, sample_losses, total_grad, weighted_grad_sums
from .quantization import (
    BitBudget,
    Method,
    WorkerPayload,
    dequantize,
    payload_bits,
    sign_bits,
)
from .rng import Purpose, reseed, stream

__all__ = [
    "Method",
    "InverseLambdaT",
    "ConstantRate",
    "DecayingRate",
    "FixedGamma",
    "learning_rate",
    "SimConfig",
    "TraceRow",
    "sample_straggler_mask",
    "encoding_weights",
    "local_encode",
    "encode_all",
    "aggregate",
    "step",
    "run",
    "metric_sqrt_two_loss",
    "metric_param_error",
]


# -- learning-rate schedules -------------------------------------------------

@dataclass(frozen=True)
class InverseLambdaT:
    """``gamma_t = 1 / (lam * t)`` for ``t >= 1``."""

    lam: float
    offset: ClassVar[int] = 1

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidConfigError("lambda must be positive")


@dataclass(frozen=True)
class ConstantRate:
    """Constant rate solving ``gamma - gamma**2 S = (T + 1)**(-3/4)``."""

    S: float
    T: int
    offset: ClassVar[int] = 0

    def __post_init__(self):
        if self.S < 0:
            raise InvalidConfigError("S must be nonnegative")
        if self.T < 0 or 4.0 * self.S / (self.T + 1) ** 0.75 > 1.0:
            raise InvalidConfigError(
                f"constant rate needs T > (4S)^(4/3) - 1; got S={self.S}, T={self.T}"
            )


@dataclass(frozen=True)
class DecayingRate:
    """Rate solving ``gamma_t - gamma_t**2 S = (gamma0 - gamma0**2 S) / sqrt(t + 1)``."""

    S: float
    gamma0: float
    offset: ClassVar[int] = 0

    def __post_init__(self):
        if self.S < 0:
            raise InvalidConfigError("S must be nonnegative")
        if not self.gamma0 > 0 or (self.S > 0 and not self.gamma0 < 1.0 / (2.0 * self.S)):
            raise InvalidConfigError(f"decaying rate needs 0 < gamma0 < 1/(2S); got {self.gamma0}")


@dataclass(frozen=True)
class FixedGamma:
    gamma: float
    offset: ClassVar[int] = 0

    def __post_init__(self):
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise InvalidConfigError("gamma must be finite and nonnegative")


def _small_root(S: float, a: float) -> float:
    # smaller root of S g^2 - g + a = 0, written to avoid cancellation
    disc = 1.0 - 4.0 * S * a
    if disc < 0:
        raise InvalidConfigError(f"negative discriminant 1 - 4*S*a = {disc}")
    return 2.0 * a / (1.0 + math.sqrt(disc))


def learning_rate(schedule, t: int) -> float:
    if isinstance(schedule, InverseLambdaT):
        if t < 1:
            raise InvalidInputError("1/(lambda t) is defined for t >= 1")
        return 1.0 / (schedule.lam * t)
    if isinstance(schedule, ConstantRate):
        return _small_root(schedule.S, 1.0 / (schedule.T + 1) ** 0.75)
    if isinstance(schedule, DecayingRate):
        if t < 0:
            raise InvalidInputError("t must be >= 0")
        g0, S = schedule.gamma0, schedule.S
        return _small_root(S, (g0 - g0 * g0 * S) / math.sqrt(t + 1))
    if isinstance(schedule, FixedGamma):
        return schedule.gamma
    raise TypeError(f"unknown schedule {schedule!r}")


# -- one iteration -----------------------------------------------------------

def sample_straggler_mask(n: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """True for workers that respond (probability ``1 - p`` each)."""
    if not 0.0 <= p <= 1.0:
        raise InvalidInputError(f"p must lie in [0, 1], got {p}")
    return rng.random(n) < 1.0 - p


def encoding_weights(assignment: Assignment, spec: RedundancySpec, p: float) -> np.ndarray:
    """``(n, m)`` matrix with ``1 / (d_i (1 - p))`` where worker ``j`` holds ``i``."""
    if not 0.0 <= p < 1.0:
        raise InvalidInputError(f"encoding needs 0 <= p < 1, got {p}")
    if spec.m != assignment.m:
        raise InvalidInputError("spec and assignment disagree on m")
    return assignment.membership() / (spec.d * (1.0 - p))


def local_encode(j: int, assignment, spec, p, model, dataset, beta) -> np.ndarray:
    W = encoding_weights(assignment, spec, p)[j : j + 1]
    return weighted_grad_sums(model, dataset, beta, W)[0]


def encode_all(assignment, spec, p, model, dataset, beta, weights=None) -> np.ndarray:
    if weights is None:
        weights = encoding_weights(assignment, spec, p)
    return weighted_grad_sums(model, dataset, beta, weights)


def aggregate(items: Sequence, mask) -> np.ndarray:
    """Sum the contributions of responding workers.

    ``items`` holds one ``WorkerPayload`` (1-bit methods) or one raw vector
    (SGC) per worker; entries for stragglers are ignored and may be ``None``.
    """
    mask = np.asarray(mask, dtype=bool)
    if len(items) != mask.size:
        raise InvalidInputError("need exactly one entry per worker")
    vectors = [
        dequantize(item) if isinstance(item, WorkerPayload) else np.asarray(item, dtype=np.float64)
        for item in items
        if item is not None
    ]
    if not vectors:
        raise InvalidInputError("cannot infer the dimension: every entry is None")
    total = np.zeros_like(vectors[0])
    for item, alive in zip(items, mask):
        if alive:
            total += dequantize(item) if isinstance(item, WorkerPayload) else item
    return total


def step(beta, g_hat, gamma: float) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.asarray(beta, dtype=np.float64) - gamma * np.asarray(g_hat, dtype=np.float64)
    if not np.all(np.isfinite(out)):
        raise DivergenceError("parameter vector became non-finite")
    return out


def metric_sqrt_two_loss(loss: float) -> float:
    if loss < 0:
        raise InvalidInputError("loss must be nonnegative")
    return math.sqrt(2.0 * loss)


def metric_param_error(beta, beta_star) -> float:
    return float(np.linalg.norm(np.asarray(beta) - np.asarray(beta_star)))


# -- full run ----------------------------------------------------------------

@dataclass(frozen=True)
class TraceRow:
    t: int
    cumulative_bits: int
    loss: float
    sqrt_two_loss: float
    param_error: Optional[float]
    grad_norm_sq: float


@dataclass(frozen=True, eq=False)
class SimConfig:
    method: Method
    model: LossModel
    dataset: Dataset
    spec: RedundancySpec
    n: int
    p: float
    schedule: object
    T: int
    seed: int
    budget: BitBudget = None
    beta0: Optional[np.ndarray] = None
    beta_star: Optional[np.ndarray] = None
    assignment: Optional[Assignment] = field(default=None, repr=False)

    def __post_init__(self):
        if self.method is Method.IGNORE_STRAGGLERS_1BIT and np.any(self.spec.d != 1):
            object.__setattr__(self, "spec", RedundancySpec(np.ones(self.spec.m, dtype=np.int64)))
        if self.budget is None:
            object.__setattr__(self, "budget", BitBudget(self.model.w))
        if self.budget.w != self.model.w:
            raise InvalidConfigError("bit budget dimension differs from the model dimension")
        if not 0.0 <= self.p < 1.0:
            raise InvalidConfigError(f"p must satisfy 0 <= p < 1, got {self.p}")
        if self.n < 1 or self.T < 0 or self.seed < 0:
            raise InvalidConfigError("n >= 1, T >= 0 and seed >= 0 are required")
        if self.spec.m != self.dataset.m:
            raise InvalidConfigError("redundancy spec length differs from the dataset size")
        self.spec.validate(self.n)
        self.model.check(self.dataset)
        if self.beta0 is not None and np.shape(self.beta0) != (self.model.w,):
            raise InvalidConfigError("beta0 has the wrong dimension")
        if self.assignment is not None and not np.array_equal(self.assignment.sample_counts, self.spec.d):
            raise InvalidConfigError("explicit assignment does not realize the redundancy spec")

    @property
    def bits_per_iteration(self) -> int:
        return payload_bits(self.method, self.budget)

    def build_assignment(self) -> Assignment:
        if self.assignment is not None:
            return self.assignment
        return assign_uniform_random(self.dataset.m, self.n, self.spec, self.seed)

    def initial_beta(self) -> np.ndarray:
        if self.beta0 is not None:
            return np.array(self.beta0, dtype=np.float64)
        return stream(self.seed, Purpose.INIT).standard_normal(self.model.w)


def _trace_row(config: SimConfig, t: int, beta: np.ndarray) -> TraceRow:
    with np.errstate(over="ignore", invalid="ignore"):
        loss = float(np.sum(sample_losses(config.model, config.dataset, beta)))
        grad = total_grad(config.model, config.dataset, beta)
        gsq = float(grad @ grad)
    if not (math.isfinite(loss) and math.isfinite(gsq)):
        raise DivergenceError("loss became non-finite")
    err = None if config.beta_star is None else metric_param_error(beta, config.beta_star)
    return TraceRow(
        t=t,
        cumulative_bits=t * config.bits_per_iteration,
        loss=loss,
        sqrt_two_loss=metric_sqrt_two_loss(loss),
        param_error=err,
        grad_norm_sq=gsq,
    )


def global_update(config: SimConfig, weights: np.ndarray, beta: np.ndarray, t: int) -> np.ndarray:
    """``g_hat`` for iteration ``t`` (vectorised over workers)."""
    mask = sample_straggler_mask(config.n, config.p, stream(config.seed, Purpose.STRAGGLER, t))
    alive = np.flatnonzero(mask)
    if alive.size == 0:
        return np.zeros(config.model.w)
    F = weighted_grad_sums(config.model, config.dataset, beta, weights[alive])
    if not config.method.quantized:
        return F.sum(axis=0)
    if not np.all(np.isfinite(F)):
        raise DivergenceError("local gradient sum became non-finite")
    norms = np.linalg.norm(F, axis=1)
    gen = stream(config.seed, Purpose.QUANTIZE)
    U = np.stack([reseed(gen, config.seed, Purpose.QUANTIZE, t, int(j)).random(config.model.w) for j in alive])
    bits = sign_bits(F, norms, U)
    return norms @ bits


def run(config: SimConfig, callback: Callable[[int, np.ndarray], None] | None = None) -> list[TraceRow]:
    """Execute ``config.T`` iterations; return rows for ``t = 0..T``.

    ``callback(t, beta)`` is called after each recorded row.  A non-finite
    parameter vector or loss raises ``DivergenceError`` whose ``iteration``
    is the failing ``t`` and whose ``rows`` is the trace so far.
    """
    assignment = config.build_assignment()
    weights = encoding_weights(assignment, config.spec, config.p)
    beta = config.initial_beta()
    rows = [_trace_row(config, 0, beta)]
    if callback is not None:
        callback(0, beta)
    for t in range(1, config.T + 1):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                g_hat = global_update(config, weights, beta, t)
            gamma = learning_rate(config.schedule, t - 1 + config.schedule.offset)
            beta = step(beta, g_hat, gamma)
            rows.append(_trace_row(config, t, beta))
        except DivergenceError as exc:
            raise DivergenceError(f"run diverged at iteration {t}: {exc}", iteration=t, rows=rows) from None
        if callback is not None:
            callback(t, beta)
    return rows
