"""Convergence bounds and exact second moments of the global update.

Exact conditional second moment.  With independent masks ``I_j ~ Bern(1-p)``
and signs ``h_j`` drawn by the 1-bit quantizer, ``g = sum_j I_j ||f_j|| h_j``.
For one worker ``E[I_j^2 ||h_j||^2] = (1-p) w`` since every sign squares to
one.  For two distinct workers the masks and signs are independent and
``E[<h_j1, h_j2>] = <f_j1, f_j2> / (||f_j1|| ||f_j2||)`` coordinate by
coordinate.  Summing both cases over all worker pairs gives::

    E||g||^2 = (1-p)^2 ||sum_j f_j||^2 + (1-p) (w - (1-p)) sum_j ||f_j||^2

When every sample has the same redundancy ``D`` and each pair of samples
shares exactly ``D^2 / n`` workers, substituting ``f_j`` turns this into::

    ||grad||^2 + (w-(1-p))/(1-p) * [ (1/n) sum_{i!=i'} <g_i, g_i'>
                                     + (1/D) sum_i ||g_i||^2 ]

Random uniform placement only meets the overlap condition on average, so
``exact_second_moment_homogeneous`` reports both forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .distribution import Assignment, RedundancySpec
from .errors import InvalidConfigError, InvalidInputError
from .losses import Dataset, LossModel, sample_grad_norms_sq, sample_grads
from .quantization import sign_bits
from .simulation import encode_all


@dataclass(frozen=True)
class TheoryParams:
    C: float
    lam: float = 1.0
    S: float = 1.0
    m: int = 1
    n: int = 1
    w: int = 1
    p: float = 0.0
    D: float = 1.0
    gamma0: float = 0.1
    L0: float = 0.0
    Lstar: float = 0.0

    def with_(self, **kw) -> "TheoryParams":
        return replace(self, **kw)


def _check_common(params: TheoryParams) -> None:
    if not params.C > 0:
        raise InvalidConfigError("C must be positive")
    if not 0.0 <= params.p < 1.0:
        raise InvalidConfigError(f"p must satisfy 0 <= p < 1, got {params.p}")
    if params.m < 1 or params.n < 1 or params.w < 1:
        raise InvalidConfigError("m, n and w must be >= 1")


def _check_nonconvex(params: TheoryParams) -> None:
    _check_common(params)
    if params.D < 1:
        raise InvalidConfigError("D must be >= 1")
    if params.S < 0:
        raise InvalidConfigError("S must be nonnegative")
    if params.L0 < params.Lstar:
        raise InvalidConfigError("L0 must be >= Lstar")


def bound_second_moment(params: TheoryParams, d: RedundancySpec) -> float:
    """Upper bound on ``E||g_hat||^2`` given ``||grad_i||^2 <= C``."""
    _check_common(params)
    if d.m != params.m:
        raise InvalidConfigError(f"spec has {d.m} entries, expected m = {params.m}")
    C, m, n, w, q = params.C, params.m, params.n, params.w, 1.0 - params.p
    excess = (w - q) / q
    return C * m * m + excess * (m * m - m) / n * C + excess * C * float(np.sum(1.0 / d.d))


def bound_theorem1(params: TheoryParams, d: RedundancySpec, T: int) -> float:
    """``4 G / (lam^2 T)`` bound on ``E||beta_T - beta*||^2`` (strongly convex)."""
    if not params.lam > 0:
        raise InvalidConfigError("lambda must be positive")
    if T < 1:
        raise InvalidConfigError("T must be >= 1")
    return 4.0 * bound_second_moment(params, d) / (params.lam**2 * T)


def _noise_factor(params: TheoryParams) -> float:
    q = 1.0 - params.p
    return (params.w - q) / q * ((params.m - 1) / params.n + 1.0 / params.D) * params.C * params.m * params.S


def bound_theorem2(params: TheoryParams, T: int) -> float:
    """Bound on the average squared gradient norm with the constant rate."""
    _check_nonconvex(params)
    if T < 0 or 4.0 * params.S / (T + 1) ** 0.75 > 1.0:
        raise InvalidConfigError(f"need T > (4S)^(4/3) - 1, got T={T}, S={params.S}")
    a = 1.0 / (T + 1) ** 0.75
    gamma = 2.0 * a / (1.0 + math.sqrt(1.0 - 4.0 * params.S * a))
    return (params.L0 - params.Lstar) / (T + 1) ** 0.25 + (T + 1) ** 0.75 * gamma**2 * _noise_factor(params)


def bound_theorem3(params: TheoryParams, T: int) -> float:
    """Bound on the minimum squared gradient norm with the decaying rate."""
    _check_nonconvex(params)
    g0, S = params.gamma0, params.S
    if not g0 > 0 or (S > 0 and not g0 < 1.0 / (2.0 * S)):
        raise InvalidConfigError(f"need 0 < gamma0 < 1/(2S), got gamma0={g0}")
    if T < 0:
        raise InvalidConfigError("T must be >= 0")
    c = (g0 - g0 * g0 * S) * math.sqrt(T + 1)
    return (params.L0 - params.Lstar) / c + g0 * g0 * (2.0 + math.log(T + 1)) / c * _noise_factor(params)


def exact_second_moment(fs, p: float, w: int) -> float:
    """Exact ``E(||g_hat||^2 | f)`` for the 1-bit update; ``fs`` is ``(n, w)``."""
    if not 0.0 <= p < 1.0:
        raise InvalidInputError(f"p must satisfy 0 <= p < 1, got {p}")
    fs = np.atleast_2d(np.asarray(fs, dtype=np.float64))
    if fs.shape[1] != w:
        raise InvalidInputError(f"vectors have length {fs.shape[1]}, expected w={w}")
    q = 1.0 - p
    total = fs.sum(axis=0)
    return q * q * float(total @ total) + q * (w - q) * float(np.sum(fs * fs))


@dataclass(frozen=True)
class MomentComparison:
    expectation_form: float
    realized: float

    @property
    def difference(self) -> float:
        return self.realized - self.expectation_form


def second_moment_expectation_form(
    model: LossModel, dataset: Dataset, beta, p: float, w: int, D: float, n: int
) -> float:
    """Second moment assuming every sample pair shares exactly ``D^2/n`` workers."""
    if not 0.0 <= p < 1.0:
        raise InvalidInputError(f"p must satisfy 0 <= p < 1, got {p}")
    G = sample_grads(model, dataset, beta)
    total = G.sum(axis=0)
    sq = float(np.sum(G * G))
    cross = float(total @ total) - sq  # sum over i != i'
    q = 1.0 - p
    return float(total @ total) + (w - q) / q * (cross / n + sq / D)


def exact_second_moment_homogeneous(
    model: LossModel,
    dataset: Dataset,
    assignment: Assignment,
    beta,
    p: float,
    w: int,
    D: int,
) -> MomentComparison:
    """Balanced-overlap second moment next to the one of the realized placement."""
    spec = RedundancySpec(np.full(dataset.m, D))
    if not np.array_equal(assignment.sample_counts, spec.d):
        raise InvalidInputError("assignment is not homogeneous with redundancy D")
    fs = encode_all(assignment, spec, p, model, dataset, beta)
    return MomentComparison(
        expectation_form=second_moment_expectation_form(model, dataset, beta, p, w, D, assignment.n),
        realized=exact_second_moment(fs, p, w),
    )


def empirical_gradient_bound(model: LossModel, dataset: Dataset, betas) -> float:
    """``max_i max_beta ||grad_i(beta)||^2`` over the given parameter vectors."""
    return max(float(np.max(sample_grad_norms_sq(model, dataset, b))) for b in betas)


def sample_global_updates(fs, p: float, draws: int, rng: np.random.Generator, chunk: int = 200_000):
    """Monte-Carlo draws of the 1-bit global update for fixed encoded vectors.

    Yields arrays of shape ``(k, w)`` whose rows are independent samples of
    ``sum_j I_j ||f_j|| h_j``.
    """
    fs = np.atleast_2d(np.asarray(fs, dtype=np.float64))
    n, w = fs.shape
    norms = np.linalg.norm(fs, axis=1)
    done = 0
    while done < draws:
        k = min(chunk, draws - done)
        alive = rng.random((k, n)) < 1.0 - p
        u = rng.random((k, n, w))
        bits = sign_bits(np.broadcast_to(fs, (k, n, w)), np.broadcast_to(norms, (k, n)), u)
        yield np.einsum("kn,knw->kw", alive * norms, bits.astype(np.float64))
        done += k


def bound_sweep(params: TheoryParams, d: RedundancySpec | None, Ts) -> list[dict]:
    """Evaluate every applicable bound at each ``T``; one dict per value."""
    rows = []
    base = {
        "C": params.C, "lambda": params.lam, "S": params.S, "m": params.m, "n": params.n,
        "w": params.w, "p": params.p, "D": params.D, "gamma0": params.gamma0,
        "L0": params.L0, "Lstar": params.Lstar,
    }
    if d is not None:
        rows.append({"bound": "second_moment", **base, "T": "", "value": bound_second_moment(params, d)})
    for T in Ts:
        if d is not None:
            rows.append({"bound": "theorem1", **base, "T": T, "value": bound_theorem1(params, d, T)})
        rows.append({"bound": "theorem2", **base, "T": T, "value": bound_theorem2(params, T)})
        rows.append({"bound": "theorem3", **base, "T": T, "value": bound_theorem3(params, T)})
    return rows
