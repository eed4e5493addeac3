"""Per-sample loss models and their closed-form gradients.

Three models are supported:

* ``LINEAR_REGRESSION``: ``0.5 * (<x_i, beta> - y_i)**2``
* ``ROSENBROCK``: ``100 * (beta[i+1] - beta[i]**2)**2 + (1 - beta[i])**2``;
  sample ``i`` carries no features, only its index, and ``w = m + 1``.
* ``LOGISTIC``: ``log(1 + exp(-y_i * <beta, x_i>))`` with labels in {-1, +1}.

The total loss is the plain sum over samples (no averaging).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .errors import InvalidInputError
from .rng import Purpose, stream


@dataclass(frozen=True)
class DataSample:
    features: np.ndarray
    label: float
    index: int


@dataclass(frozen=True, eq=False)
class Dataset:
    """Row-major training matrix split into features ``X`` and labels ``y``."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise InvalidInputError(f"inconsistent dataset shapes {X.shape} / {y.shape}")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def l(self) -> int:  # noqa: E743
        return self.X.shape[1] + 1

    @property
    def feature_dim(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.m

    def __getitem__(self, i: int) -> DataSample:
        if not 0 <= i < self.m:
            raise IndexError(i)
        return DataSample(self.X[i], float(self.y[i]), i)

    @property
    def samples(self) -> list[DataSample]:
        return [self[i] for i in range(self.m)]

    @classmethod
    def from_samples(cls, samples) -> "Dataset":
        samples = sorted(samples, key=lambda s: s.index)
        if [s.index for s in samples] != list(range(len(samples))):
            raise InvalidInputError("sample indices must be 0..m-1")
        X = np.array([np.asarray(s.features, dtype=np.float64) for s in samples])
        if X.ndim == 1:
            X = X.reshape(len(samples), 0)
        return cls(X, np.array([s.label for s in samples], dtype=np.float64))


class LossKind(Enum):
    LINEAR_REGRESSION = "linear"
    ROSENBROCK = "rosenbrock"
    LOGISTIC = "logistic"


@dataclass(frozen=True)
class LossModel:
    kind: LossKind
    w: int

    def check(self, dataset: Dataset, beta: np.ndarray | None = None) -> None:
        if self.kind is LossKind.ROSENBROCK:
            if self.w != dataset.m + 1:
                raise InvalidInputError(f"Rosenbrock needs w = m + 1, got w={self.w}, m={dataset.m}")
        elif dataset.feature_dim != self.w:
            raise InvalidInputError(
                f"feature length {dataset.feature_dim} does not match w={self.w}"
            )
        if self.kind is LossKind.LOGISTIC and not np.all(np.abs(dataset.y) == 1.0):
            raise InvalidInputError("logistic labels must be -1 or +1")
        if beta is not None and np.shape(beta) != (self.w,):
            raise InvalidInputError(f"beta has shape {np.shape(beta)}, expected ({self.w},)")


def _as_beta(model: LossModel, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (model.w,):
        raise InvalidInputError(f"beta has shape {beta.shape}, expected ({model.w},)")
    return beta


def _sigmoid_neg(s: np.ndarray) -> np.ndarray:
    # 1 / (1 + exp(s)) without overflow
    return np.exp(-np.logaddexp(0.0, s))


def loss_sample(model: LossModel, sample: DataSample, beta) -> float:
    beta = _as_beta(model, beta)
    x = np.asarray(sample.features, dtype=np.float64)
    if model.kind is LossKind.ROSENBROCK:
        i = sample.index
        if not 0 <= i < model.w - 1:
            raise InvalidInputError(f"Rosenbrock term {i} out of range for w={model.w}")
        return float(100.0 * (beta[i + 1] - beta[i] ** 2) ** 2 + (1.0 - beta[i]) ** 2)
    if x.shape != (model.w,):
        raise InvalidInputError(f"features have shape {x.shape}, expected ({model.w},)")
    z = float(x @ beta)
    if model.kind is LossKind.LINEAR_REGRESSION:
        return 0.5 * (z - sample.label) ** 2
    return float(np.logaddexp(0.0, -sample.label * z))


def grad_sample(model: LossModel, sample: DataSample, beta) -> np.ndarray:
    beta = _as_beta(model, beta)
    x = np.asarray(sample.features, dtype=np.float64)
    if model.kind is LossKind.ROSENBROCK:
        i = sample.index
        if not 0 <= i < model.w - 1:
            raise InvalidInputError(f"Rosenbrock term {i} out of range for w={model.w}")
        g = np.zeros(model.w)
        r = beta[i + 1] - beta[i] ** 2
        g[i] = -400.0 * beta[i] * r - 2.0 * (1.0 - beta[i])
        g[i + 1] = 200.0 * r
        return g
    if x.shape != (model.w,):
        raise InvalidInputError(f"features have shape {x.shape}, expected ({model.w},)")
    z = float(x @ beta)
    if model.kind is LossKind.LINEAR_REGRESSION:
        return (z - sample.label) * x
    y = sample.label
    return -y * float(_sigmoid_neg(y * z)) * x


# Vectorised forms used by the simulator. Each returns one entry/row per sample.

def _rosenbrock_parts(beta: np.ndarray, m: int):
    head, tail = beta[:m], beta[1 : m + 1]
    r = tail - head**2
    return head, r


def sample_losses(model: LossModel, dataset: Dataset, beta) -> np.ndarray:
    beta = _as_beta(model, beta)
    model.check(dataset)
    if model.kind is LossKind.ROSENBROCK:
        head, r = _rosenbrock_parts(beta, dataset.m)
        return 100.0 * r**2 + (1.0 - head) ** 2
    z = dataset.X @ beta
    if model.kind is LossKind.LINEAR_REGRESSION:
        return 0.5 * (z - dataset.y) ** 2
    return np.logaddexp(0.0, -dataset.y * z)


def _grad_coefficients(model: LossModel, dataset: Dataset, beta: np.ndarray):
    """Per-sample gradient in factored form.

    Linear and logistic gradients are ``coef[i] * x_i``; Rosenbrock term ``i``
    puts ``lo[i]`` at coordinate ``i`` and ``hi[i]`` at ``i + 1``.
    """
    if model.kind is LossKind.ROSENBROCK:
        head, r = _rosenbrock_parts(beta, dataset.m)
        return -400.0 * head * r - 2.0 * (1.0 - head), 200.0 * r
    z = dataset.X @ beta
    if model.kind is LossKind.LINEAR_REGRESSION:
        return z - dataset.y
    return -dataset.y * _sigmoid_neg(dataset.y * z)


def sample_grads(model: LossModel, dataset: Dataset, beta) -> np.ndarray:
    """Dense ``(m, w)`` matrix of per-sample gradients."""
    return weighted_grad_sums(model, dataset, beta, np.eye(dataset.m))


def weighted_grad_sums(model: LossModel, dataset: Dataset, beta, weights) -> np.ndarray:
    """``weights @ G`` where row ``i`` of ``G`` is the gradient of sample ``i``.

    ``weights`` has shape ``(k, m)``; the result has shape ``(k, w)``.  The
    Rosenbrock case never materialises ``G``.
    """
    beta = _as_beta(model, beta)
    model.check(dataset)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 2 or weights.shape[1] != dataset.m:
        raise InvalidInputError(f"weights must have shape (k, {dataset.m})")
    if model.kind is LossKind.ROSENBROCK:
        lo, hi = _grad_coefficients(model, dataset, beta)
        out = np.zeros((weights.shape[0], model.w))
        out[:, : dataset.m] += weights * lo
        out[:, 1:] += weights * hi
        return out
    coef = _grad_coefficients(model, dataset, beta)
    return (weights * coef) @ dataset.X


def sample_grad_norms_sq(model: LossModel, dataset: Dataset, beta) -> np.ndarray:
    beta = _as_beta(model, beta)
    model.check(dataset)
    if model.kind is LossKind.ROSENBROCK:
        lo, hi = _grad_coefficients(model, dataset, beta)
        return lo**2 + hi**2
    coef = _grad_coefficients(model, dataset, beta)
    return coef**2 * np.einsum("ij,ij->i", dataset.X, dataset.X)


def total_loss(model: LossModel, dataset: Dataset, beta) -> float:
    if dataset.m == 0:
        raise InvalidInputError("dataset is empty")
    return float(np.sum(sample_losses(model, dataset, beta)))


def total_grad(model: LossModel, dataset: Dataset, beta) -> np.ndarray:
    if dataset.m == 0:
        raise InvalidInputError("dataset is empty")
    return weighted_grad_sums(model, dataset, beta, np.ones((1, dataset.m)))[0]


def finite_difference_grad(fun: Callable[[np.ndarray], float], beta, step: float = 1e-6) -> np.ndarray:
    """Central differences with per-coordinate step ``step * (|beta_k| + 1)``."""
    beta = np.asarray(beta, dtype=np.float64)
    grad = np.empty_like(beta)
    for k in range(beta.size):
        h = step * (abs(beta[k]) + 1.0)
        up, down = beta.copy(), beta.copy()
        up[k] += h
        down[k] -= h
        grad[k] = (fun(up) - fun(down)) / (2.0 * h)
    return grad


def generate_regression_data(m: int, feature_dim: int, feature_std: float, noise_std: float, seed: int):
    """Synthetic linear-regression data ``y = <x, beta*> + noise``.

    Returns ``(dataset, beta_star)``; the output depends only on the arguments.
    """
    if m < 1 or feature_dim < 1:
        raise InvalidInputError("m and feature_dim must be >= 1")
    if feature_std < 0 or noise_std < 0:
        raise InvalidInputError("standard deviations must be nonnegative")
    rng = stream(seed, Purpose.DATA)
    X = feature_std * rng.standard_normal((m, feature_dim))
    beta_star = rng.standard_normal(feature_dim)
    noise = noise_std * rng.standard_normal(m)
    return Dataset(X, X @ beta_star + noise), beta_star


def rosenbrock_dataset(m: int) -> Dataset:
    """Index-only samples for the chained Rosenbrock loss (``w = m + 1``)."""
    if m < 1:
        raise InvalidInputError("m must be >= 1")
    return Dataset(np.zeros((m, 0)), np.zeros(m))
