"""Data-distribution stage: replicate each sample onto ``d_i`` workers.

Placement approximates a pair-wise balanced design by choosing, for every
sample independently, a uniformly random ``d_i``-subset of the ``n`` workers.
Two samples then share ``d_i * d_i' / n`` workers in expectation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .rng import Purpose, stream


@dataclass(frozen=True, eq=False)
class RedundancySpec:
    d: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d)
        if d.ndim != 1 or d.size == 0:
            raise InvalidInputError("redundancy spec must be a nonempty 1-D sequence")
        if not np.all(d == np.round(d)) or np.any(d < 1):
            raise InvalidInputError("every d_i must be a positive integer")
        d = d.astype(np.int64)
        d.setflags(write=False)
        object.__setattr__(self, "d", d)

    @property
    def m(self) -> int:
        return self.d.size

    def validate(self, n: int) -> None:
        if np.any(self.d > n):
            raise InvalidInputError(f"d_i = {int(self.d.max())} exceeds the number of workers n = {n}")

    @classmethod
    def homogeneous(cls, m: int, D: int) -> "RedundancySpec":
        return cls(np.full(m, D))

    @classmethod
    def two_level(cls, m: int, low: int, high: int) -> "RedundancySpec":
        """``low`` for the first ``m // 2`` samples, ``high`` for the rest."""
        d = np.full(m, high)
        d[: m // 2] = low
        return cls(d)

    def __eq__(self, other):
        return isinstance(other, RedundancySpec) and np.array_equal(self.d, other.d)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Assignment:
    """Immutable result of the distribution stage.

    ``worker_sets[j]`` is the sorted array of sample indices held by worker
    ``j``; ``sample_counts[i]`` is how many workers hold sample ``i``.
    """

    worker_sets: tuple
    n: int
    m: int

    def __post_init__(self):
        sets = []
        for s in self.worker_sets:
            arr = np.unique(np.asarray(s, dtype=np.int64))
            if arr.size and (arr[0] < 0 or arr[-1] >= self.m):
                raise InvalidInputError("worker set holds an index outside 0..m-1")
            arr.setflags(write=False)
            sets.append(arr)
        if len(sets) != self.n:
            raise InvalidInputError(f"expected {self.n} worker sets, got {len(sets)}")
        object.__setattr__(self, "worker_sets", tuple(sets))

    @property
    def sample_counts(self) -> np.ndarray:
        return self.membership().sum(axis=0)

    def membership(self) -> np.ndarray:
        """Boolean ``(n, m)`` matrix, true where worker ``j`` holds sample ``i``."""
        M = np.zeros((self.n, self.m), dtype=bool)
        for j, s in enumerate(self.worker_sets):
            M[j, s] = True
        return M

    def to_text(self) -> str:
        return "".join(" ".join(str(i) for i in s) + "\n" for s in self.worker_sets)

    @classmethod
    def from_text(cls, text: str, m: int) -> "Assignment":
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        sets = [[int(tok) for tok in line.split()] for line in lines]
        return cls(tuple(sets), n=len(sets), m=m)

    def __eq__(self, other):
        return (
            isinstance(other, Assignment)
            and (self.n, self.m) == (other.n, other.m)
            and all(np.array_equal(a, b) for a, b in zip(self.worker_sets, other.worker_sets))
        )

    __hash__ = None


def assign_uniform_random(m: int, n: int, spec: RedundancySpec, seed: int) -> Assignment:
    if spec.m != m:
        raise InvalidInputError(f"spec has {spec.m} entries, expected m = {m}")
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    spec.validate(n)
    rng = stream(seed, Purpose.ASSIGN)
    holders = [[] for _ in range(n)]
    # one partial Fisher-Yates shuffle of 0..n-1 per sample
    for i in range(m):
        d = int(spec.d[i])
        perm = np.arange(n)
        u = rng.random(d)
        for k in range(d):
            r = k + int(u[k] * (n - k))
            perm[k], perm[r] = perm[r], perm[k]
        for j in perm[:d]:
            holders[j].append(i)
    return Assignment(tuple(holders), n=n, m=m)


def average_redundancy(spec: RedundancySpec) -> float:
    return float(np.mean(spec.d))


def inverse_redundancy_objective(spec: RedundancySpec) -> float:
    return float(np.sum(1.0 / spec.d))


@dataclass(frozen=True)
class OverlapStats:
    mean_overlap: float
    mean_target: float
    max_deviation: float
    mean_deviation: float
    n_pairs: int
    exhaustive: bool


def verify_pairwise_balance(
    assignment: Assignment,
    spec: RedundancySpec,
    max_exhaustive: int = 2000,
    n_sampled_pairs: int = 200_000,
    seed: int = 0,
) -> OverlapStats:
    """Compare realized overlaps ``|S(i) & S(i')|`` with ``d_i d_i' / n``.

    Every pair ``i < i'`` is examined when ``m <= max_exhaustive``; otherwise
    ``n_sampled_pairs`` random pairs are drawn.
    """
    if not np.array_equal(assignment.sample_counts, spec.d):
        raise InvalidInputError("assignment does not realize the redundancy spec")
    M = assignment.membership().astype(np.float64)
    d = spec.d.astype(np.float64)
    n, m = assignment.n, assignment.m
    if m < 2:
        return OverlapStats(0.0, 0.0, 0.0, 0.0, 0, True)
    if m <= max_exhaustive:
        iu, ju = np.triu_indices(m, k=1)
        overlap = (M.T @ M)[iu, ju]
        exhaustive = True
    else:
        rng = stream(seed, Purpose.PAIRS)
        iu = rng.integers(0, m, n_sampled_pairs)
        ju = rng.integers(0, m - 1, n_sampled_pairs)
        ju = ju + (ju >= iu)
        overlap = np.einsum("ki,ki->i", M[:, iu], M[:, ju])
        exhaustive = False
    target = d[iu] * d[ju] / n
    dev = np.abs(overlap - target)
    return OverlapStats(
        mean_overlap=float(overlap.mean()),
        mean_target=float(target.mean()),
        max_deviation=float(dev.max()),
        mean_deviation=float(dev.mean()),
        n_pairs=int(overlap.size),
        exhaustive=exhaustive,
    )
