"""Straggler-tolerant distributed learning with 1-bit gradient coding."""

from .distribution import Assignment, RedundancySpec, assign_uniform_random
from .errors import DivergenceError
from .losses import Dataset, DataSample, LossKind, LossModel
from .quantization import BitBudget, Method, WorkerPayload
from .simulation import SimConfig, TraceRow, run

__version__ = "0.1.0"
