"""Random 1-bit quantization, payload wire format and bit accounting.

A worker holding the real vector ``f`` sends one sign per coordinate plus the
scalar ``||f||``.  Coordinate ``k`` is sent as +1 with probability
``(1 + f_k / ||f||) / 2``, so ``bits * ||f||`` is an unbiased estimate of ``f``.

Wire format: ``ceil(w / 8)`` bytes of signs, bit ``k`` at byte ``k // 8``
position ``k % 8`` (LSB first, +1 -> 1, -1 -> 0, padding bits zero), then the
norm as an 8-byte big-endian IEEE-754 double.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidInputError, PayloadCodecError

DEFAULT_ZETA = 64


class Method(Enum):
    ONE_BIT_GC = "onebit-gc"
    SGC = "sgc"
    IGNORE_STRAGGLERS_1BIT = "ignore-stragglers"

    @property
    def quantized(self) -> bool:
        return self is not Method.SGC


@dataclass(frozen=True)
class BitBudget:
    w: int
    zeta: int = DEFAULT_ZETA

    def __post_init__(self):
        if self.w < 1 or self.zeta < 1:
            raise InvalidInputError("w and zeta must be >= 1")


@dataclass(frozen=True, eq=False)
class WorkerPayload:
    bits: np.ndarray  # int8, entries +1 / -1
    norm: float

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.int8)
        if bits.ndim != 1 or not np.all(np.abs(bits) == 1):
            raise InvalidInputError("payload bits must be a 1-D vector of +1/-1")
        if not (self.norm >= 0 and np.isfinite(self.norm)):
            raise InvalidInputError("payload norm must be finite and nonnegative")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "norm", float(self.norm))

    @property
    def w(self) -> int:
        return self.bits.size

    def __eq__(self, other):
        return (
            isinstance(other, WorkerPayload)
            and self.norm == other.norm
            and np.array_equal(self.bits, other.bits)
        )

    __hash__ = None


def sign_bits(f: np.ndarray, norm, u: np.ndarray) -> np.ndarray:
    """Signs for ``f`` (shape ``(..., w)``) given uniforms ``u`` of the same shape.

    ``norm`` broadcasts against the leading axes.  Rows with zero norm come
    out all +1.
    """
    norm = np.asarray(norm, dtype=np.float64)[..., None]
    with np.errstate(divide="ignore", invalid="ignore"):
        p_plus = np.where(norm > 0, 0.5 + 0.5 * f / norm, 1.0)
    return np.where(u < p_plus, 1, -1).astype(np.int8)


def quantize(f, rng: np.random.Generator) -> WorkerPayload:
    """Draw ``w`` uniforms from ``rng`` and encode ``f`` as signs plus norm."""
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 1 or f.size == 0:
        raise InvalidInputError("quantize expects a nonempty 1-D vector")
    if not np.all(np.isfinite(f)):
        raise InvalidInputError("cannot quantize a non-finite vector")
    norm = float(np.linalg.norm(f))
    u = rng.random(f.size)
    if norm == 0.0:
        return WorkerPayload(np.ones(f.size, dtype=np.int8), 0.0)
    return WorkerPayload(sign_bits(f, norm, u), norm)


def dequantize(payload: WorkerPayload) -> np.ndarray:
    return payload.bits.astype(np.float64) * payload.norm


def payload_bits(method: Method, budget: BitBudget) -> int:
    """Bits one non-straggler sends per iteration."""
    if method.quantized:
        return budget.w + budget.zeta
    return budget.w * budget.zeta


def encoded_size(w: int) -> int:
    return (w + 7) // 8 + 8


def encode_payload(payload: WorkerPayload) -> bytes:
    packed = np.packbits(payload.bits > 0, bitorder="little")
    return packed.tobytes() + struct.pack(">d", payload.norm)


def decode_payload(data: bytes, w: int) -> WorkerPayload:
    if w < 1:
        raise PayloadCodecError("w must be >= 1")
    data = bytes(data)
    if len(data) != encoded_size(w):
        raise PayloadCodecError(f"expected {encoded_size(w)} bytes for w={w}, got {len(data)}")
    nbytes = (w + 7) // 8
    raw = np.frombuffer(data[:nbytes], dtype=np.uint8)
    flags = np.unpackbits(raw, bitorder="little")
    if flags[w:].any():
        raise PayloadCodecError("nonzero padding bits")
    (norm,) = struct.unpack(">d", data[nbytes:])
    if not (np.isfinite(norm) and norm >= 0):
        raise PayloadCodecError(f"invalid norm {norm!r}")
    bits = np.where(flags[:w] == 1, 1, -1).astype(np.int8)
    return WorkerPayload(bits, norm)
