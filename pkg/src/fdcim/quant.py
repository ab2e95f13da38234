"""Fixed-point quantization, bitplane packing, and the soft-threshold
activation with its (sub)gradients."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .errors import ParameterError, ShapeError

MAX_BITS = 16


class Signedness(str, Enum):
    UNSIGNED = "unsigned"
    TWOS_COMPLEMENT = "twos_complement"


def code_bounds(bits: int, signedness: Signedness) -> tuple[int, int]:
    if signedness is Signedness.UNSIGNED:
        return 0, (1 << bits) - 1
    return -(1 << (bits - 1)), (1 << (bits - 1)) - 1


@dataclass(frozen=True)
class FixedPointVector:
    """Integer codes plus the rational scale mapping them to real values.

    Real value = code * scale.  For unsigned vectors produced by
    :func:`quantize` the codes are measured from the range's lower edge, for
    two's-complement ones from the range midpoint; with the zero-based and
    symmetric ranges used throughout, code * scale is the value itself.
    """

    values: np.ndarray
    total_bits: int
    signedness: Signedness
    scale: Fraction

    def __post_init__(self) -> None:
        if not 1 <= self.total_bits <= MAX_BITS:
            raise ParameterError(f"total_bits must be in 1..{MAX_BITS}")
        vals = np.array(self.values, dtype=np.int64)
        if vals.ndim != 1:
            raise ShapeError("fixed-point values must be a 1-D vector")
        object.__setattr__(self, "values", vals)
        lo, hi = code_bounds(self.total_bits, self.signedness)
        if vals.size and (vals.min() < lo or vals.max() > hi):
            raise ParameterError(
                f"codes outside {self.total_bits}-bit {self.signedness.value} range")
        vals.setflags(write=False)

    def __len__(self) -> int:
        return int(self.values.size)

    def dequantize(self) -> np.ndarray:
        return self.values * float(self.scale)

    def exact_values(self) -> list[Fraction]:
        return [int(v) * self.scale for v in self.values]


def _round_half_away(u: np.ndarray) -> np.ndarray:
    return np.copysign(np.floor(np.abs(u) + 0.5), u)


def quantize(x, bits: int, value_range: tuple[float, float],
             signedness: Signedness = Signedness.TWOS_COMPLEMENT) -> FixedPointVector:
    """Uniform quantizer onto 2^bits codes spanning ``value_range``.

    scale = (hi - lo) / 2^bits.  Codes are round-half-away-from-zero multiples
    of scale measured from the range origin (lo when unsigned, the midpoint
    when two's complement) and saturate at the end codes, so the dequantized
    error is at most scale/2 away from saturation.
    """
    lo, hi = value_range
    if not 1 <= bits <= MAX_BITS:
        raise ParameterError(f"bits must be in 1..{MAX_BITS}, got {bits}")
    if not lo < hi:
        raise ParameterError(f"need lo < hi, got [{lo}, {hi}]")
    arr = np.asarray(x, dtype=np.float64)
    if arr.size == 0:
        raise ShapeError("cannot quantize an empty vector")
    scale = (Fraction(hi) - Fraction(lo)) / (1 << bits)
    origin = float(lo) if signedness is Signedness.UNSIGNED else (lo + hi) / 2.0
    codes = _round_half_away((arr - origin) / float(scale))
    cmin, cmax = code_bounds(bits, signedness)
    codes = np.clip(codes, cmin, cmax).astype(np.int64)
    return FixedPointVector(codes, bits, signedness, scale)


@dataclass(frozen=True)
class BitplaneTensor:
    """A fixed-point vector split into single-bit planes.

    ``planes[j]`` holds bit j of every element (j = significance, LSB first);
    ``plane_weights[j]`` is the signed rational weight of that plane, negative
    for the sign plane of two's-complement sources.  The weighted plane sum
    reproduces the source values exactly.
    """

    planes: np.ndarray
    plane_weights: tuple[Fraction, ...]
    length: int

    def __post_init__(self) -> None:
        p = np.array(self.planes, dtype=np.uint8)
        object.__setattr__(self, "planes", p)
        if p.ndim != 2 or p.shape[1] != self.length:
            raise ShapeError("planes must be (n_planes, length)")
        if p.shape[0] != len(self.plane_weights):
            raise ShapeError("one weight per plane required")
        if p.size and p.max() > 1:
            raise ParameterError("plane entries must be bits")
        p.setflags(write=False)

    @property
    def n_planes(self) -> int:
        return int(self.planes.shape[0])

    @property
    def scale(self) -> Fraction:
        return abs(self.plane_weights[0])


def to_bitplanes(v: FixedPointVector) -> BitplaneTensor:
    """Split ``v`` into significance-ordered bitplanes (exact round trip)."""
    b = v.total_bits
    pattern = v.values & ((1 << b) - 1)  # two's-complement bit pattern
    shifts = np.arange(b, dtype=np.int64)[:, None]
    planes = ((pattern[None, :] >> shifts) & 1).astype(np.uint8)
    weights = [v.scale * (1 << j) for j in range(b)]
    if v.signedness is Signedness.TWOS_COMPLEMENT:
        weights[-1] = -weights[-1]
    return BitplaneTensor(planes, tuple(weights), len(v))


def from_bitplanes(t: BitplaneTensor) -> FixedPointVector:
    """Reassemble the fixed-point vector a bitplane tensor came from."""
    scale = t.scale
    signed = t.plane_weights[-1] < 0
    values = np.zeros(t.length, dtype=np.int64)
    for j, w in enumerate(t.plane_weights):
        coeff = w / scale
        if coeff.denominator != 1 or abs(coeff) != (1 << j):
            raise ParameterError("plane weights must be +/- scale * 2^j")
        values += int(coeff) * t.planes[j].astype(np.int64)
    sign = Signedness.TWOS_COMPLEMENT if signed else Signedness.UNSIGNED
    return FixedPointVector(values, t.n_planes, sign, scale)


@dataclass(frozen=True)
class ThresholdParams:
    """Non-negative soft-threshold level(s), scalar or per channel."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if v.ndim > 1:
            raise ShapeError("thresholds must be scalar or 1-D")
        if np.any(v < 0):
            raise ParameterError("thresholds must be non-negative")

    @classmethod
    def of(cls, t) -> "ThresholdParams":
        if isinstance(t, cls):
            return t
        return cls(np.asarray(t, dtype=np.float64))

    def broadcast(self, n: int) -> np.ndarray:
        if self.values.ndim == 0:
            return np.full(n, float(self.values))
        if self.values.shape[0] != n:
            raise ShapeError(
                f"expected scalar or {n} thresholds, got {self.values.shape[0]}")
        return self.values


def soft_threshold(x, t) -> np.ndarray:
    """Shrinkage nonlinearity: x+T below -T, 0 inside [-T, T], x-T above T."""
    params = ThresholdParams.of(t)
    arr = np.asarray(x, dtype=np.float64)
    tv = params.broadcast(arr.shape[-1]) if arr.ndim else params.values
    return np.where(arr > tv, arr - tv, np.where(arr < -tv, arr + tv, 0.0))


def soft_threshold_grads(x, t) -> tuple[np.ndarray, np.ndarray]:
    """(dy/dx, dy/dT): 1 and -sign(x) outside the dead zone, 0 inside.

    At |x| == T the subgradient 0 is returned.
    """
    params = ThresholdParams.of(t)
    arr = np.asarray(x, dtype=np.float64)
    tv = params.broadcast(arr.shape[-1]) if arr.ndim else params.values
    outside = np.abs(arr) > tv
    dydx = outside.astype(np.float64)
    dydt = np.where(outside, -np.sign(arr), 0.0)
    return dydx, dydt
