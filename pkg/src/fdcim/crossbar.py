"""Behavioral crossbar model: per-bitplane multiply-average rows, 1-bit
comparator readout, signed-digit output assembly, chained layers, and early
termination with workload accounting.

Semantics pinned here, since the hardware description leaves them open:

- a comparator bit b becomes the signed digit d = 2b - 1, and a row's
  assembled output is the sum of d * |plane weight| over its processed
  planes -- an odd multiple of the input scale, so a non-terminated row
  never outputs exactly zero;
- a comparator tie (differential exactly zero) resolves to bit 0 (digit -1);
- planes are processed most-significant-first by default, the order under
  which the early-termination partial-sum test tightens monotonically;
- "sound" termination zeroes a row only when the worst-case remaining plane
  magnitude cannot lift |partial| above the threshold; its output therefore
  equals the full-mode output with the |y| <= T zeroing rule applied, exactly.
  "heuristic" termination applies the literal partial-sum test and may
  disagree; callers measure the agreement rate rather than assert it;
- each transform invocation derives a private RNG stream from
  (array seed, invocation counter), so replaying the same invocation sequence
  reproduces noise bit-for-bit and concurrent invocations never share state.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import CrossbarProgrammingError, ParameterError, ShapeError
from .quant import (
    BitplaneTensor,
    FixedPointVector,
    Signedness,
    ThresholdParams,
    quantize,
    soft_threshold,
    to_bitplanes,
)


class TerminationMode(str, Enum):
    FULL = "full"
    HEURISTIC = "heuristic"
    SOUND = "sound"


class PlaneOrder(str, Enum):
    MSB_FIRST = "msb_first"
    LSB_FIRST = "lsb_first"


class CrossbarArray:
    """A programmed +/-1 cell grid plus comparator/noise configuration.

    Immutable after programming except for an internal invocation counter
    (GIL-atomic) used to derive one RNG stream per transform call.
    """

    def __init__(self, weights, comparator_offset=0.0, mav_noise_sigma=0.0,
                 rng_seed: int = 0):
        w = np.asarray(weights)
        if w.ndim != 2 or w.size == 0:
            raise CrossbarProgrammingError("weights must be a non-empty 2-D matrix")
        if not np.all(np.abs(w) == 1):
            raise CrossbarProgrammingError("crossbar cells must be -1 or +1")
        if mav_noise_sigma < 0:
            raise ParameterError("mav_noise_sigma must be non-negative")
        self.weights = w.astype(np.int8)
        self.weights.setflags(write=False)
        self._weights_f = self.weights.astype(np.float64)
        self.comparator_offset = np.broadcast_to(
            np.asarray(comparator_offset, dtype=np.float64), (w.shape[0],)).copy()
        self.mav_noise_sigma = float(mav_noise_sigma)
        self.rng_seed = int(rng_seed)
        self._invocations = itertools.count()

    @property
    def rows(self) -> int:
        return self.weights.shape[0]

    @property
    def cols(self) -> int:
        return self.weights.shape[1]

    def invocation_rng(self, invocation: int | None = None) -> np.random.Generator:
        if invocation is None:
            invocation = next(self._invocations)
        return np.random.default_rng([self.rng_seed, invocation])


def program(matrix, *, comparator_offset=0.0, mav_noise_sigma=0.0,
            rng_seed: int = 0) -> CrossbarArray:
    """Program a +/-1 matrix (e.g. walsh(k).rows or a BWHT block) into an array."""
    return CrossbarArray(matrix, comparator_offset, mav_noise_sigma, rng_seed)


def _check_plane(array: CrossbarArray, plane) -> np.ndarray:
    p = np.asarray(plane)
    if p.ndim != 1 or p.shape[0] != array.cols:
        raise ShapeError(f"plane must have length {array.cols}")
    if p.size and not np.all((p == 0) | (p == 1)):
        raise ParameterError("plane entries must be bits")
    return p.astype(np.float64)


def mav(array: CrossbarArray, plane, *, rng: np.random.Generator | None = None) -> np.ndarray:
    """Per-row multiply-average of one input bitplane.

    MAV_r = sum_c weights[r, c] * plane[c] / C, in [-1, 1], plus Gaussian
    noise when the array is configured with a nonzero sigma.
    """
    p = _check_plane(array, plane)
    out = (array._weights_f @ p) / array.cols
    if array.mav_noise_sigma > 0:
        if rng is None:
            rng = array.invocation_rng()
        out = out + rng.normal(0.0, array.mav_noise_sigma, array.rows)
    return out


def comparator(mav_values, offsets) -> np.ndarray:
    """Differential sign decision: 1 where mav + offset > 0, else 0 (ties -> 0)."""
    m = np.asarray(mav_values, dtype=np.float64)
    o = np.asarray(offsets, dtype=np.float64)
    if m.shape != o.shape and o.ndim != 0:
        raise ShapeError("mav values and offsets must have matching length")
    return ((m + o) > 0).astype(np.uint8)


@dataclass(frozen=True)
class TransformResult:
    """Outcome of one bitplane-wise crossbar transform."""

    output: FixedPointVector
    planes_processed: np.ndarray
    terminated_early: np.ndarray
    comparator_ops: int
    cycle_count: int


def bitplane_transform(array: CrossbarArray, planes: BitplaneTensor,
                       mode: TerminationMode = TerminationMode.FULL,
                       thresholds=0.0,
                       plane_order: PlaneOrder = PlaneOrder.MSB_FIRST,
                       ) -> TransformResult:
    """Approximate frequency transform of a bitplane-decomposed input.

    Each plane costs the array two clock cycles: a multiply-average and a
    comparator decision per row.  Comparator bits become signed digits whose
    weighted sum is packed into a two's-complement fixed-point output (one
    extra bit over the input width).  Early-termination modes may zero and
    retire rows before all planes are processed; see the module docstring for
    the exact rules.
    """
    if planes.length != array.cols:
        raise ShapeError(
            f"input length {planes.length} does not match {array.cols} columns")
    n_rows, n_planes = array.rows, planes.n_planes
    t = ThresholdParams.of(thresholds).broadcast(n_rows)
    order = (range(n_planes - 1, -1, -1) if plane_order is PlaneOrder.MSB_FIRST
             else range(n_planes))
    order = list(order)
    scale_f = float(planes.scale)
    mags = np.array([float(abs(planes.plane_weights[j])) for j in order])
    # remaining[i] = total |weight| of planes not yet processed after step i
    remaining = np.concatenate([np.cumsum(mags[::-1])[::-1][1:], [0.0]])

    mavs = (array._weights_f @ planes.planes.T.astype(np.float64)) / array.cols
    noise = None
    if array.mav_noise_sigma > 0:
        rng = array.invocation_rng()
        noise = rng.normal(0.0, array.mav_noise_sigma, (n_planes, n_rows))

    digits = np.zeros(n_rows, dtype=np.int64)   # sum of d_j * 2^j
    active = np.ones(n_rows, dtype=bool)
    zeroed = np.zeros(n_rows, dtype=bool)
    processed = np.zeros(n_rows, dtype=np.int64)

    for step, j in enumerate(order):
        if not active.any():
            break
        m = mavs[:, j]
        if noise is not None:
            m = m + noise[step]
        bits = comparator(m, array.comparator_offset)
        d = 2 * bits.astype(np.int64) - 1
        digits = np.where(active, digits + (d << j), digits)
        processed += active
        if mode is TerminationMode.FULL:
            continue
        partial_abs = np.abs(digits) * scale_f
        if mode is TerminationMode.HEURISTIC:
            stop = active & (partial_abs <= t)
        else:
            stop = active & (partial_abs + remaining[step] <= t)
        zeroed |= stop
        active &= ~stop

    digits[zeroed] = 0
    output = FixedPointVector(digits, n_planes + 1, Signedness.TWOS_COMPLEMENT,
                              planes.scale)
    return TransformResult(
        output=output,
        planes_processed=processed,
        terminated_early=processed < n_planes,
        comparator_ops=int(processed.sum()),
        cycle_count=2 * int(processed.max()),
    )


def chain_layer(array: CrossbarArray, x: FixedPointVector, thresholds,
                *, mode: TerminationMode = TerminationMode.FULL,
                plane_order: PlaneOrder = PlaneOrder.MSB_FIRST,
                requant_bits: int | None = None,
                requant_range: tuple[float, float] | None = None,
                ) -> FixedPointVector:
    """One frequency-domain layer: transform, digital soft-threshold with
    requantization, and a second transform back to the spatial domain.

    The default requantization keeps the intermediate grid (same bit width and
    scale as the first transform's output), which is lossless, so with T = 0
    the layer reduces to two composed transforms.  A soft-thresholded
    intermediate that is identically zero carries no charge and skips the
    second array pass entirely, returning zeros.
    """
    if array.rows != array.cols:
        raise ShapeError("chained layers need a square array")
    first = bitplane_transform(array, to_bitplanes(x), mode=mode,
                               thresholds=thresholds, plane_order=plane_order)
    y = first.output
    shrunk = soft_threshold(y.dequantize(), thresholds)
    bits = requant_bits if requant_bits is not None else y.total_bits
    if requant_range is None:
        half = float(y.scale) * (1 << (bits - 1))
        requant_range = (-half, half)
    q = quantize(shrunk, bits, requant_range, Signedness.TWOS_COMPLEMENT)
    if not q.values.any():
        zeros = np.zeros(array.rows, dtype=np.int64)
        return FixedPointVector(zeros, bits + 1, Signedness.TWOS_COMPLEMENT, q.scale)
    second = bitplane_transform(array, to_bitplanes(q),
                                mode=TerminationMode.FULL, thresholds=0.0,
                                plane_order=plane_order)
    return second.output
