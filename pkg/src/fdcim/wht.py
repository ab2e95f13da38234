"""Walsh-Hadamard transform kernels.

Builds Hadamard (natural order) and Walsh (sequency order) matrices, applies
the fast butterfly transform, and decomposes arbitrary-length inputs into
power-of-two blocks (the blockwise transform, BWHT) with explicit padding
bookkeeping.

Everything here is pure and parameter-free.  The butterfly only adds and
subtracts, so integer and ``Fraction`` inputs stay exact end to end; the
inverse scaling divides by a power of two, which is also exact for binary
floats.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import CapacityError, ParameterError, ShapeError

# Largest supported transform order (2^16 x 2^16 matrix).
MAX_ORDER_LOG2 = 16


class Ordering(str, Enum):
    NATURAL = "natural"
    SEQUENCY = "sequency"


class Direction(str, Enum):
    FORWARD = "forward"
    INVERSE = "inverse"


@dataclass(frozen=True)
class WalshMatrix:
    """A +/-1 transform matrix of order 2^k in natural or sequency row order."""

    order_log2: int
    rows: np.ndarray
    ordering: Ordering

    def __post_init__(self) -> None:
        n = 1 << self.order_log2
        if self.rows.shape != (n, n):
            raise ShapeError(f"expected {n}x{n} matrix, got {self.rows.shape}")
        if not np.all(np.abs(self.rows) == 1):
            raise ParameterError("matrix entries must be -1 or +1")
        self.rows.setflags(write=False)

    @property
    def size(self) -> int:
        return 1 << self.order_log2


def _check_order(k: int) -> None:
    if k < 0:
        raise ParameterError(f"order_log2 must be non-negative, got {k}")
    if k > MAX_ORDER_LOG2:
        raise CapacityError(
            f"order_log2={k} exceeds the size budget (max {MAX_ORDER_LOG2})"
        )


def hadamard(k: int) -> WalshMatrix:
    """Natural-order Hadamard matrix of order 2^k by Sylvester doubling."""
    _check_order(k)
    h = np.array([[1]], dtype=np.int32)
    for _ in range(k):
        h = np.block([[h, h], [h, -h]])
    return WalshMatrix(k, h, Ordering.NATURAL)


def sign_change_counts(matrix: np.ndarray) -> np.ndarray:
    """Number of sign changes along each row."""
    if matrix.shape[1] < 2:
        return np.zeros(matrix.shape[0], dtype=np.int64)
    return np.count_nonzero(np.diff(matrix, axis=1), axis=1)


def walsh(k: int) -> WalshMatrix:
    """Sequency-order Walsh matrix: hadamard(k) rows stably sorted by
    ascending sign-change count.  Row i ends up with exactly i sign changes."""
    h = hadamard(k)
    order = np.argsort(sign_change_counts(h.rows), kind="stable")
    return WalshMatrix(k, h.rows[order], Ordering.SEQUENCY)


def sequency_permutation(k: int) -> np.ndarray:
    """Permutation p with p[s] = natural-order row index whose sequency is s.

    Natural row h has sequency gray_decode(bit_reverse(h)); inverting gives
    p[s] = bit_reverse(gray_encode(s)) = bit_reverse(s ^ (s >> 1)).
    """
    n = 1 << k
    g = np.arange(n)
    g = g ^ (g >> 1)
    rev = np.zeros(n, dtype=np.int64)
    for _ in range(k):
        rev = (rev << 1) | (g & 1)
        g >>= 1
    return rev


def fwht(x, ordering: Ordering = Ordering.SEQUENCY) -> np.ndarray:
    """Fast Walsh-Hadamard transform along the last axis.

    The result equals the requested-ordering matrix times ``x``, computed with
    O(N log N) additions.  2-D inputs are transformed row-wise.  Integer and
    Fraction inputs (object dtype) are transformed exactly.
    """
    a = np.array(x)
    if a.ndim == 0:
        raise ShapeError("fwht input must be a vector")
    n = a.shape[-1]
    if n == 0 or n & (n - 1):
        raise ShapeError(f"fwht length must be a power of two, got {n}")
    k = n.bit_length() - 1
    half = 1
    while half < n:
        v = a.reshape(a.shape[:-1] + (-1, 2, half))
        a = np.stack((v[..., 0, :] + v[..., 1, :], v[..., 0, :] - v[..., 1, :]),
                     axis=-2).reshape(a.shape)
        half *= 2
    if ordering is Ordering.SEQUENCY:
        a = a[..., sequency_permutation(k)]
    return a


@dataclass(frozen=True)
class BwhtPlan:
    """Decomposition of an arbitrary-length transform into power-of-two blocks.

    ``pad_map[i]`` zeros are appended to block i's input; only the final block
    of a non-power-of-two length can carry padding under the greedy policy.
    """

    input_len: int
    block_sizes: tuple[int, ...]
    pad_map: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.input_len < 1:
            raise ParameterError("input_len must be positive")
        if len(self.block_sizes) != len(self.pad_map):
            raise ShapeError("block_sizes and pad_map length mismatch")
        for size, pad in zip(self.block_sizes, self.pad_map):
            if size < 1 or size & (size - 1):
                raise ParameterError(f"block size {size} is not a power of two")
            if not 0 <= pad < size:
                raise ParameterError(f"pad {pad} invalid for block size {size}")
        if sum(s - p for s, p in zip(self.block_sizes, self.pad_map)) != self.input_len:
            raise ShapeError("blocks minus padding must cover input_len exactly")

    @property
    def padded_len(self) -> int:
        return sum(self.block_sizes)

    @property
    def total_pad(self) -> int:
        return sum(self.pad_map)


def bwht_plan(m: int, min_block: int = 4) -> BwhtPlan:
    """Greedy binary decomposition of m into power-of-two blocks.

    Every set bit of m at least ``min_block`` becomes its own block; the
    low-order remainder (< min_block) is zero-padded into one final block of
    ``min_block``.  A power-of-two m is always a single unpadded block, so
    padding is zero for most lengths and bounded by ``min_block - 1`` otherwise.
    """
    if m < 1:
        raise ParameterError(f"transform length must be positive, got {m}")
    if min_block < 1 or min_block & (min_block - 1):
        raise ParameterError(f"min_block must be a power of two, got {min_block}")
    if m & (m - 1) == 0:
        return BwhtPlan(m, (m,), (0,))
    sizes: list[int] = []
    pads: list[int] = []
    for bit in reversed(range(m.bit_length())):
        size = 1 << bit
        if size >= min_block and m & size:
            sizes.append(size)
            pads.append(0)
    remainder = m & (min_block - 1)
    if remainder:
        sizes.append(min_block)
        pads.append(min_block - remainder)
    return BwhtPlan(m, tuple(sizes), tuple(pads))


def _scaled(block: np.ndarray, size: int) -> np.ndarray:
    if block.dtype == object:
        from fractions import Fraction

        return block * Fraction(1, size)
    return block / size


def bwht_apply(plan: BwhtPlan, x, direction: Direction = Direction.FORWARD) -> np.ndarray:
    """Blockwise sequency-order transform.

    Forward consumes ``input_len`` samples and emits ``padded_len``
    coefficients: a padded block's zero tail still transforms to coefficients
    the inverse needs, so they are kept rather than stripped (for the unpadded
    plans produced by the default policy the two lengths coincide).  Inverse
    consumes ``padded_len`` coefficients, applies the same matrix with
    1/blocksize scaling, strips the pad positions, and returns ``input_len``
    samples, so inverse(forward(x)) == x exactly.
    """
    a = np.array(x)
    if a.ndim != 1:
        raise ShapeError("bwht_apply expects a 1-D vector")
    if direction is Direction.FORWARD:
        if a.shape[0] != plan.input_len:
            raise ShapeError(
                f"expected length {plan.input_len}, got {a.shape[0]}")
        parts = []
        pos = 0
        for size, pad in zip(plan.block_sizes, plan.pad_map):
            take = size - pad
            seg = a[pos:pos + take]
            pos += take
            if pad:
                seg = np.concatenate([seg, np.zeros(pad, dtype=a.dtype)])
            parts.append(fwht(seg, Ordering.SEQUENCY))
        return np.concatenate(parts)
    if a.shape[0] != plan.padded_len:
        raise ShapeError(
            f"expected length {plan.padded_len}, got {a.shape[0]}")
    parts = []
    pos = 0
    for size, pad in zip(plan.block_sizes, plan.pad_map):
        seg = a[pos:pos + size]
        pos += size
        out = _scaled(fwht(seg, Ordering.SEQUENCY), size)
        parts.append(out[:size - pad])
    return np.concatenate(parts)
