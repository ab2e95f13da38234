"""Memory-immersed collaborative digitization.

Models the ADC network built from compute-in-SRAM arrays: column-line
capacitors of a neighbour array form a charge-sharing DAC, a clocked
comparator resolves one decision per cycle, and arrays cooperate in SAR,
Flash, or hybrid Flash+SAR schedules.  Also provides the exact
multiply-average code statistics, the optimal order-preserving (alphabetic)
search tree that exploits them, and DNL/INL extraction from transfer curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import NamedTuple, Union

import numpy as np

from .errors import ConfigError, ParameterError, ShapeError

MAX_ADC_BITS = 8


class AdcMode(str, Enum):
    SAR = "sar"
    FLASH = "flash"
    HYBRID = "hybrid"
    ASYMMETRIC = "asymmetric"


# ---------------------------------------------------------------------------
# Capacitive DAC built from column lines


@dataclass(frozen=True)
class CapDac:
    """Column-line unit capacitors with fractional mismatch.

    A reference is produced by precharging a subset of units to vdd and
    charge-sharing with the rest, so the voltage is the precharged fraction
    of total capacitance.
    """

    n_units: int
    unit_mismatch: np.ndarray = None
    vdd: float = 1.0

    def __post_init__(self) -> None:
        if self.n_units < 2:
            raise ConfigError(f"a DAC needs at least 2 units, got {self.n_units}")
        mm = self.unit_mismatch
        mm = np.zeros(self.n_units) if mm is None else np.asarray(mm, dtype=np.float64)
        if mm.shape != (self.n_units,):
            raise ShapeError("unit_mismatch must have one entry per unit")
        if np.any(mm <= -1):
            raise ParameterError("unit mismatch entries must exceed -1")
        mm = mm.copy()
        mm.setflags(write=False)
        object.__setattr__(self, "unit_mismatch", mm)
        prefix = np.concatenate([[0.0], np.cumsum(1.0 + mm)])
        object.__setattr__(self, "_prefix", prefix)

    @classmethod
    def ideal(cls, n_units: int, vdd: float = 1.0) -> "CapDac":
        return cls(n_units, np.zeros(n_units), vdd)

    @classmethod
    def with_mismatch(cls, n_units: int, sigma: float,
                      rng: np.random.Generator, vdd: float = 1.0) -> "CapDac":
        mm = np.maximum(rng.normal(0.0, sigma, n_units), -0.999)
        return cls(n_units, mm, vdd)

    def reference_for_count(self, k: int) -> float:
        """Reference from precharging the first k units (the SAR ladder)."""
        if not 0 <= k <= self.n_units:
            raise ParameterError(f"precharge count {k} outside 0..{self.n_units}")
        return self.vdd * self._prefix[k] / self._prefix[-1]

    def units_for_fraction(self, fraction: float) -> int:
        """Nearest realizable precharge count for a code fraction.

        Exact only when n_units is a multiple of the code count; otherwise the
        reference is quantized (a reportable non-ideality)."""
        return int(math.floor(fraction * self.n_units + 0.5))


def dac_reference(dac: CapDac, precharged) -> float:
    """Charge-shared voltage for an arbitrary precharged unit subset."""
    idx = sorted({int(i) for i in precharged})
    if idx and (idx[0] < 0 or idx[-1] >= dac.n_units):
        raise ParameterError("precharged indices outside the unit range")
    if not idx:
        return 0.0
    weights = 1.0 + dac.unit_mismatch[idx]
    return dac.vdd * float(np.sum(weights)) / dac._prefix[-1]


# ---------------------------------------------------------------------------
# Conversion traces


@dataclass(frozen=True)
class CycleRecord:
    """One comparison cycle: the reference(s) offered and the decision taken."""

    mode: str
    references: tuple[float, ...]
    decision: int
    comparators: int = 1


@dataclass(frozen=True)
class AdcConversionTrace:
    input_v: float
    code: int
    cycles: tuple[CycleRecord, ...]
    comparisons: int
    saturated: bool = False

    def __post_init__(self) -> None:
        if self.comparisons != len(self.cycles):
            raise ShapeError("comparisons must equal the number of cycle records")
        if self.code < 0:
            raise ParameterError("codes are non-negative")

    @property
    def comparator_ops(self) -> int:
        return sum(c.comparators for c in self.cycles)


@dataclass(frozen=True)
class AdcConfig:
    bits: int = 5
    comparator_offset: float = 0.0
    mode: AdcMode = AdcMode.SAR
    flash_bits: int | None = None
    tree: "SearchTree | None" = None

    def __post_init__(self) -> None:
        if not 1 <= self.bits <= MAX_ADC_BITS:
            raise ConfigError(f"bits must be in 1..{MAX_ADC_BITS}, got {self.bits}")
        if self.mode is AdcMode.HYBRID:
            if self.flash_bits is None or not 1 <= self.flash_bits < self.bits:
                raise ConfigError("hybrid mode needs 1 <= flash_bits < bits")
        if self.mode is AdcMode.ASYMMETRIC and self.tree is None:
            raise ConfigError("asymmetric mode needs a search tree")


# ---------------------------------------------------------------------------
# SAR / Flash / hybrid conversion


def _is_saturated(vin: float, vdd: float) -> bool:
    return vin < 0.0 or vin > vdd


def sar_convert(vin: float, dac: CapDac, config: AdcConfig) -> AdcConversionTrace:
    """B-cycle successive approximation against the charge-sharing ladder.

    Cycle t offers the reference for the resolved prefix with bit (B-1-t)
    tentatively set; the first test is therefore midscale (half the units
    precharged).  Out-of-range inputs saturate to the end codes and are
    flagged, not rejected.
    """
    if config.mode is not AdcMode.SAR:
        raise ConfigError(f"sar_convert called with mode {config.mode.value}")
    bits = config.bits
    levels = 1 << bits
    code = 0
    cycles = []
    for t in range(bits):
        trial = code | (1 << (bits - 1 - t))
        ref = dac.reference_for_count(dac.units_for_fraction(trial / levels))
        bit = 1 if vin + config.comparator_offset > ref else 0
        if bit:
            code = trial
        cycles.append(CycleRecord("sar", (ref,), bit))
    return AdcConversionTrace(vin, code, tuple(cycles), bits,
                              _is_saturated(vin, dac.vdd))


class FlashResult(NamedTuple):
    msbs: int
    cycle: CycleRecord


def flash_convert_msbs(vin: float, dacs, m: int,
                       comparator_offset: float = 0.0) -> FlashResult:
    """Resolve the m most significant bits in one cycle.

    Needs 2^m - 1 reference arrays generating the fractions k/2^m in
    parallel; the thermometer count of references below the input is the MSB
    value.
    """
    need = (1 << m) - 1
    if len(dacs) != need:
        raise ConfigError(f"flash of {m} bits needs exactly {need} reference arrays")
    refs = []
    for k in range(1, need + 1):
        dac = dacs[k - 1]
        refs.append(dac.reference_for_count(dac.units_for_fraction(k / (1 << m))))
    msbs = sum(1 for r in refs if vin + comparator_offset > r)
    return FlashResult(msbs, CycleRecord("flash", tuple(refs), msbs, need))


@dataclass(frozen=True)
class HybridNetwork:
    """Reference-side arrays of a digitization cluster.

    arrays[0] is the nearest right array (backs the SAR tail); during the
    shared Flash cycle the first 2^m - 1 arrays each generate one reference.
    The compute array holding the MAV is named separately.
    """

    arrays: tuple[CapDac, ...]
    compute_name: str = "A1"
    names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.arrays:
            raise ConfigError("a hybrid network needs at least one reference array")
        if not self.names:
            object.__setattr__(
                self, "names",
                tuple(f"A{i + 2}" for i in range(len(self.arrays))))
        if len(self.names) != len(self.arrays):
            raise ConfigError("one name per reference array required")

    @classmethod
    def ideal(cls, n_units: int, count: int = 3, vdd: float = 1.0) -> "HybridNetwork":
        return cls(tuple(CapDac.ideal(n_units, vdd) for _ in range(count)))


def hybrid_convert(vin: float, network: HybridNetwork,
                   config: AdcConfig) -> AdcConversionTrace:
    """One Flash cycle for the leading bits, then a SAR tail: 1 + (B - m)
    cycles total, and the same code as pure SAR for ideal components."""
    if config.mode is not AdcMode.HYBRID:
        raise ConfigError(f"hybrid_convert called with mode {config.mode.value}")
    bits, m = config.bits, config.flash_bits
    need = (1 << m) - 1
    if len(network.arrays) < need:
        raise ConfigError(f"network has {len(network.arrays)} arrays, flash needs {need}")
    flash = flash_convert_msbs(vin, network.arrays[:need], m,
                               config.comparator_offset)
    code = flash.msbs << (bits - m)
    cycles = [flash.cycle]
    sar_dac = network.arrays[0]
    levels = 1 << bits
    for t in range(bits - m):
        trial = code | (1 << (bits - m - 1 - t))
        ref = sar_dac.reference_for_count(sar_dac.units_for_fraction(trial / levels))
        bit = 1 if vin + config.comparator_offset > ref else 0
        if bit:
            code = trial
        cycles.append(CycleRecord("sar", (ref,), bit))
    return AdcConversionTrace(vin, code, tuple(cycles), 1 + bits - m,
                              _is_saturated(vin, sar_dac.vdd))


@dataclass(frozen=True)
class TimelineEntry:
    cycle: int
    array: str
    state: str


def hybrid_timeline(network: HybridNetwork, config: AdcConfig) -> tuple[TimelineEntry, ...]:
    """Per-array busy/free schedule of one hybrid conversion.

    Cycle 1 is the shared Flash cycle (every reference array busy); the SAR
    tail keeps only the compute array and its nearest neighbour busy while the
    remaining arrays are free to serve other compute arrays.
    """
    if config.mode is not AdcMode.HYBRID:
        raise ConfigError("timeline is defined for hybrid mode")
    entries = [TimelineEntry(1, network.compute_name, "compare")]
    need = (1 << config.flash_bits) - 1
    for i, name in enumerate(network.names):
        entries.append(TimelineEntry(1, name, "flash-ref" if i < need else "free"))
    for t in range(config.bits - config.flash_bits):
        cycle = t + 2
        entries.append(TimelineEntry(cycle, network.compute_name, "compare"))
        for i, name in enumerate(network.names):
            entries.append(TimelineEntry(cycle, name, "sar-dac" if i == 0 else "free"))
    return tuple(entries)


# ---------------------------------------------------------------------------
# Search trees over output codes


@dataclass(frozen=True)
class SearchLeaf:
    code: int


@dataclass(frozen=True)
class SearchNode:
    threshold: int  # largest code reachable through the left child
    left: Union["SearchNode", SearchLeaf]
    right: Union["SearchNode", SearchLeaf]


@dataclass(frozen=True)
class SearchTree:
    """Order-preserving binary search tree over ADC output codes.

    Leaves are the codes 0..n-1 left to right; each internal node is a single
    comparison against the upper boundary of its threshold code, so any root
    path is realizable as a sequence of DAC references.
    """

    root: Union[SearchNode, SearchLeaf]
    n_codes: int

    def __post_init__(self) -> None:
        leaves = self.leaf_codes()
        if leaves != list(range(self.n_codes)):
            raise ShapeError("leaves must be the codes 0..n-1 in order")

    def leaf_codes(self) -> list[int]:
        out: list[int] = []

        def visit(node) -> None:
            if isinstance(node, SearchLeaf):
                out.append(node.code)
            else:
                visit(node.left)
                visit(node.right)

        visit(self.root)
        return out

    def depths(self) -> np.ndarray:
        d = np.zeros(self.n_codes, dtype=np.int64)

        def visit(node, depth: int) -> None:
            if isinstance(node, SearchLeaf):
                d[node.code] = depth
            else:
                visit(node.left, depth + 1)
                visit(node.right, depth + 1)

        visit(self.root, 0)
        return d

    def to_paren(self) -> str:
        def fmt(node) -> str:
            if isinstance(node, SearchLeaf):
                return str(node.code)
            return f"({fmt(node.left)} {fmt(node.right)})"

        return fmt(self.root)


def balanced_tree(bits: int) -> SearchTree:
    """The symmetric binary search over 2^bits codes (plain SAR order)."""
    n = 1 << bits

    def build(lo: int, hi: int):
        if lo == hi:
            return SearchLeaf(lo)
        mid = (lo + hi) // 2
        return SearchNode(mid, build(lo, mid), build(mid + 1, hi))

    return SearchTree(build(0, n - 1), n)


@dataclass(frozen=True)
class MavPmf:
    """Probability mass over 2^B quantizer codes (exact rationals)."""

    probabilities: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        probs = tuple(Fraction(p) for p in self.probabilities)
        object.__setattr__(self, "probabilities", probs)
        if any(p < 0 for p in probs):
            raise ParameterError("probabilities must be non-negative")
        if abs(sum(probs) - 1) > Fraction(1, 10**12):
            raise ParameterError("probabilities must sum to 1 within 1e-12")

    def __len__(self) -> int:
        return len(self.probabilities)

    def as_floats(self) -> np.ndarray:
        return np.array([float(p) for p in self.probabilities])


def mav_pmf(n_cols: int, bits: int, algebra: str = "unipolar") -> MavPmf:
    """Exact code distribution of the multiply-average under uniform random
    input bits and uniform +/-1 weights.

    unipolar (default): a column draws charge iff its input bit is 1 *and*
    its weight is the +1 cell -- a Bernoulli(1/4) match event per column.
    The count sum is binomial and the line voltage is count/n_cols of full
    scale, so the code distribution is skewed with its mode below midscale.

    signed: per-column signed product in {-1, 0, +1} with probabilities
    (1/4, 1/2, 1/4), mapped differentially onto the full scale; computed by
    direct convolution.
    """
    if n_cols < 1:
        raise ParameterError("n_cols must be positive")
    codes = 1 << bits
    probs = [Fraction(0)] * codes
    if algebra == "unipolar":
        denom = 4**n_cols
        for count in range(n_cols + 1):
            p = Fraction(math.comb(n_cols, count) * 3**(n_cols - count), denom)
            code = min((count * codes) // n_cols, codes - 1)
            probs[code] += p
    elif algebra == "signed":
        # distribution over the signed column sum, index s + n_cols
        dist = [Fraction(1)]
        step = (Fraction(1, 4), Fraction(1, 2), Fraction(1, 4))
        for _ in range(n_cols):
            nxt = [Fraction(0)] * (len(dist) + 2)
            for i, p in enumerate(dist):
                for off, q in enumerate(step):
                    nxt[i + off] += p * q
            dist = nxt
        for idx, p in enumerate(dist):
            code = min((idx * codes) // (2 * n_cols), codes - 1)
            probs[code] += p
    else:
        raise ParameterError(f"unknown MAV algebra '{algebra}'")
    return MavPmf(tuple(probs))


def build_asymmetric_tree(pmf: MavPmf) -> SearchTree:
    """Optimal alphabetic search tree for a code distribution.

    Interval dynamic programming over leaf ranges with the Knuth/Yao root
    bounds (the prefix-sum interval weight satisfies the quadrangle
    inequality), minimizing the expected number of comparisons exactly in
    rational arithmetic.  Ties pick the leftmost split, so the result is
    deterministic.
    """
    w = pmf.probabilities
    n = len(w)
    if n == 1:
        return SearchTree(SearchLeaf(0), 1)
    prefix = [Fraction(0)]
    for p in w:
        prefix.append(prefix[-1] + p)

    cost = [[Fraction(0)] * n for _ in range(n)]
    root = [[0] * n for _ in range(n)]
    for i in range(n):
        root[i][i] = i
    for length in range(2, n + 1):
        for i in range(n - length + 1):
            j = i + length - 1
            lo = max(i, root[i][j - 1])
            hi = min(j - 1, root[i + 1][j])
            best_cost = None
            best_s = lo
            for s in range(lo, hi + 1):
                c = cost[i][s] + cost[s + 1][j]
                if best_cost is None or c < best_cost:
                    best_cost = c
                    best_s = s
            cost[i][j] = best_cost + (prefix[j + 1] - prefix[i])
            root[i][j] = best_s

    def build(i: int, j: int):
        if i == j:
            return SearchLeaf(i)
        s = root[i][j]
        return SearchNode(s, build(i, s), build(s + 1, j))

    return SearchTree(build(0, n - 1), n)


def expected_comparisons(tree: SearchTree, pmf: MavPmf) -> float:
    """Mean root-to-leaf depth, i.e. expected comparisons per conversion."""
    if tree.n_codes != len(pmf):
        raise ShapeError(
            f"tree over {tree.n_codes} codes, pmf over {len(pmf)}")
    depths = tree.depths()
    return float(sum(p * int(d) for p, d in zip(pmf.probabilities, depths)))


def expected_comparisons_exact(tree: SearchTree, pmf: MavPmf) -> Fraction:
    if tree.n_codes != len(pmf):
        raise ShapeError(
            f"tree over {tree.n_codes} codes, pmf over {len(pmf)}")
    depths = tree.depths()
    return sum((p * int(d) for p, d in zip(pmf.probabilities, depths)),
               Fraction(0))


def asymmetric_convert(vin: float, dac: CapDac,
                       config: AdcConfig) -> AdcConversionTrace:
    """Walk the search tree, one DAC reference comparison per internal node."""
    if config.mode is not AdcMode.ASYMMETRIC:
        raise ConfigError(f"asymmetric_convert called with mode {config.mode.value}")
    tree = config.tree
    levels = 1 << config.bits
    if tree.n_codes != levels:
        raise ConfigError("tree size does not match the configured bit width")
    node = tree.root
    cycles = []
    while isinstance(node, SearchNode):
        frac = (node.threshold + 1) / levels  # upper boundary of the threshold code
        ref = dac.reference_for_count(dac.units_for_fraction(frac))
        bit = 1 if vin + config.comparator_offset > ref else 0
        cycles.append(CycleRecord("asym", (ref,), bit))
        node = node.right if bit else node.left
    return AdcConversionTrace(vin, node.code, tuple(cycles), len(cycles),
                              _is_saturated(vin, dac.vdd))


# ---------------------------------------------------------------------------
# Converter bundle, transfer curves, DNL/INL


@dataclass(frozen=True)
class MemoryAdc:
    """A digitizer: reference DAC(s) plus a conversion config.

    Flash mode uses the network's arrays for its parallel references when one
    is given, otherwise the single DAC stands in for each reference value.
    """

    dac: CapDac
    config: AdcConfig
    network: HybridNetwork | None = None

    def convert(self, vin: float) -> AdcConversionTrace:
        mode = self.config.mode
        if mode is AdcMode.SAR:
            return sar_convert(vin, self.dac, self.config)
        if mode is AdcMode.ASYMMETRIC:
            return asymmetric_convert(vin, self.dac, self.config)
        if mode is AdcMode.HYBRID:
            if self.network is None:
                raise ConfigError("hybrid mode needs a network")
            return hybrid_convert(vin, self.network, self.config)
        need = (1 << self.config.bits) - 1
        dacs = (self.network.arrays[:need] if self.network is not None
                else (self.dac,) * need)
        flash = flash_convert_msbs(vin, dacs, self.config.bits,
                                   self.config.comparator_offset)
        return AdcConversionTrace(vin, flash.msbs, (flash.cycle,), 1,
                                  _is_saturated(vin, self.dac.vdd))


def transfer_curve(adc: MemoryAdc, sweep_points) -> list[tuple[float, int]]:
    """Codes from repeated conversion over a monotone input sweep."""
    sweep = np.asarray(sweep_points, dtype=np.float64)
    if sweep.ndim != 1 or sweep.size == 0:
        raise ShapeError("sweep must be a non-empty 1-D vector")
    if np.any(np.diff(sweep) < 0):
        raise ShapeError("sweep must be monotone non-decreasing")
    return [(float(v), adc.convert(float(v)).code) for v in sweep]


class DnlInlResult(NamedTuple):
    dnl: np.ndarray
    inl: np.ndarray
    missing_codes: tuple[int, ...]


def dnl_inl(curve, n_codes: int | None = None) -> DnlInlResult:
    """Differential and integral non-linearity from a transfer curve.

    Step widths are measured by code occupancy of the (uniform) sweep;
    DNL_k = width_k / ideal_width - 1 and INL is its running sum.  Codes
    absent from the curve get DNL -1 and are listed in missing_codes.
    """
    codes = np.asarray([c for _, c in curve], dtype=np.int64)
    if codes.size == 0:
        raise ShapeError("curve is empty")
    n = int(n_codes) if n_codes is not None else int(codes.max()) + 1
    counts = np.bincount(codes, minlength=n).astype(np.float64)
    ideal = codes.size / n
    dnl = counts / ideal - 1.0
    inl = np.cumsum(dnl)
    missing = tuple(int(k) for k in np.nonzero(counts == 0)[0])
    return DnlInlResult(dnl, inl, missing)


def midcell_sweep(n_points: int, vdd: float = 1.0) -> np.ndarray:
    """Uniform sweep at cell-interior offsets, never landing on a code
    boundary when n_points is a multiple of the code count."""
    return (np.arange(n_points) + 0.5) * (vdd / n_points)
