"""Frequency-domain compute-in-memory behavioral simulator.

Walsh-Hadamard transform kernels, bitplane-wise crossbar evaluation with
early termination, a memory-immersed SAR/Flash/hybrid ADC network with
asymmetric-search statistics, and the accompanying cost model.
"""

from .adc import (
    AdcConfig,
    AdcConversionTrace,
    AdcMode,
    CapDac,
    CycleRecord,
    HybridNetwork,
    MavPmf,
    MemoryAdc,
    SearchLeaf,
    SearchNode,
    SearchTree,
    asymmetric_convert,
    balanced_tree,
    build_asymmetric_tree,
    dac_reference,
    dnl_inl,
    expected_comparisons,
    flash_convert_msbs,
    hybrid_convert,
    hybrid_timeline,
    mav_pmf,
    midcell_sweep,
    sar_convert,
    transfer_curve,
)
from .cost import (
    ArchCost,
    CostTable,
    LayerKind,
    LayerShape,
    MacCount,
    comparator_count,
    latency_model,
    layer_macs,
    layer_params,
    ratio_report,
)
from .crossbar import (
    CrossbarArray,
    PlaneOrder,
    TerminationMode,
    TransformResult,
    bitplane_transform,
    chain_layer,
    comparator,
    mav,
    program,
)
from .errors import (
    CapacityError,
    ConfigError,
    CrossbarProgrammingError,
    FdcimError,
    ParameterError,
    ShapeError,
)
from .quant import (
    BitplaneTensor,
    FixedPointVector,
    Signedness,
    ThresholdParams,
    from_bitplanes,
    quantize,
    soft_threshold,
    soft_threshold_grads,
    to_bitplanes,
)
from .wht import (
    BwhtPlan,
    Direction,
    Ordering,
    WalshMatrix,
    bwht_apply,
    bwht_plan,
    fwht,
    hadamard,
    sequency_permutation,
    sign_change_counts,
    walsh,
)

__version__ = "0.1.0"
