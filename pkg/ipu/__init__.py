"""ipu: IPU(w) 黄金模型、EHU 与 MC-IPU 调度。"""

from .config import IpuConfig, IpuMode, AccumulatorState, IterationResult, MIN_PRODUCT_EXP, MAX_PRODUCT_EXP
from .alignment import (
    AlignmentSchedule,
    CycleSlot,
    lane_label,
    product_exponents,
    alignment_diffs,
    mask_beyond_precision,
    schedule_cycles,
    schedule_cycle_count,
    run_ehu,
)
from .core import (
    ITERATION_ORDER,
    FpIpStats,
    IntIpResult,
    nibble_product,
    local_shift_truncate,
    approx_nibble_iteration,
    mc_cycle_iteration,
    accumulator_shift,
    accumulate,
    int_ip,
    to_operand,
    fp_ip_step,
    fp_ip_accumulate,
    fp_ip_approx,
    normalize_and_round,
)
from .trace import IpuTrace, trace_fp_ip

__all__ = [
    "IpuConfig",
    "IpuMode",
    "AccumulatorState",
    "IterationResult",
    "MIN_PRODUCT_EXP",
    "MAX_PRODUCT_EXP",
    "AlignmentSchedule",
    "CycleSlot",
    "lane_label",
    "product_exponents",
    "alignment_diffs",
    "mask_beyond_precision",
    "schedule_cycles",
    "schedule_cycle_count",
    "run_ehu",
    "ITERATION_ORDER",
    "FpIpStats",
    "IntIpResult",
    "nibble_product",
    "local_shift_truncate",
    "approx_nibble_iteration",
    "mc_cycle_iteration",
    "accumulator_shift",
    "accumulate",
    "int_ip",
    "to_operand",
    "fp_ip_step",
    "fp_ip_accumulate",
    "fp_ip_approx",
    "normalize_and_round",
    "IpuTrace",
    "trace_fp_ip",
]
