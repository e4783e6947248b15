"""oracle: 精确参考、误差指标、合成采样与精度研究。"""

from .exact import exact_fp_ip, exact_fp_ip_fraction, exact_iteration_value
from .metrics import ErrorReport, error_metrics, theorem1_bound, iteration_error
from .sampling import (
    DISTRIBUTIONS,
    DEFAULT_PARAMS,
    sample_vectors,
    sample_tensor,
    safe_shift_vectors,
    to_fp16_bits,
)
from .sweep import SWEEP_COLUMNS, BOUND_COLUMNS, precision_sweep, bound_check

__all__ = [
    "exact_fp_ip",
    "exact_fp_ip_fraction",
    "exact_iteration_value",
    "ErrorReport",
    "error_metrics",
    "theorem1_bound",
    "iteration_error",
    "DISTRIBUTIONS",
    "DEFAULT_PARAMS",
    "sample_vectors",
    "sample_tensor",
    "safe_shift_vectors",
    "to_fp16_bits",
    "SWEEP_COLUMNS",
    "BOUND_COLUMNS",
    "precision_sweep",
    "bound_check",
]
