"""
误差指标与误差上界
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

from numerics.fp_codec import decode_float, round_to_format, value_to_exact
from numerics.models import DecomposedOperand, ExactValue, FloatFormat, FP16, format_by_name

from ipu.alignment import run_ehu
from ipu.config import IpuConfig
from ipu.core import approx_nibble_iteration, to_operand

from .exact import exact_iteration_value

# 5 位有符号乘法器的最大乘积
MAX_NIBBLE_PRODUCT = 225


@dataclass(frozen=True)
class ErrorReport:
    """
    单个样本的误差

    abs_error / are_percent 以精确结果按同一格式舍入后的值（CPU 结果）为参照；
    abs_error_exact 以未舍入的精确值为参照。ARE 无定义时为 NaN。
    """
    abs_error: float
    are_percent: float
    contaminated_bits: int
    abs_error_exact: float
    approx_bits: int
    ref_bits: int

    @property
    def matches(self) -> bool:
        return self.contaminated_bits == 0

    @property
    def are_defined(self) -> bool:
        return not math.isnan(self.are_percent)


def _bits_to_value(bits: int, fmt: FloatFormat) -> Optional[ExactValue]:
    v = decode_float(bits, fmt)
    if not v.is_finite:
        return None
    return value_to_exact(v)


def error_metrics(
    approx_bits: int,
    exact: ExactValue,
    fmt: Union[str, FloatFormat] = FP16,
) -> ErrorReport:
    """
    近似结果位模式与精确值之间的三项误差指标

    Args:
        approx_bits: 近似 FP-IP 的结果位模式
        exact: 精确内积
        fmt: 结果格式

    Returns:
        ErrorReport；contaminated_bits = bit_length(approx_bits ^ round(exact))
    """
    fmt = format_by_name(fmt)
    ref_bits = round_to_format(exact, fmt)
    approx = _bits_to_value(approx_bits, fmt)
    ref = _bits_to_value(ref_bits, fmt)

    if approx is None or ref is None:
        abs_err = 0.0 if approx_bits == ref_bits else math.inf
        abs_err_exact = math.inf
        are = 0.0 if approx_bits == ref_bits else math.nan
    else:
        abs_err = float(abs(approx - ref))
        abs_err_exact = float(abs(approx - exact))
        if ref.is_zero:
            are = 0.0 if approx.is_zero else math.nan
        else:
            are = float((abs(approx - ref) * 100).to_fraction() / abs(ref).to_fraction())

    return ErrorReport(
        abs_error=abs_err,
        are_percent=are,
        contaminated_bits=(approx_bits ^ ref_bits).bit_length(),
        abs_error_exact=abs_err_exact,
        approx_bits=approx_bits,
        ref_bits=ref_bits,
    )


def theorem1_bound(i: int, j: int, precision: int, max_exp: int, n: int) -> ExactValue:
    """单次近似半字节迭代的误差上界 225 * 2^(4(i+j)-22) * 2^(max-precision) * (n-1)"""
    if n < 1:
        raise ValueError(f"n 必须 >= 1，实际: {n}")
    if precision < 1:
        raise ValueError(f"precision 必须 >= 1，实际: {precision}")
    return ExactValue(MAX_NIBBLE_PRODUCT * (n - 1), 4 * (i + j) - 22 + max_exp - precision)


def iteration_error(
    a_vec: Sequence,
    b_vec: Sequence,
    i: int,
    j: int,
    cfg: IpuConfig,
    precision: Optional[int] = None,
) -> Tuple[ExactValue, ExactValue]:
    """
    单次近似迭代的绝对误差及其上界

    不做软件精度屏蔽，只剔除零乘积通道，误差全部来自局部截断。
    precision 默认取安全精度 w-9。

    Returns:
        (|近似 - 精确|, 上界)
    """
    a: Sequence[DecomposedOperand] = [to_operand(x) for x in a_vec]
    b: Sequence[DecomposedOperand] = [to_operand(y) for y in b_vec]
    schedule = run_ehu(a, b, sw_precision=1 << 16, sp=max(cfg.sp, 1))

    r = approx_nibble_iteration(a, b, i, j, schedule.diffs, schedule.gated, cfg, schedule.max_exp)
    approx = ExactValue(r.adder_out, r.scale)
    exact = exact_iteration_value(a, b, i, j)

    active = len(a) - sum(schedule.gated)
    bound = theorem1_bound(
        i, j,
        precision if precision is not None else max(cfg.sp, 1),
        schedule.max_exp,
        max(active, 1),
    )
    return abs(approx - exact), bound
