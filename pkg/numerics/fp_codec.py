"""
FP16/FP32 编解码模块

- 位模式解码为 FloatValue（含类别标签）
- FP16 分解为三个半字节操作数，整数按半字节切片
- 精确值按 IEEE 就近舍入（ties-to-even）编码回位模式
"""
from __future__ import annotations

from typing import List

from .errors import NumericDomainError
from .models import (
    DecomposedOperand,
    ExactValue,
    FloatFormat,
    FloatValue,
    FpClass,
    FP16,
    FP32,
    Number,
)

INT_WIDTHS = (4, 8, 12)


def decode_float(bits: int, fmt: FloatFormat) -> FloatValue:
    """
    解码 IEEE 位模式（全函数，INF/NaN 仅打标签）

    Args:
        bits: 位模式
        fmt: 浮点格式

    Returns:
        FloatValue，非正规数与零的指数固定为 1 - bias
    """
    if not 0 <= bits < (1 << fmt.total_bits):
        raise ValueError(f"{fmt.name} 位模式越界: {bits:#x}")

    sign = -1 if bits & fmt.sign_mask else 1
    raw_exp = (bits >> fmt.man_bits) & fmt.max_raw_exp
    frac = bits & ((1 << fmt.man_bits) - 1)

    if raw_exp == 0:
        fp_class = FpClass.ZERO if frac == 0 else FpClass.SUBNORMAL
        return FloatValue(sign, fmt.emin, frac, fp_class, fmt)

    if raw_exp == fmt.max_raw_exp:
        fp_class = FpClass.INF if frac == 0 else FpClass.NAN
        return FloatValue(sign, raw_exp - fmt.bias, frac, fp_class, fmt)

    return FloatValue(sign, raw_exp - fmt.bias, frac | (1 << fmt.man_bits), FpClass.NORMAL, fmt)


def decode_fp16(bits: int) -> FloatValue:
    return decode_float(bits, FP16)


def decode_fp32(bits: int) -> FloatValue:
    return decode_float(bits, FP32)


def _require_finite(v: FloatValue):
    if not v.is_finite:
        raise NumericDomainError(f"不支持 INF/NaN 输入: {v!r}")


def value_to_exact(v: FloatValue) -> ExactValue:
    """有限值的精确重构"""
    _require_finite(v)
    return ExactValue(v.sign * v.magnitude, v.exp_unbiased - v.fmt.man_bits)


def bits_to_exact(bits: int, fmt: FloatFormat = FP16) -> ExactValue:
    return value_to_exact(decode_float(bits, fmt))


def fp16_to_exact(bits: int) -> ExactValue:
    return bits_to_exact(bits, FP16)


def decompose_fp16(v: FloatValue) -> DecomposedOperand:
    """
    FP16 -> [N2, N1, N0]

    N2 = 幅值位 10..7，N1 = 位 6..3，N0 = 位 2..0 后接一个 0。
    符号单独携带，在 5 位有符号乘法器处与每个半字节相乘。
    """
    _require_finite(v)
    if v.fmt != FP16:
        raise NumericDomainError(f"只能分解 FP16，实际: {v.fmt.name}")

    m = v.magnitude
    n2 = (m >> 7) & 0xF
    n1 = (m >> 3) & 0xF
    n0 = (m & 0x7) << 1
    return DecomposedOperand(
        sign=v.sign,
        nibbles=(n2, n1, n0),
        exp_unbiased=v.exp_unbiased,
        is_zero=(m == 0),
    )


def decompose_int(value: int, width: int, signed: bool = True) -> List[int]:
    """
    整数按半字节切片（小端）

    低位半字节无符号 [0,15]；最高半字节有符号时为补码值 [-8,7]，
    无符号时为 [0,15]。满足 sum(nib_k * 16^k) == value。
    """
    if width not in INT_WIDTHS:
        raise ValueError(f"不支持的整数位宽: {width}")

    if signed:
        lo, hi = -(1 << (width - 1)), (1 << (width - 1)) - 1
    else:
        lo, hi = 0, (1 << width) - 1
    if not lo <= value <= hi:
        raise NumericDomainError(
            f"{value} 超出 {'' if signed else 'U'}INT{width} 范围 [{lo}, {hi}]"
        )

    k = width // 4
    nibbles = [(value >> (4 * i)) & 0xF for i in range(k - 1)]
    # Python 的 >> 是算术右移，最高半字节自然得到补码值
    top = value >> (4 * (k - 1))
    nibbles.append(top if signed else top & 0xF)
    return nibbles


def recompose_int(nibbles: List[int]) -> int:
    return sum(nib << (4 * i) for i, nib in enumerate(nibbles))


def round_to_format(value: Number, fmt: FloatFormat) -> int:
    """
    精确值 -> IEEE 位模式

    就近舍入、平局取偶；上溢为 INF；下溢按 IEEE 渐进下溢到非正规数或零。
    精确零编码为 +0，负数下溢为 -0。
    """
    value = ExactValue.coerce(value)
    if value.is_zero:
        return 0

    sign_bit = fmt.sign_mask if value.mantissa < 0 else 0
    m = abs(value.mantissa)
    e = value.exponent

    # 结果量子（最低有效位）的指数
    top_exp = e + m.bit_length() - 1
    q = max(top_exp, fmt.emin) - fmt.man_bits

    if e >= q:
        sig = m << (e - q)
    else:
        shift = q - e
        sig = m >> shift
        rem = m & ((1 << shift) - 1)
        half = 1 << (shift - 1)
        if rem > half or (rem == half and sig & 1):
            sig += 1
        if sig == 1 << (fmt.man_bits + 1):
            sig >>= 1
            q += 1

    if sig >= 1 << fmt.man_bits:
        raw_exp = q + fmt.man_bits + fmt.bias
        if raw_exp >= fmt.max_raw_exp:
            return sign_bit | (fmt.max_raw_exp << fmt.man_bits)
        return sign_bit | (raw_exp << fmt.man_bits) | (sig - (1 << fmt.man_bits))

    # 非正规数（sig 可能为 0）
    return sign_bit | sig


def round_to_fp16(value: Number) -> int:
    return round_to_format(value, FP16)


def round_to_fp32(value: Number) -> int:
    return round_to_format(value, FP32)
