"""
精确算术参考

exact_fp_ip 用 ExactValue（任意精度整数尾数 + 二进制指数）求和；
exact_fp_ip_fraction 用 fractions.Fraction 逆序两两求和，作为独立的第二条路径。
"""
from __future__ import annotations

from fractions import Fraction
from typing import List, Sequence, Union

from numerics.fp_codec import decode_fp16, value_to_exact
from numerics.models import DecomposedOperand, ExactValue, FloatValue

FpInput = Union[int, FloatValue]


def _as_value(x: FpInput) -> FloatValue:
    if isinstance(x, FloatValue):
        return x
    return decode_fp16(int(x))


def exact_fp_ip(a_vec: Sequence[FpInput], b_vec: Sequence[FpInput]) -> ExactValue:
    """sum(a_k * b_k)，无截断"""
    if len(a_vec) != len(b_vec):
        raise ValueError(f"向量长度不一致: {len(a_vec)} vs {len(b_vec)}")
    total = ExactValue()
    for x, y in zip(a_vec, b_vec):
        total = total + value_to_exact(_as_value(x)) * value_to_exact(_as_value(y))
    return total


def _to_fraction(v: FloatValue) -> Fraction:
    e = v.exp_unbiased - v.fmt.man_bits
    scale = Fraction(2) ** e
    return v.sign * v.magnitude * scale


def exact_fp_ip_fraction(a_vec: Sequence[FpInput], b_vec: Sequence[FpInput]) -> Fraction:
    """逆序两两归约的有理数求和"""
    terms: List[Fraction] = [
        _to_fraction(_as_value(x)) * _to_fraction(_as_value(y))
        for x, y in zip(a_vec, b_vec)
    ][::-1]
    if not terms:
        return Fraction(0)
    while len(terms) > 1:
        paired = [terms[k] + terms[k + 1] for k in range(0, len(terms) - 1, 2)]
        if len(terms) % 2:
            paired.append(terms[-1])
        terms = paired
    return terms[0]


def exact_iteration_value(
    a: Sequence[DecomposedOperand],
    b: Sequence[DecomposedOperand],
    i: int,
    j: int,
) -> ExactValue:
    """第 (i, j) 次半字节迭代的精确贡献"""
    total = ExactValue()
    for x, y in zip(a, b):
        p = x.signed_nibble(i) * y.signed_nibble(j)
        total = total + ExactValue(p, x.exp_unbiased + y.exp_unbiased + 4 * (i + j) - 22)
    return total
