"""
FP16/FP32 编解码测试
"""
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from numerics import (
    ExactValue,
    FP16,
    FP32,
    FpClass,
    NumericDomainError,
    bits_to_exact,
    decode_fp16,
    decode_fp32,
    decompose_fp16,
    decompose_int,
    fp16_to_exact,
    recompose_int,
    round_to_fp16,
    round_to_fp32,
)


class TestDecode:
    """测试位模式解码"""

    def test_one(self):
        """测试 1.0"""
        v = decode_fp16(0x3C00)
        assert (v.sign, v.exp_unbiased, v.magnitude, v.fp_class) == (1, 0, 0b10000000000, FpClass.NORMAL)

    def test_zero(self):
        """测试 +0 的指数固定为 -14"""
        v = decode_fp16(0x0000)
        assert (v.sign, v.exp_unbiased, v.magnitude, v.fp_class) == (1, -14, 0, FpClass.ZERO)

    def test_smallest_subnormal(self):
        """测试最小非正规数等于 2^-24"""
        v = decode_fp16(0x0001)
        assert (v.sign, v.exp_unbiased, v.magnitude, v.fp_class) == (1, -14, 1, FpClass.SUBNORMAL)
        assert fp16_to_exact(0x0001) == ExactValue(1, -24)

    def test_inf_nan_tagged(self):
        """测试 INF/NaN 只打标签，重构时拒绝"""
        assert decode_fp16(0x7C00).fp_class is FpClass.INF
        assert decode_fp16(0xFC00).sign == -1
        assert decode_fp16(0x7E00).fp_class is FpClass.NAN
        with pytest.raises(NumericDomainError):
            fp16_to_exact(0x7C00)

    def test_out_of_range_pattern(self):
        with pytest.raises(ValueError):
            decode_fp16(0x10000)

    def test_fp32(self):
        """测试 FP32 解码"""
        v = decode_fp32(0x3F800000)
        assert (v.exp_unbiased, v.magnitude, v.fp_class) == (0, 1 << 23, FpClass.NORMAL)
        assert decode_fp32(0x00000001).exp_unbiased == -126
        assert bits_to_exact(0xC0400000, FP32) == ExactValue(-3, 0)

    def test_exhaustive_reconstruction(self):
        """测试全部 65536 个 FP16 位模式：重构值与 numpy 一致，分解可还原"""
        all_bits = np.arange(1 << 16, dtype=np.uint16)
        ref = all_bits.view(np.float16).astype(np.float64)
        for bits in range(1 << 16):
            v = decode_fp16(bits)
            if not v.is_finite:
                assert np.isinf(ref[bits]) or np.isnan(ref[bits])
                continue
            exact = fp16_to_exact(bits)
            assert float(exact) == ref[bits]

            d = decompose_fp16(v)
            assert d.nibble(0) & 1 == 0
            assert all(0 <= nib <= 15 for nib in d.nibbles)
            assert ExactValue(d.sign * d.significand, d.exp_unbiased - 11) == exact


class TestDecompose:
    """测试半字节分解"""

    @pytest.mark.parametrize("bits,expected", [
        (0x3C00, (8, 0, 0)),     # 1.0
        (0x3C01, (8, 0, 2)),     # 1 + 2^-10
        (0x3E00, (12, 0, 0)),    # 1.5
    ])
    def test_fp16_examples(self, bits, expected):
        d = decompose_fp16(decode_fp16(bits))
        assert d.nibbles == expected

    def test_reconstruction_one_plus_ulp(self):
        """测试 (8*256+2)*2^-11 = 1.0009765625"""
        d = decompose_fp16(decode_fp16(0x3C01))
        assert ExactValue(d.significand, d.exp_unbiased - 11).to_fraction() == Fraction(10250, 10240)

    def test_sign_carried_separately(self):
        d = decompose_fp16(decode_fp16(0xBC00))
        assert d.sign == -1
        assert d.signed_nibble(2) == -8

    def test_rejects_inf(self):
        with pytest.raises(NumericDomainError):
            decompose_fp16(decode_fp16(0x7C00))

    @pytest.mark.parametrize("value,width,signed,expected", [
        (-2, 4, True, [-2]),
        (-100, 8, True, [12, -7]),
        (300, 12, True, [12, 2, 1]),
        (255, 8, False, [15, 15]),
    ])
    def test_int_examples(self, value, width, signed, expected):
        assert decompose_int(value, width, signed) == expected

    def test_int8_exhaustive(self):
        """测试全部 INT8 / UINT8 值可还原"""
        for v in range(-128, 128):
            nibs = decompose_int(v, 8)
            assert -8 <= nibs[-1] <= 7
            assert recompose_int(nibs) == v
        for v in range(256):
            assert recompose_int(decompose_int(v, 8, signed=False)) == v

    @settings(max_examples=2000)
    @given(st.integers(-2048, 2047))
    def test_int12_property(self, v):
        nibs = decompose_int(v, 12)
        assert all(0 <= nib <= 15 for nib in nibs[:-1])
        assert recompose_int(nibs) == v

    def test_int_out_of_range(self):
        with pytest.raises(NumericDomainError):
            decompose_int(8, 4)
        with pytest.raises(NumericDomainError):
            decompose_int(-1, 8, signed=False)
        with pytest.raises(ValueError):
            decompose_int(1, 16)


class TestRounding:
    """测试就近舍入（ties-to-even）"""

    def test_examples(self):
        assert round_to_fp16(ExactValue(1, 0)) == 0x3C00
        assert round_to_fp16(ExactValue(1, -25)) == 0x0000
        # 2049 * 2^-11 恰好在 1.0 与 1+2^-10 中点，取偶
        assert round_to_fp16(ExactValue(2049, -11)) == 0x3C00
        assert round_to_fp16(ExactValue(2051, -11)) == 0x3C02

    def test_overflow_and_zero(self):
        assert round_to_fp16(ExactValue(1, 16)) == 0x7C00
        assert round_to_fp16(ExactValue(-1, 16)) == 0xFC00
        assert round_to_fp16(0) == 0x0000
        assert round_to_fp16(ExactValue(-1, -30)) == 0x8000

    def test_subnormal_boundary(self):
        """测试舍入进位到最小正规数"""
        assert round_to_fp16(ExactValue((1 << 11) - 1, -25)) == 0x0400

    def test_roundtrip_all_finite(self):
        """测试所有有限 FP16 值解码后再舍入得到原位模式（-0 除外）"""
        for bits in range(1 << 16):
            v = decode_fp16(bits)
            if not v.is_finite or bits == 0x8000:
                continue
            assert round_to_fp16(fp16_to_exact(bits)) == bits

    @settings(max_examples=3000)
    @given(st.floats(allow_nan=False, allow_infinity=False, width=64))
    def test_matches_numpy_fp16(self, x):
        """测试与 numpy 的 float64 -> float16 转换一致"""
        with np.errstate(over="ignore"):
            expected = int(np.array([x]).astype(np.float16).view(np.uint16)[0])
        got = round_to_fp16(Fraction(x))
        if x == 0.0:
            assert got & 0x7FFF == 0
        else:
            assert got == expected

    @settings(max_examples=3000)
    @given(st.floats(allow_nan=False, allow_infinity=False, width=64))
    def test_matches_numpy_fp32(self, x):
        with np.errstate(over="ignore"):
            expected = int(np.array([x]).astype(np.float32).view(np.uint32)[0])
        got = round_to_fp32(Fraction(x))
        if x == 0.0:
            assert got & 0x7FFFFFFF == 0
        else:
            assert got == expected


class TestExactValue:
    """测试精确二进制有理数"""

    def test_canonical_form(self):
        v = ExactValue(12, 3)
        assert (v.mantissa, v.exponent) == (3, 5)
        assert ExactValue(0, 7) == ExactValue()

    @given(st.integers(-10**6, 10**6), st.integers(-40, 40),
           st.integers(-10**6, 10**6), st.integers(-40, 40))
    def test_arithmetic_matches_fraction(self, m1, e1, m2, e2):
        a, b = ExactValue(m1, e1), ExactValue(m2, e2)
        fa, fb = a.to_fraction(), b.to_fraction()
        assert (a + b).to_fraction() == fa + fb
        assert (a - b).to_fraction() == fa - fb
        assert (a * b).to_fraction() == fa * fb
        assert (a < b) == (fa < fb)

    def test_rejects_non_dyadic(self):
        with pytest.raises(ValueError):
            ExactValue.coerce(Fraction(1, 3))

    def test_fp16_format_constants(self):
        assert (FP16.bias, FP16.emin, FP16.total_bits) == (15, -14, 16)
        assert (FP32.bias, FP32.emin) == (127, -126)
