"""
数值数据模型定义
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Tuple, Union


class FpClass(Enum):
    """IEEE 浮点数类别"""
    ZERO = "zero"
    SUBNORMAL = "subnormal"
    NORMAL = "normal"
    INF = "inf"
    NAN = "nan"


@dataclass(frozen=True)
class FloatFormat:
    """IEEE 二进制浮点格式"""
    name: str
    exp_bits: int
    man_bits: int  # 不含隐含位

    @property
    def bias(self) -> int:
        return (1 << (self.exp_bits - 1)) - 1

    @property
    def total_bits(self) -> int:
        return 1 + self.exp_bits + self.man_bits

    @property
    def emin(self) -> int:
        """最小正规数的无偏指数（非正规数也使用该指数）"""
        return 1 - self.bias

    @property
    def max_raw_exp(self) -> int:
        return (1 << self.exp_bits) - 1

    @property
    def sign_mask(self) -> int:
        return 1 << (self.total_bits - 1)


FP16 = FloatFormat("fp16", exp_bits=5, man_bits=10)
FP32 = FloatFormat("fp32", exp_bits=8, man_bits=23)

FORMATS = {fmt.name: fmt for fmt in (FP16, FP32)}


def format_by_name(fmt) -> FloatFormat:
    """"fp16"/"fp32" 或 FloatFormat -> FloatFormat"""
    if isinstance(fmt, FloatFormat):
        return fmt
    try:
        return FORMATS[str(fmt).lower()]
    except KeyError:
        raise ValueError(f"不支持的累加格式: {fmt}") from None


@dataclass(frozen=True)
class FloatValue:
    """
    解码后的浮点数

    有限值满足: value = sign * magnitude * 2^(exp_unbiased - man_bits)
    """
    sign: int                 # +1 / -1
    exp_unbiased: int
    magnitude: int            # 正规数含隐含的 1
    fp_class: FpClass
    fmt: FloatFormat = FP16

    @property
    def is_finite(self) -> bool:
        return self.fp_class not in (FpClass.INF, FpClass.NAN)

    @property
    def is_zero(self) -> bool:
        return self.fp_class is FpClass.ZERO

    def __repr__(self):
        return (f"<{self.fmt.name} {'-' if self.sign < 0 else '+'}"
                f"{self.magnitude:#x}*2^{self.exp_unbiased - self.fmt.man_bits} {self.fp_class.value}>")


# FP16 是 IPU 输入的唯一浮点格式
Fp16Value = FloatValue


@dataclass(frozen=True)
class DecomposedOperand:
    """
    乘法器侧的半字节操作数

    nibbles 按 [N2, N1, N0] 存放，N0 最低位是插入的 0：
    (N2*2^8 + N1*2^4 + N0) * 2^(exp_unbiased - 11) * sign 等于原值。
    """
    sign: int
    nibbles: Tuple[int, int, int]
    exp_unbiased: int
    is_zero: bool = False

    def nibble(self, k: int) -> int:
        """第 k 个半字节（k=0 为最低有效位 N0）"""
        return self.nibbles[2 - k]

    def signed_nibble(self, k: int) -> int:
        """送入 5 位有符号乘法器的值"""
        return self.sign * self.nibbles[2 - k]

    @property
    def significand(self) -> int:
        n2, n1, n0 = self.nibbles
        return (n2 << 8) + (n1 << 4) + n0


Number = Union[int, Fraction, "ExactValue"]


@dataclass(frozen=True)
class ExactValue:
    """
    精确二进制有理数 mantissa * 2^exponent

    规范形式：mantissa 为奇数，或 mantissa == 0 且 exponent == 0。
    """
    mantissa: int = 0
    exponent: int = 0

    def __post_init__(self):
        m, e = self.mantissa, self.exponent
        if m == 0:
            e = 0
        else:
            tz = (m & -m).bit_length() - 1
            if tz:
                m >>= tz
                e += tz
        object.__setattr__(self, "mantissa", m)
        object.__setattr__(self, "exponent", e)

    @classmethod
    def coerce(cls, value: Number) -> "ExactValue":
        if isinstance(value, ExactValue):
            return value
        if isinstance(value, int):
            return cls(value, 0)
        if isinstance(value, Fraction):
            return cls.from_fraction(value)
        raise TypeError(f"无法转换为 ExactValue: {value!r}")

    @classmethod
    def from_fraction(cls, value: Fraction) -> "ExactValue":
        den = value.denominator
        if den & (den - 1):
            raise ValueError(f"分母不是 2 的幂，不是二进制有理数: {value}")
        return cls(value.numerator, -(den.bit_length() - 1))

    def to_fraction(self) -> Fraction:
        if self.exponent >= 0:
            return Fraction(self.mantissa << self.exponent)
        return Fraction(self.mantissa, 1 << -self.exponent)

    def __float__(self) -> float:
        # Fraction -> float 是正确舍入的
        return float(self.to_fraction())

    @property
    def is_zero(self) -> bool:
        return self.mantissa == 0

    @property
    def sign(self) -> int:
        return (self.mantissa > 0) - (self.mantissa < 0)

    def scaled(self, k: int) -> "ExactValue":
        """乘以 2^k"""
        return ExactValue(self.mantissa, self.exponent + k)

    def __neg__(self) -> "ExactValue":
        return ExactValue(-self.mantissa, self.exponent)

    def __abs__(self) -> "ExactValue":
        return ExactValue(abs(self.mantissa), self.exponent)

    def __add__(self, other: Number) -> "ExactValue":
        other = ExactValue.coerce(other)
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        e = min(self.exponent, other.exponent)
        m = (self.mantissa << (self.exponent - e)) + (other.mantissa << (other.exponent - e))
        return ExactValue(m, e)

    __radd__ = __add__

    def __sub__(self, other: Number) -> "ExactValue":
        return self + (-ExactValue.coerce(other))

    def __rsub__(self, other: Number) -> "ExactValue":
        return ExactValue.coerce(other) - self

    def __mul__(self, other: Number) -> "ExactValue":
        other = ExactValue.coerce(other)
        return ExactValue(self.mantissa * other.mantissa, self.exponent + other.exponent)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        try:
            other = ExactValue.coerce(other)
        except TypeError:
            return NotImplemented
        return self.mantissa == other.mantissa and self.exponent == other.exponent

    def __hash__(self):
        return hash((self.mantissa, self.exponent))

    def __lt__(self, other: Number) -> bool:
        return (self - other).mantissa < 0

    def __le__(self, other: Number) -> bool:
        return (self - other).mantissa <= 0

    def __gt__(self, other: Number) -> bool:
        return (self - other).mantissa > 0

    def __ge__(self, other: Number) -> bool:
        return (self - other).mantissa >= 0

    def __repr__(self):
        return f"ExactValue({self.mantissa}*2^{self.exponent})"
