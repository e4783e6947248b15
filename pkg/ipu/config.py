"""
IPU 配置与状态数据模型
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from numerics.models import ExactValue

# FP16 乘积指数范围 [-28, 30]
MIN_PRODUCT_EXP = -28
MAX_PRODUCT_EXP = 30

# 累加器相对其指数有 30 位小数
ACC_FRACTION_BITS = 30
# 加法树结果右侧拼接 (33 - w) 个 0 后的基准位宽
ACC_BASE_BITS = 33


class IpuMode(Enum):
    """IPU 运行模式"""
    INT = "int"
    FP = "fp"


def _ceil_log2(x: int) -> int:
    return (x - 1).bit_length() if x > 1 else 0


@dataclass(frozen=True)
class IpuConfig:
    """IPU(w) 参数"""
    n: int = 16                       # 输入通道数（2 的幂）
    w: int = 16                       # IPU 精度（加法树位宽）
    sw_precision: int = 16            # 软件精度，FP16 累加 16，FP32 累加 27
    max_accumulations: int = 1 << 15  # d
    charge_empty_partitions: bool = False

    def __post_init__(self):
        if self.n < 1 or self.n > 32 or self.n & (self.n - 1):
            raise ValueError(f"n 必须是 1..32 之间的 2 的幂，实际: {self.n}")
        if not 9 <= self.w <= 38:
            raise ValueError(f"IPU 精度 w 必须在 [9, 38]，实际: {self.w}")
        if self.sw_precision < 1:
            raise ValueError(f"软件精度必须为正，实际: {self.sw_precision}")
        if self.max_accumulations < 1:
            raise ValueError(f"最大累加次数必须为正，实际: {self.max_accumulations}")

    @property
    def t(self) -> int:
        """加法树增长位数 ceil(log2 n)"""
        return _ceil_log2(self.n)

    @property
    def l(self) -> int:
        """累加深度位数 ceil(log2 d)"""
        return _ceil_log2(self.max_accumulations)

    @property
    def sp(self) -> int:
        """安全精度 w - 9"""
        return self.w - 9

    @property
    def acc_width(self) -> int:
        return ACC_BASE_BITS + self.t + self.l

    @property
    def adder_width(self) -> int:
        return self.w + self.t


@dataclass(frozen=True)
class IterationResult:
    """一次半字节迭代（或 MC-IPU 的一个周期）的加法树输出"""
    adder_out: int
    max_exp: int
    scale: int          # adder_out 的权重指数
    extra_shift: int = 0

    @property
    def value(self) -> ExactValue:
        return ExactValue(self.adder_out, self.scale)


@dataclass(frozen=True)
class AccumulatorState:
    """
    非规格化累加器

    值 = mag * 2^(exp - 30)；INT 模式 exp 恒为 0。
    """
    exp: int = MIN_PRODUCT_EXP
    mag: int = 0

    @classmethod
    def for_int(cls) -> "AccumulatorState":
        return cls(exp=0, mag=0)

    def to_exact(self) -> ExactValue:
        return ExactValue(self.mag, self.exp - ACC_FRACTION_BITS)

    def __repr__(self):
        return f"<Acc exp={self.exp} mag={self.mag}>"
