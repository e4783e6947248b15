"""
Tile 模拟器数据模型
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from numerics.errors import MappingError
from oracle.sampling import DISTRIBUTIONS, MAX_EXP_SPREAD, sample_tensor, to_fp16_bits

from ipu.config import IpuConfig

# 对齐差取值 0..58
HISTOGRAM_BINS = 59
# 每次 FP-IP 的半字节迭代数
NIBBLE_ITERATIONS = 9


@dataclass(frozen=True)
class TileConfig:
    """
    卷积 tile 配置

    (C, K, Ho, Wo) 展开：C 映射到 IPU 输入通道，K*Ho*Wo 个 MC-IPU。
    """
    C: int = 8
    K: int = 8
    Ho: int = 2
    Wo: int = 2
    cluster_size: int = 1
    buffer_depth: int = 4
    num_tiles: int = 4
    w: int = 16
    sw_precision: int = 16
    charge_empty_partitions: bool = False
    acc_format: str = "fp16"
    ipu_inputs: Optional[int] = None     # n，缺省等于 C

    def __post_init__(self):
        for name in ("C", "K", "Ho", "Wo", "cluster_size", "buffer_depth", "num_tiles"):
            if getattr(self, name) < 1:
                raise ValueError(f"TileConfig.{name} 必须为正，实际: {getattr(self, name)}")
        if self.ipus_per_tile % self.cluster_size:
            raise ValueError(
                f"cluster_size={self.cluster_size} 不能整除每 tile 的 IPU 数 {self.ipus_per_tile}"
            )
        if self.acc_format not in ("fp16", "fp32"):
            raise ValueError(f"不支持的累加格式: {self.acc_format}")
        if self.C > self.n:
            raise MappingError(f"C 展开 {self.C} 大于 IPU 输入数 {self.n}")
        # 触发 IpuConfig 的参数检查
        self.ipu_config()

    @classmethod
    def small(cls, **overrides) -> "TileConfig":
        """小 tile (8, 8, 2, 2)"""
        return cls(**{"C": 8, "K": 8, "Ho": 2, "Wo": 2, **overrides})

    @classmethod
    def big(cls, **overrides) -> "TileConfig":
        """大 tile (16, 16, 2, 2)"""
        return cls(**{"C": 16, "K": 16, "Ho": 2, "Wo": 2, **overrides})

    @property
    def n(self) -> int:
        return self.ipu_inputs if self.ipu_inputs is not None else self.C

    @property
    def unroll(self) -> Tuple[int, int, int, int]:
        return self.C, self.K, self.Ho, self.Wo

    @property
    def ipus_per_tile(self) -> int:
        return self.K * self.Ho * self.Wo

    @property
    def num_clusters(self) -> int:
        return self.ipus_per_tile // self.cluster_size

    @property
    def sp(self) -> int:
        return self.w - 9

    def ipu_config(self) -> IpuConfig:
        return IpuConfig(
            n=self.n,
            w=self.w,
            sw_precision=self.sw_precision,
            charge_empty_partitions=self.charge_empty_partitions,
        )

    def with_(self, **changes) -> "TileConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class DataSource:
    """
    层输入数据来源

    kind:
        synthetic: 按分布采样（exp_spread 放大动态范围）
        exponent: 指数在 exp_range 内均匀分布的随机符号/尾数
        constant: 全部元素取 value
        array: 直接给出 FP16 位模式（张量文件读入后也转成该形式）
    """
    kind: str = "synthetic"
    dist: str = "normal"
    params: Dict[str, float] = field(default_factory=dict)
    exp_spread: int = 0
    exp_range: Tuple[int, int] = (0, 0)
    value: float = 1.0
    ifm: Optional[np.ndarray] = field(default=None, compare=False)
    weights: Optional[np.ndarray] = field(default=None, compare=False)

    KINDS = ("synthetic", "exponent", "constant", "array")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"未知数据来源: {self.kind}，可选: {self.KINDS}")
        if self.kind == "synthetic" and self.dist not in DISTRIBUTIONS:
            raise ValueError(f"未知分布: {self.dist}")
        if not 0 <= self.exp_spread <= MAX_EXP_SPREAD:
            raise ValueError(f"exp_spread 必须在 0..{MAX_EXP_SPREAD} 内: {self.exp_spread}")
        if self.kind == "exponent":
            lo, hi = self.exp_range
            if not -14 <= lo <= hi <= 15:
                raise ValueError(f"exp_range 必须在 [-14, 15] 内且 lo <= hi: {self.exp_range}")
        if self.kind == "array" and (self.ifm is None or self.weights is None):
            raise ValueError("array 数据来源需要 ifm 与 weights")

    def materialize(self, layer: "LayerSpec", seed: int) -> Tuple[np.ndarray, np.ndarray]:
        """生成 (ifm[C,H,W], weights[K,C,R,S]) 的 FP16 位模式"""
        ifm_shape, w_shape = layer.ifm_shape, layer.weight_shape
        rng = np.random.default_rng(seed)

        if self.kind == "array":
            ifm = np.asarray(self.ifm, dtype=np.uint16)
            weights = np.asarray(self.weights, dtype=np.uint16)
            if ifm.shape != ifm_shape or weights.shape != w_shape:
                raise MappingError(
                    f"张量形状与层不符: ifm {ifm.shape} vs {ifm_shape}, "
                    f"weights {weights.shape} vs {w_shape}"
                )
            return ifm, weights

        if self.kind == "constant":
            return (to_fp16_bits(np.full(ifm_shape, self.value)),
                    to_fp16_bits(np.full(w_shape, self.value)))

        if self.kind == "exponent":
            lo, hi = self.exp_range

            def _draw(shape):
                sign = rng.choice([-1.0, 1.0], shape)
                frac = 1.0 + rng.integers(0, 1 << 10, shape) / 1024.0
                return to_fp16_bits(sign * np.ldexp(frac, rng.integers(lo, hi + 1, shape)))

            return _draw(ifm_shape), _draw(w_shape)

        return (sample_tensor(self.dist, self.params, ifm_shape, rng, self.exp_spread),
                sample_tensor(self.dist, self.params, w_shape, rng, self.exp_spread))


@dataclass(frozen=True)
class LayerSpec:
    """卷积层：IFM (C, H, W)，卷积核 (K, C, R, S)"""
    name: str
    C: int
    H: int
    W: int
    K: int
    R: int = 3
    S: int = 3
    stride: int = 1
    padding: int = 0
    source: DataSource = field(default_factory=DataSource)

    def __post_init__(self):
        for name in ("C", "H", "W", "K", "R", "S", "stride"):
            if getattr(self, name) < 1:
                raise MappingError(f"层 {self.name}: {name} 必须为正")
        if self.padding < 0:
            raise MappingError(f"层 {self.name}: padding 不能为负")
        if self.out_h < 1 or self.out_w < 1:
            raise MappingError(
                f"层 {self.name}: 输出尺寸无效 ({self.out_h}, {self.out_w})"
            )

    @property
    def out_h(self) -> int:
        return (self.H + 2 * self.padding - self.R) // self.stride + 1

    @property
    def out_w(self) -> int:
        return (self.W + 2 * self.padding - self.S) // self.stride + 1

    @property
    def ifm_shape(self) -> Tuple[int, int, int]:
        return self.C, self.H, self.W

    @property
    def weight_shape(self) -> Tuple[int, int, int, int]:
        return self.K, self.C, self.R, self.S

    @property
    def macs(self) -> int:
        return self.K * self.out_h * self.out_w * self.C * self.R * self.S


@dataclass
class SimReport:
    """单层模拟结果"""
    layer: str
    total_cycles: int
    baseline_cycles: int
    cycles_per_cluster: List[int]
    stall_cycles: int
    exp_diff_histogram: np.ndarray
    mean_cycles_per_iteration: float
    macs: int
    outputs: Optional[np.ndarray] = None   # (K, OH, OW) 结果位模式

    @property
    def normalized_time(self) -> float:
        return self.total_cycles / self.baseline_cycles

    @property
    def pct_diffs_gt8(self) -> float:
        total = int(self.exp_diff_histogram.sum())
        if total == 0:
            return 0.0
        return 100.0 * int(self.exp_diff_histogram[9:].sum()) / total
