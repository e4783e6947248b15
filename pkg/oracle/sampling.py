"""
合成输入采样

Laplace / Normal / Uniform 分布采样后舍入到 FP16（保留非正规数与零），
返回 uint16 位模式矩阵，形状 (count, n)。
"""
from __future__ import annotations

from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

DISTRIBUTIONS = ("laplace", "normal", "uniform")

FP16_MAX = 65504.0
# exp_spread 上限：再大只会把尾部推到饱和或下溢
MAX_EXP_SPREAD = 12

DEFAULT_PARAMS: Dict[str, Dict[str, float]] = {
    "laplace": {"loc": 0.0, "scale": 1.0},
    "normal": {"loc": 0.0, "scale": 1.0},
    "uniform": {"low": -1.0, "high": 1.0},
}

SeedLike = Union[int, Sequence[int], None]


def _draw(rng: np.random.Generator, dist: str, params: Dict[str, float], size) -> np.ndarray:
    p = {**DEFAULT_PARAMS[dist], **(params or {})}
    if dist == "laplace":
        return rng.laplace(p["loc"], p["scale"], size)
    if dist == "normal":
        return rng.normal(p["loc"], p["scale"], size)
    return rng.uniform(p["low"], p["high"], size)


def to_fp16_bits(values: np.ndarray) -> np.ndarray:
    """float64 -> FP16 位模式（numpy 转换为就近舍入）"""
    with np.errstate(over="ignore"):
        return np.asarray(values, dtype=np.float64).astype(np.float16).view(np.uint16)


def sample_vectors(
    dist: str,
    params: Optional[Dict[str, float]],
    n: int,
    count: int,
    seed: SeedLike,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    采样 count 对长度为 n 的 FP16 向量

    Args:
        dist: laplace / normal / uniform
        params: 分布参数，缺省见 DEFAULT_PARAMS；可带 scale_exp 把所有值乘以 2^scale_exp
        seed: 整数或 (seed, batch_index) 等序列，固定种子结果确定

    Returns:
        (a_bits, b_bits)，uint16 数组，形状 (count, n)
    """
    if dist not in DISTRIBUTIONS:
        raise ValueError(f"未知分布: {dist}，可选: {DISTRIBUTIONS}")
    if count < 1 or n < 1:
        raise ValueError(f"count 与 n 必须为正: count={count}, n={n}")

    params = dict(params or {})
    scale_exp = int(params.pop("scale_exp", 0))

    rng = np.random.default_rng(seed)
    a = _draw(rng, dist, params, (count, n))
    b = _draw(rng, dist, params, (count, n))
    if scale_exp:
        a = np.ldexp(a, scale_exp)
        b = np.ldexp(b, scale_exp)
    return to_fp16_bits(a), to_fp16_bits(b)


def safe_shift_vectors(n: int, w: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    构造所有对齐差都小于 w-9 的一对正规数向量

    a 的指数在宽度 min(sp, 30) 的窗口内随机，b 的指数全部相同。
    """
    sp = w - 9
    if sp < 1:
        raise ValueError(f"w={w} 时安全精度为 0，无法构造")
    span = min(sp, 30)
    base = int(rng.integers(1, 31 - span + 1))
    a_raw = base + rng.integers(0, span, n)
    b_raw = np.full(n, int(rng.integers(1, 31)))

    def _pack(raw):
        sign = rng.integers(0, 2, n) << 15
        frac = rng.integers(0, 1 << 10, n)
        return (sign | (raw << 10) | frac).astype(np.uint16)

    return _pack(a_raw), _pack(b_raw)


def sample_tensor(
    dist: str,
    params: Optional[Dict[str, float]],
    shape: Tuple[int, ...],
    rng: np.random.Generator,
    exp_spread: int = 0,
) -> np.ndarray:
    """
    采样任意形状的 FP16 张量

    exp_spread > 0 时每个元素再乘以 2^U{-spread..spread}，模拟反向传播数据更大的动态范围。
    超出 FP16 范围的值饱和到最大有限值。
    """
    if dist not in DISTRIBUTIONS:
        raise ValueError(f"未知分布: {dist}，可选: {DISTRIBUTIONS}")
    if not 0 <= exp_spread <= MAX_EXP_SPREAD:
        raise ValueError(f"exp_spread 必须在 0..{MAX_EXP_SPREAD} 内: {exp_spread}")
    values = _draw(rng, dist, params or {}, shape)
    if exp_spread > 0:
        values = np.ldexp(values, rng.integers(-exp_spread, exp_spread + 1, shape))
    return to_fp16_bits(np.clip(values, -FP16_MAX, FP16_MAX))
