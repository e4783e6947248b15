"""
对齐差（max_exp - exp）统计

按 tile 映射把每个 IPU 步骤的通道乘积指数向量化计算出来，
模拟器与直方图共用。
"""
from __future__ import annotations

from typing import Iterator, Tuple

import numpy as np

from numerics.errors import NumericDomainError

from .models import HISTOGRAM_BINS, LayerSpec, TileConfig

# 无活动通道时的占位指数
_NEG = -1000


def decode_exponents(bits: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    FP16 位模式 -> (无偏指数, 非零标记)

    非正规数与零的指数为 -14。

    Raises:
        NumericDomainError: 含 INF/NaN
    """
    bits = np.asarray(bits, dtype=np.uint16)
    raw = (bits >> 10) & 0x1F
    if np.any(raw == 0x1F):
        raise NumericDomainError("张量中含 INF/NaN")
    exps = np.where(raw == 0, -14, raw.astype(np.int16) - 15).astype(np.int16)
    nonzero = (bits & 0x7FFF) != 0
    return exps, nonzero


def step_diffs(
    ifm: np.ndarray,
    weights: np.ndarray,
    layer: LayerSpec,
    tile: TileConfig,
) -> Iterator[Tuple[int, int, np.ndarray, np.ndarray]]:
    """
    逐 (r, s) 产生各 IPU 步骤的通道对齐差

    Yields:
        (r, s, diffs, active)，形状均为 (K, chunks, n, OH, OW)；
        active 为乘积非零的通道，非活动通道的 diff 无意义
    """
    n = tile.n
    chunks = -(-layer.C // tile.C)
    lanes_padded = chunks * tile.C
    oh, ow, st, p = layer.out_h, layer.out_w, layer.stride, layer.padding

    a_exp, a_nz = decode_exponents(ifm)
    w_exp, w_nz = decode_exponents(weights)

    # 通道补到 chunks * C，并加上空间 padding
    a_exp = np.pad(a_exp, ((0, lanes_padded - layer.C), (p, p), (p, p)))
    a_nz = np.pad(a_nz, ((0, lanes_padded - layer.C), (p, p), (p, p)), constant_values=False)
    w_exp = np.pad(w_exp, ((0, 0), (0, lanes_padded - layer.C), (0, 0), (0, 0)))
    w_nz = np.pad(w_nz, ((0, 0), (0, lanes_padded - layer.C), (0, 0), (0, 0)), constant_values=False)

    # 每个 chunk 只用前 C 个输入，其余 n - C 个通道恒为零
    extra = n - tile.C
    for r in range(layer.R):
        for s in range(layer.S):
            win = (slice(None), slice(r, r + st * (oh - 1) + 1, st), slice(s, s + st * (ow - 1) + 1, st))
            ea = a_exp[win].astype(np.int32)          # (Cp, OH, OW)
            na = a_nz[win]
            ew = w_exp[:, :, r, s].astype(np.int32)   # (K, Cp)
            nw = w_nz[:, :, r, s]

            prod = ew[:, :, None, None] + ea[None]
            active = nw[:, :, None, None] & na[None]
            prod = prod.reshape(layer.K, chunks, tile.C, oh, ow)
            active = active.reshape(layer.K, chunks, tile.C, oh, ow)
            if extra:
                prod = np.pad(prod, ((0, 0), (0, 0), (0, extra), (0, 0), (0, 0)))
                active = np.pad(active, ((0, 0), (0, 0), (0, extra), (0, 0), (0, 0)),
                                constant_values=False)

            max_exp = np.where(active, prod, _NEG).max(axis=2, keepdims=True)
            diffs = np.where(active, max_exp - prod, 0)
            yield r, s, diffs, active


def histogram_from_diffs(diffs: np.ndarray, active: np.ndarray) -> np.ndarray:
    return np.bincount(diffs[active].ravel(), minlength=HISTOGRAM_BINS)[:HISTOGRAM_BINS]


def exp_diff_histogram(layer: LayerSpec, tile: TileConfig, seed: int = 0) -> np.ndarray:
    """
    整层的对齐差直方图，下标 0..58

    统计所有非零乘积通道（软件屏蔽前）。
    """
    ifm, weights = layer.source.materialize(layer, seed)
    hist = np.zeros(HISTOGRAM_BINS, dtype=np.int64)
    for _, _, diffs, active in step_diffs(ifm, weights, layer, tile):
        hist += histogram_from_diffs(diffs, active)
    return hist

