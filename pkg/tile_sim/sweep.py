"""
设计空间扫描：IPU 精度 x 簇大小 -> 归一化执行时间
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Sequence, Tuple

import pandas as pd

from .engine import TileSimulator
from .models import LayerSpec, SimReport, TileConfig

logger = logging.getLogger(__name__)

SIM_COLUMNS = [
    "layer", "w", "cluster_size", "buffer_depth", "total_cycles",
    "baseline_cycles", "normalized_time", "pct_diffs_gt8",
]


def report_row(report: SimReport, tile: TileConfig) -> Dict:
    return {
        "layer": report.layer,
        "w": tile.w,
        "cluster_size": tile.cluster_size,
        "buffer_depth": tile.buffer_depth,
        "total_cycles": report.total_cycles,
        "baseline_cycles": report.baseline_cycles,
        "normalized_time": report.normalized_time,
        "pct_diffs_gt8": report.pct_diffs_gt8,
    }


def _simulate(job: Tuple[LayerSpec, TileConfig, int]) -> Dict:
    layer, tile, seed = job
    return report_row(TileSimulator(tile).simulate_layer(layer, seed), tile)


def sweep_design_space(
    layers: Sequence[LayerSpec],
    w_list: Sequence[int],
    cluster_sizes: Sequence[int],
    seed: int = 0,
    tile: TileConfig = None,
    threads: int = 1,
) -> pd.DataFrame:
    """
    对每个 (层, w, 簇大小) 运行模拟

    同一层在所有配置下使用相同种子，因而数据相同。

    Returns:
        DataFrame，列见 SIM_COLUMNS
    """
    base = tile or TileConfig.small()
    jobs: List[Tuple[LayerSpec, TileConfig, int]] = []
    for layer in layers:
        for w in w_list:
            for cs in cluster_sizes:
                jobs.append((layer, base.with_(w=int(w), cluster_size=int(cs)), seed))
    logger.info("设计空间扫描: %s 层 x %s 个精度 x %s 种簇大小",
                len(layers), len(w_list), len(cluster_sizes))

    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_simulate, jobs))
    else:
        rows = [_simulate(job) for job in jobs]
    return pd.DataFrame(rows, columns=SIM_COLUMNS)
