"""
MC-IPU 卷积 tile 周期精确模拟器

映射（权重驻留）：K -> IPU，C -> 通道，输出像素按光栅顺序分块流入。
每个输出块 (kb, hb, wb) 依次执行 ceil(C/C_u) * R * S 个步骤，
块按轮转分配给各 tile；每步每个 MC-IPU 花费 9 * 每迭代周期数。

簇内 MC-IPU 同步推进，簇之间通过深度为 buffer_depth 的输入队列解耦：
广播在任一簇队列满时阻塞，输出队列在块边界重新同步。
"""
from __future__ import annotations

import logging
from collections import deque
from typing import List, Optional, Tuple

import numpy as np

from numerics.models import format_by_name

from ipu.core import fp_ip_accumulate

from .histogram import histogram_from_diffs, step_diffs
from .models import HISTOGRAM_BINS, NIBBLE_ITERATIONS, LayerSpec, SimReport, TileConfig

logger = logging.getLogger(__name__)


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


class TileSimulator:
    """多 tile MC-IPU 模拟器"""

    def __init__(self, tile: TileConfig):
        self.tile = tile
        self.ipu_cfg = tile.ipu_config()

    def _blocks(self, layer: LayerSpec) -> Tuple[int, int, int]:
        t = self.tile
        return _ceil_div(layer.K, t.K), _ceil_div(layer.out_h, t.Ho), _ceil_div(layer.out_w, t.Wo)

    def steps_per_block(self, layer: LayerSpec) -> int:
        return _ceil_div(layer.C, self.tile.C) * layer.R * layer.S

    def num_blocks(self, layer: LayerSpec) -> int:
        kb, hb, wb = self._blocks(layer)
        return kb * hb * wb

    def baseline_cycles(self, layer: LayerSpec) -> int:
        """每次半字节迭代 1 周期的基线（38 位加法树）"""
        blocks_per_tile = _ceil_div(self.num_blocks(layer), self.tile.num_tiles)
        return blocks_per_tile * self.steps_per_block(layer) * NIBBLE_ITERATIONS

    def _iteration_cycles(self, diffs: np.ndarray, active: np.ndarray) -> np.ndarray:
        """向量化 EHU：每个 IPU 步骤每次半字节迭代的周期数，形状 (K, chunks, OH, OW)"""
        sp = max(self.tile.sp, 1)
        unmasked = active & (diffs < self.tile.sw_precision)
        part = np.where(unmasked, diffs // sp, -1)

        if self.tile.charge_empty_partitions:
            count = part.max(axis=2) + 1
        else:
            count = np.zeros(part.shape[:2] + part.shape[3:], dtype=np.int64)
            for q in range(int(part.max(initial=-1)) + 1):
                count += np.any(part == q, axis=2)
        return np.maximum(count, 1)

    def _cycle_table(self, layer: LayerSpec, ifm: np.ndarray, weights: np.ndarray):
        """(每步每 IPU 周期数 [K, chunks, R, S, OH, OW], 直方图)"""
        chunks = _ceil_div(layer.C, self.tile.C)
        cycles = np.ones((layer.K, chunks, layer.R, layer.S, layer.out_h, layer.out_w), dtype=np.int64)
        hist = np.zeros(HISTOGRAM_BINS, dtype=np.int64)
        for r, s, diffs, active in step_diffs(ifm, weights, layer, self.tile):
            cycles[:, :, r, s] = self._iteration_cycles(diffs, active)
            hist += histogram_from_diffs(diffs, active)
        return cycles, hist

    def _blockify(self, table: np.ndarray, layer: LayerSpec, fill) -> np.ndarray:
        """[K, chunks, R, S, OH, OW] -> [blocks, steps, ipus]，越界 IPU 以 fill 补齐"""
        t = self.tile
        nkb, nhb, nwb = self._blocks(layer)
        padded = np.pad(
            table,
            ((0, nkb * t.K - layer.K), (0, 0), (0, 0), (0, 0),
             (0, nhb * t.Ho - layer.out_h), (0, nwb * t.Wo - layer.out_w)),
            constant_values=fill,
        )
        chunks = table.shape[1]
        x = padded.reshape(nkb, t.K, chunks, layer.R, layer.S, nhb, t.Ho, nwb, t.Wo)
        # -> (kb, hb, wb, chunk, r, s, ku, hu, wu)
        x = x.transpose(0, 5, 7, 2, 3, 4, 1, 6, 8)
        return x.reshape(nkb * nhb * nwb, chunks * layer.R * layer.S, t.ipus_per_tile)

    @staticmethod
    def _run_tile(costs: np.ndarray, depth: int) -> Tuple[int, np.ndarray]:
        """
        单个 tile 的队列递推

        Args:
            costs: [blocks, steps, clusters] 每簇每步花费的周期
            depth: 每簇输入/输出队列深度

        Returns:
            (tile 总周期, 每簇忙碌周期)
        """
        n_blocks, n_steps, n_clusters = costs.shape
        finish = np.zeros(n_clusters, dtype=np.int64)
        starts = deque(maxlen=depth)          # 最近 depth 个步骤的各簇开始时间
        written: List[int] = []               # 每个块结果写出时间
        broadcast = 0

        for b in range(n_blocks):
            for p in range(n_steps):
                # 输入广播：所有簇都要有空位
                if len(starts) == depth:
                    broadcast = max(broadcast, int(starts[0].max()))
                start = np.maximum(finish, broadcast)
                # 输出队列满时不能开始新块
                if p == 0 and b >= depth:
                    start = np.maximum(start, written[b - depth])
                finish = start + costs[b, p]
                starts.append(start)
            written.append(int(finish.max()))

        total = max(written) if written else 0
        return total, costs.sum(axis=(0, 1))

    def compute_outputs(self, layer: LayerSpec, ifm: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """逐输出像素按 (chunk, r, s) 顺序做 MC-IPU FP-IP 累加，返回结果位模式"""
        t = self.tile
        fmt = format_by_name(t.acc_format)
        dtype = np.uint16 if fmt.total_bits == 16 else np.uint32
        p, st = layer.padding, layer.stride
        padded = np.pad(np.asarray(ifm, dtype=np.uint16), ((0, 0), (p, p), (p, p)))
        chunks = _ceil_div(layer.C, t.C)

        out = np.zeros((layer.K, layer.out_h, layer.out_w), dtype=dtype)
        for k in range(layer.K):
            for oh in range(layer.out_h):
                for ow in range(layer.out_w):
                    steps = []
                    for chunk in range(chunks):
                        cs = slice(chunk * t.C, min((chunk + 1) * t.C, layer.C))
                        for r in range(layer.R):
                            for s in range(layer.S):
                                a_vec = [int(x) for x in padded[cs, oh * st + r, ow * st + s]]
                                b_vec = [int(y) for y in weights[k, cs, r, s]]
                                steps.append((a_vec, b_vec))
                    bits, _, _ = fp_ip_accumulate(steps, self.ipu_cfg, fmt, multicycle=True)
                    out[k, oh, ow] = bits
        return out

    def simulate_layer(self, layer: LayerSpec, seed: int = 0, compute_outputs: bool = False) -> SimReport:
        """
        模拟一层卷积

        Args:
            layer: 卷积层
            seed: 合成数据种子
            compute_outputs: 同时计算数值结果（逐像素 FP-IP，较慢）

        Returns:
            SimReport
        """
        t = self.tile
        ifm, weights = layer.source.materialize(layer, seed)
        cycles, hist = self._cycle_table(layer, ifm, weights)

        per_ipu = self._blockify(cycles, layer, fill=1)
        n_blocks, n_steps, _ = per_ipu.shape
        cluster_cost = NIBBLE_ITERATIONS * per_ipu.reshape(
            n_blocks, n_steps, t.num_clusters, t.cluster_size
        ).max(axis=3)

        totals = []
        busy = np.zeros(t.num_clusters, dtype=np.int64)
        stall = 0
        for tile_idx in range(min(t.num_tiles, n_blocks)):
            total, tile_busy = self._run_tile(cluster_cost[tile_idx::t.num_tiles], t.buffer_depth)
            totals.append(total)
            busy += tile_busy
            stall += int((total - tile_busy).sum())

        # 只统计映射到真实输出的 IPU
        working = self._blockify(np.ones(cycles.shape, dtype=bool), layer, fill=False)
        mean_cycles = float(per_ipu[working].mean()) if working.any() else 1.0

        report = SimReport(
            layer=layer.name,
            total_cycles=max(totals),
            baseline_cycles=self.baseline_cycles(layer),
            cycles_per_cluster=[int(x) for x in busy],
            stall_cycles=stall,
            exp_diff_histogram=hist,
            mean_cycles_per_iteration=mean_cycles,
            macs=self._count_macs(layer),
        )
        if compute_outputs:
            report.outputs = self.compute_outputs(layer, ifm, weights)

        logger.info("层 %s: %s 周期, 基线 %s, 归一化 %.4f",
                    layer.name, report.total_cycles, report.baseline_cycles, report.normalized_time)
        return report

    def _count_macs(self, layer: LayerSpec) -> int:
        """按映射逐块统计实际完成的乘法数"""
        t = self.tile
        nkb, nhb, nwb = self._blocks(layer)
        lanes = sum(min(t.C, layer.C - c0) for c0 in range(0, layer.C, t.C))
        macs = 0
        for kb in range(nkb):
            ks = min(t.K, layer.K - kb * t.K)
            for hb in range(nhb):
                hs = min(t.Ho, layer.out_h - hb * t.Ho)
                for wb in range(nwb):
                    ws = min(t.Wo, layer.out_w - wb * t.Wo)
                    macs += ks * hs * ws * lanes * layer.R * layer.S
        return macs


def simulate_layer(layer: LayerSpec, tile: TileConfig, seed: int = 0,
                   compute_outputs: bool = False) -> SimReport:
    return TileSimulator(tile).simulate_layer(layer, seed, compute_outputs)


def baseline_cycles(layer: LayerSpec, tile: TileConfig) -> int:
    return TileSimulator(tile).baseline_cycles(layer)
