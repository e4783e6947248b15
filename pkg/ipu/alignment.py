"""
指数处理单元（EHU）与 MC-IPU 多周期调度

流程：乘积指数 -> 最大指数与对齐差 -> 软件精度屏蔽 -> 按 sp 分区调度
一次 FP-IP 只运行一次 EHU，9 次半字节迭代共享同一个调度。
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from numerics.models import DecomposedOperand

from .config import MIN_PRODUCT_EXP

logger = logging.getLogger(__name__)


def lane_label(k: int) -> str:
    """通道标签 A, B, ..., Z, AA, AB ..."""
    label = ""
    k += 1
    while k:
        k, r = divmod(k - 1, 26)
        label = chr(ord("A") + r) + label
    return label


@dataclass(frozen=True)
class CycleSlot:
    """一个周期服务的乘积集合"""
    partition: int                 # k
    served: Tuple[int, ...]        # 通道下标（升序）
    local_shifts: Tuple[int, ...]  # 与 served 一一对应，diff - k*sp
    extra_shift: int               # k*sp

    def local_shift_map(self) -> Dict[int, int]:
        return dict(zip(self.served, self.local_shifts))

    @property
    def served_labels(self) -> Tuple[str, ...]:
        return tuple(lane_label(k) for k in self.served)


@dataclass(frozen=True)
class AlignmentSchedule:
    """EHU 输出"""
    max_exp: int
    diffs: Tuple[int, ...]
    sw_masked: Tuple[bool, ...]
    cycles: Tuple[CycleSlot, ...]
    sp: int
    gated: Tuple[bool, ...] = field(default=())   # 乘积为零的通道
    charge_empty_partitions: bool = False

    @property
    def n_lanes(self) -> int:
        return len(self.diffs)

    @property
    def excluded(self) -> Tuple[bool, ...]:
        """不参与加法树的通道（软件屏蔽或零乘积）"""
        gated = self.gated or (False,) * len(self.diffs)
        return tuple(m or g for m, g in zip(self.sw_masked, gated))

    @property
    def active_diffs(self) -> List[int]:
        return [d for d, x in zip(self.diffs, self.excluded) if not x]

    @property
    def cycle_count(self) -> int:
        """非空分区数"""
        return len(self.cycles)

    @property
    def iteration_cycles(self) -> int:
        """每次半字节迭代实际占用的周期数（至少 1）"""
        return max(1, schedule_cycle_count(self))

    @property
    def max_alignment(self) -> int:
        diffs = self.active_diffs
        return max(diffs) if diffs else 0

    @property
    def masked_lanes(self) -> int:
        gated = self.gated or (False,) * len(self.diffs)
        return sum(1 for m, g in zip(self.sw_masked, gated) if m and not g)


def product_exponents(a_exps: Sequence[int], b_exps: Sequence[int]) -> List[int]:
    if len(a_exps) != len(b_exps):
        raise ValueError(f"向量长度不一致: {len(a_exps)} vs {len(b_exps)}")
    return [ea + eb for ea, eb in zip(a_exps, b_exps)]


def alignment_diffs(
    prod_exps: Sequence[int],
    active: Optional[Sequence[bool]] = None,
) -> Tuple[int, List[int]]:
    """
    最大乘积指数及各通道对齐差

    Args:
        prod_exps: 各通道乘积指数
        active: 参与求最大值的通道；非活动通道的差记为 0

    Returns:
        (max_exp, diffs)；无活动通道时 max_exp 取最小乘积指数 -28
    """
    if not prod_exps:
        raise ValueError("至少需要一个通道")
    if active is None:
        active = [True] * len(prod_exps)

    live = [e for e, on in zip(prod_exps, active) if on]
    max_exp = max(live) if live else MIN_PRODUCT_EXP
    diffs = [max_exp - e if on else 0 for e, on in zip(prod_exps, active)]
    return max_exp, diffs


def mask_beyond_precision(diffs: Sequence[int], sw_precision: int) -> List[bool]:
    """diff >= sw_precision 的通道被屏蔽"""
    return [d >= sw_precision for d in diffs]


def schedule_cycles(
    diffs: Sequence[int],
    mask: Sequence[bool],
    sp: int,
    max_exp: int = 0,
    gated: Sequence[bool] = (),
    charge_empty_partitions: bool = False,
) -> AlignmentSchedule:
    """
    按半开区间 [k*sp, (k+1)*sp) 划分未屏蔽通道，空分区不占周期

    mask 为软件精度屏蔽位；gated 为零乘积通道，二者都不参与调度。
    """
    if sp < 1:
        raise ValueError(f"安全精度 sp 必须 >= 1，实际: {sp}")
    if len(mask) != len(diffs):
        raise ValueError("diffs 与 mask 长度不一致")
    gated = tuple(bool(g) for g in gated) if gated else (False,) * len(diffs)

    partitions: Dict[int, List[int]] = {}
    for lane, (d, m, g) in enumerate(zip(diffs, mask, gated)):
        if m or g:
            continue
        if d < 0:
            raise ValueError(f"对齐差不能为负: 通道 {lane_label(lane)} diff={d}")
        partitions.setdefault(d // sp, []).append(lane)

    cycles = []
    for k in sorted(partitions):
        lanes = tuple(partitions[k])
        cycles.append(CycleSlot(
            partition=k,
            served=lanes,
            local_shifts=tuple(diffs[x] - k * sp for x in lanes),
            extra_shift=k * sp,
        ))

    return AlignmentSchedule(
        max_exp=max_exp,
        diffs=tuple(diffs),
        sw_masked=tuple(bool(m) for m in mask),
        cycles=tuple(cycles),
        sp=sp,
        gated=gated,
        charge_empty_partitions=charge_empty_partitions,
    )


def schedule_cycle_count(schedule: AlignmentSchedule) -> int:
    """
    调度周期数

    默认只计非空分区；charge_empty_partitions 时模拟逐阈值递增的硬件循环，
    周期数为 floor(最大未屏蔽 diff / sp) + 1。
    """
    if not schedule.cycles:
        return 0
    if schedule.charge_empty_partitions:
        return schedule.cycles[-1].partition + 1
    return len(schedule.cycles)


def run_ehu(
    a: Sequence[DecomposedOperand],
    b: Sequence[DecomposedOperand],
    sw_precision: int,
    sp: int,
    charge_empty_partitions: bool = False,
) -> AlignmentSchedule:
    """对一次 FP-IP 运行完整 EHU 流水"""
    prod_exps = product_exponents([x.exp_unbiased for x in a], [y.exp_unbiased for y in b])
    gated = [x.is_zero or y.is_zero for x, y in zip(a, b)]
    max_exp, diffs = alignment_diffs(prod_exps, [not g for g in gated])
    mask = mask_beyond_precision(diffs, sw_precision)
    # 零乘积通道不计入软件屏蔽
    mask = [m and not g for m, g in zip(mask, gated)]

    schedule = schedule_cycles(
        diffs, mask, sp,
        max_exp=max_exp,
        gated=gated,
        charge_empty_partitions=charge_empty_partitions,
    )
    logger.debug("EHU max_exp=%s diffs=%s cycles=%s", max_exp, diffs, schedule.cycle_count)
    return schedule
