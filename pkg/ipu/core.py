"""
IPU(w) 值级黄金模型

- 5b x 5b 有符号乘法器、局部右移截断、w 位加法树
- 非规格化累加器（INT / FP 两种模式）
- INT4/8/12 内积与 FP16 近似内积（单周期近似版本与 MC-IPU 多周期版本）

所有中间量用 Python 整数精确表示，截断点显式给出，位宽用断言检查。
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from numerics.errors import AccumulatorOverflowError
from numerics.fp_codec import decode_fp16, decompose_fp16, decompose_int, round_to_format
from numerics.models import DecomposedOperand, FloatFormat, FloatValue, FP16, format_by_name

from .alignment import AlignmentSchedule, CycleSlot, run_ehu
from .config import (
    ACC_BASE_BITS,
    AccumulatorState,
    IpuConfig,
    IpuMode,
    IterationResult,
)

logger = logging.getLogger(__name__)

# FP16 每个操作数 3 个半字节
FP_NIBBLES = 3
# 最高有效迭代优先，交换只可能发生在 (2, 2)
ITERATION_ORDER: Tuple[Tuple[int, int], ...] = tuple(
    (i, j) for i in reversed(range(FP_NIBBLES)) for j in reversed(range(FP_NIBBLES))
)
# 乘积 9 位有符号
PRODUCT_BITS = 9

Operand = Union[int, FloatValue, DecomposedOperand]


def nibble_product(a_nib: int, b_nib: int) -> int:
    """5 位有符号乘法，|p| <= 225"""
    if abs(a_nib) > 15 or abs(b_nib) > 15:
        raise ValueError(f"半字节超出 5 位有符号乘法器范围: ({a_nib}, {b_nib})")
    return a_nib * b_nib


def local_shift_truncate(p: int, diff: int, w: int) -> int:
    """
    局部右移并截断到 w 位窗口

    窗口值 = floor(p * 2^(w-9) / 2^diff)；diff <= w-9 时无信息损失。
    """
    if diff < 0:
        raise ValueError(f"移位量不能为负: {diff}")
    return (p << (w - PRODUCT_BITS)) >> diff


def iteration_scale(max_exp: int, i: int, j: int, w: int, extra_shift: int = 0) -> int:
    """加法树输出的权重指数"""
    return max_exp + 4 * (i + j) - 22 - (w - PRODUCT_BITS) - extra_shift


def _check_adder_width(adder_out: int, cfg: IpuConfig):
    assert abs(adder_out) < (1 << cfg.adder_width), (
        f"加法树输出超出 {cfg.adder_width} 位: {adder_out}"
    )


def approx_nibble_iteration(
    a: Sequence[DecomposedOperand],
    b: Sequence[DecomposedOperand],
    i: int,
    j: int,
    diffs: Sequence[int],
    mask: Sequence[bool],
    cfg: IpuConfig,
    max_exp: int = 0,
) -> IterationResult:
    """
    近似半字节迭代（单周期）

    对未屏蔽通道的乘积做局部移位截断后求和，超出窗口的低位直接丢弃。

    Args:
        a, b: 各通道的分解操作数
        i, j: 半字节下标
        diffs: EHU 给出的对齐差
        mask: True 表示本周期不参与
        cfg: IPU 配置
        max_exp: 最大乘积指数，仅用于计算权重

    Returns:
        IterationResult，真实贡献约为 adder_out * 2^scale
    """
    adder_out = 0
    for x, y, d, m in zip(a, b, diffs, mask):
        if m:
            continue
        p = nibble_product(x.signed_nibble(i), y.signed_nibble(j))
        adder_out += local_shift_truncate(p, d, cfg.w)
    _check_adder_width(adder_out, cfg)
    return IterationResult(
        adder_out=adder_out,
        max_exp=max_exp,
        scale=iteration_scale(max_exp, i, j, cfg.w),
    )


def mc_cycle_iteration(
    a: Sequence[DecomposedOperand],
    b: Sequence[DecomposedOperand],
    i: int,
    j: int,
    slot: CycleSlot,
    max_exp: int,
    cfg: IpuConfig,
) -> IterationResult:
    """MC-IPU 的一个周期：只服务 slot 中的通道，局部移位 < sp 因而精确"""
    adder_out = 0
    for lane, shift in zip(slot.served, slot.local_shifts):
        p = nibble_product(a[lane].signed_nibble(i), b[lane].signed_nibble(j))
        adder_out += local_shift_truncate(p, shift, cfg.w)
    _check_adder_width(adder_out, cfg)
    return IterationResult(
        adder_out=adder_out,
        max_exp=max_exp,
        scale=iteration_scale(max_exp, i, j, cfg.w, slot.extra_shift),
        extra_shift=slot.extra_shift,
    )


def int_nibble_iteration(
    a_nibs: Sequence[Sequence[int]],
    b_nibs: Sequence[Sequence[int]],
    i: int,
    j: int,
    cfg: IpuConfig,
) -> IterationResult:
    """INT 模式迭代：max_exp = 0，无对齐移位"""
    adder_out = sum(
        local_shift_truncate(nibble_product(x[i], y[j]), 0, cfg.w)
        for x, y in zip(a_nibs, b_nibs)
    )
    _check_adder_width(adder_out, cfg)
    return IterationResult(adder_out=adder_out, max_exp=0, scale=4 * (i + j) - (cfg.w - PRODUCT_BITS))


def _place(adder_out: int, w: int) -> int:
    """加法树结果放到 33 位字段顶端（右侧补 33-w 个 0）"""
    if w <= ACC_BASE_BITS:
        return adder_out << (ACC_BASE_BITS - w)
    return adder_out >> (w - ACC_BASE_BITS)


def nibble_shift(i: int, j: int, ka: int = FP_NIBBLES, kb: int = FP_NIBBLES) -> int:
    return 4 * ((ka - i - 1) + (kb - j - 1))


def accumulator_shift(
    acc: AccumulatorState,
    r: IterationResult,
    i: int,
    j: int,
    ka: int = FP_NIBBLES,
    kb: int = FP_NIBBLES,
    mode: IpuMode = IpuMode.FP,
) -> Tuple[int, bool]:
    """
    累加对齐移位量及是否交换

    FP: 4*((3-i-1)+(3-j-1)) + |max_exp - exp|，max_exp > exp 时交换
    INT: 4*((Ka-i-1)+(Kb-j-1))
    """
    s = nibble_shift(i, j, ka, kb)
    if mode is IpuMode.INT:
        return s, False
    return s + abs(r.max_exp - acc.exp), r.max_exp > acc.exp


def _check_overflow(mag: int, cfg: IpuConfig):
    limit = 1 << (cfg.acc_width - 1)
    if not -limit <= mag < limit:
        raise AccumulatorOverflowError(
            f"累加器溢出 {cfg.acc_width} 位: mag={mag}（超过 d={cfg.max_accumulations} 次累加？）"
        )


def accumulate(
    acc: AccumulatorState,
    r: IterationResult,
    i: int,
    j: int,
    ka: int,
    kb: int,
    cfg: IpuConfig,
    mode: IpuMode = IpuMode.FP,
) -> AccumulatorState:
    """
    将一次迭代结果加入累加器

    移出寄存器低端的位直接丢弃（算术右移）。交换时旧累加值右移
    |max_exp - exp|，新值按半字节位置移位，累加器指数更新为 max_exp。
    """
    x = _place(r.adder_out, cfg.w)
    s_nib = nibble_shift(i, j, ka, kb)

    if mode is IpuMode.INT:
        mag = acc.mag + (x >> s_nib)
        _check_overflow(mag, cfg)
        return AccumulatorState(exp=0, mag=mag)

    delta = r.max_exp - acc.exp
    if delta > 0:
        mag = (acc.mag >> delta) + (x >> (s_nib + r.extra_shift))
        exp = r.max_exp
    else:
        mag = acc.mag + (x >> (s_nib - delta + r.extra_shift))
        exp = acc.exp
    _check_overflow(mag, cfg)
    return AccumulatorState(exp=exp, mag=mag)


@dataclass(frozen=True)
class IntIpResult:
    value: int
    iterations: int
    acc: AccumulatorState


def int_ip(
    a_vec: Sequence[int],
    b_vec: Sequence[int],
    a_width: int,
    b_width: int,
    cfg: IpuConfig,
    a_signed: bool = True,
    b_signed: bool = True,
    acc: Optional[AccumulatorState] = None,
) -> IntIpResult:
    """
    INT 内积：(a_width/4)*(b_width/4) 次半字节迭代

    Returns:
        IntIpResult，value 等于直接整数点积
    """
    if len(a_vec) != len(b_vec):
        raise ValueError(f"向量长度不一致: {len(a_vec)} vs {len(b_vec)}")
    if len(a_vec) > cfg.n:
        raise ValueError(f"向量长度 {len(a_vec)} 超过 IPU 输入数 {cfg.n}")

    a_nibs = [decompose_int(v, a_width, a_signed) for v in a_vec]
    b_nibs = [decompose_int(v, b_width, b_signed) for v in b_vec]
    ka, kb = a_width // 4, b_width // 4

    acc = acc or AccumulatorState.for_int()
    iterations = 0
    for i in reversed(range(ka)):
        for j in reversed(range(kb)):
            r = int_nibble_iteration(a_nibs, b_nibs, i, j, cfg)
            acc = accumulate(acc, r, i, j, ka, kb, cfg, IpuMode.INT)
            iterations += 1

    # 累加单位为 2^(s_max - 24)
    s_max = nibble_shift(0, 0, ka, kb)
    frac_bits = 24 - s_max
    value = acc.mag >> frac_bits
    assert value << frac_bits == acc.mag, "INT 累加结果不是整数"
    return IntIpResult(value=value, iterations=iterations, acc=acc)


@dataclass(frozen=True)
class FpIpStats:
    """一次 FP-IP 的统计"""
    max_exp: int
    max_alignment: int
    masked_lanes: int
    gated_lanes: int
    iteration_cycles: int
    swaps: int

    @property
    def total_cycles(self) -> int:
        return self.iteration_cycles * len(ITERATION_ORDER)


def to_operand(x: Operand) -> DecomposedOperand:
    """位模式 / FloatValue / 已分解操作数 -> DecomposedOperand"""
    if isinstance(x, DecomposedOperand):
        return x
    if isinstance(x, FloatValue):
        return decompose_fp16(x)
    if isinstance(x, int):
        return decompose_fp16(decode_fp16(x))
    raise TypeError(f"无法识别的 FP16 操作数: {x!r}")


def _prepare(a_vec: Sequence[Operand], b_vec: Sequence[Operand], cfg: IpuConfig):
    if len(a_vec) != len(b_vec):
        raise ValueError(f"向量长度不一致: {len(a_vec)} vs {len(b_vec)}")
    if len(a_vec) > cfg.n:
        raise ValueError(f"向量长度 {len(a_vec)} 超过 IPU 输入数 {cfg.n}")
    return [to_operand(x) for x in a_vec], [to_operand(y) for y in b_vec]


def fp_ip_step(
    acc: AccumulatorState,
    a_vec: Sequence[Operand],
    b_vec: Sequence[Operand],
    cfg: IpuConfig,
    multicycle: bool = False,
    tracer=None,
) -> Tuple[AccumulatorState, FpIpStats, AlignmentSchedule]:
    """
    一次 FP-IP：运行一次 EHU，再执行 9 次半字节迭代并累加

    multicycle=False 为单周期近似 IPU(w)；True 为 MC-IPU，
    每个非空分区一个周期，额外移位 k*sp 在累加器中完成。
    """
    a, b = _prepare(a_vec, b_vec, cfg)
    schedule = run_ehu(a, b, cfg.sw_precision, max(cfg.sp, 1), cfg.charge_empty_partitions)
    if tracer is not None:
        tracer.on_ehu(a, b, schedule)

    swaps = 0
    for i, j in ITERATION_ORDER:
        if multicycle:
            results = [
                mc_cycle_iteration(a, b, i, j, slot, schedule.max_exp, cfg)
                for slot in schedule.cycles
            ]
        else:
            results = [approx_nibble_iteration(
                a, b, i, j, schedule.diffs, schedule.excluded, cfg, schedule.max_exp
            )]

        for slot_idx, r in enumerate(results):
            shift, swap = accumulator_shift(acc, r, i, j)
            new_acc = accumulate(acc, r, i, j, FP_NIBBLES, FP_NIBBLES, cfg)
            swaps += swap
            if tracer is not None:
                slot = schedule.cycles[slot_idx] if multicycle else None
                tracer.on_cycle(i, j, slot, r, acc, new_acc, shift + r.extra_shift, swap)
            acc = new_acc

    stats = FpIpStats(
        max_exp=schedule.max_exp,
        max_alignment=schedule.max_alignment,
        masked_lanes=schedule.masked_lanes,
        gated_lanes=sum(schedule.gated),
        iteration_cycles=schedule.iteration_cycles,
        swaps=swaps,
    )
    return acc, stats, schedule


def normalize_and_round(acc: AccumulatorState, acc_format: Union[str, FloatFormat] = FP16) -> int:
    """像素完成后对非规格化累加器规格化并舍入"""
    return round_to_format(acc.to_exact(), format_by_name(acc_format))


def fp_ip_accumulate(
    steps: Iterable[Tuple[Sequence[Operand], Sequence[Operand]]],
    cfg: IpuConfig,
    acc_format: Union[str, FloatFormat] = FP16,
    acc: Optional[AccumulatorState] = None,
    multicycle: bool = False,
) -> Tuple[int, List[FpIpStats], AccumulatorState]:
    """
    多次 FP-IP 累加到同一个累加器，最后只舍入一次

    Args:
        steps: (a_vec, b_vec) 序列，每项是一次 FP-IP
        acc: 延续已有累加器（C*R*S 超过 n 的输出像素）

    Returns:
        (结果位模式, 每步统计, 最终累加器)
    """
    acc = acc or AccumulatorState()
    stats = []
    for count, (a_vec, b_vec) in enumerate(steps, 1):
        if count > cfg.max_accumulations:
            raise AccumulatorOverflowError(f"累加次数超过 d={cfg.max_accumulations}")
        acc, st, _ = fp_ip_step(acc, a_vec, b_vec, cfg, multicycle)
        stats.append(st)
    logger.debug("累加 %s 次 FP-IP，累加器 %r", len(stats), acc)
    return normalize_and_round(acc, acc_format), stats, acc


def fp_ip_approx(
    a_vec: Sequence[Operand],
    b_vec: Sequence[Operand],
    cfg: IpuConfig,
    acc_format: Union[str, FloatFormat] = FP16,
    multicycle: bool = False,
) -> Tuple[int, FpIpStats]:
    """
    FP16 近似内积

    Raises:
        NumericDomainError: 输入含 INF/NaN
    """
    acc, stats, _ = fp_ip_step(AccumulatorState(), a_vec, b_vec, cfg, multicycle)
    return normalize_and_round(acc, acc_format), stats
