"""
精度研究：近似 FP-IP 在不同 IPU 精度下相对精确结果的误差

每个批次使用独立子随机流 default_rng([seed, batch_index])，
因此结果与进程数无关。
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from numerics.models import format_by_name

from ipu.config import IpuConfig
from ipu.core import ITERATION_ORDER, fp_ip_approx, to_operand

from .exact import exact_fp_ip
from .metrics import error_metrics, iteration_error
from .sampling import DISTRIBUTIONS, sample_vectors

logger = logging.getLogger(__name__)

BATCH_SIZE = 1000

SWEEP_COLUMNS = [
    "dist", "acc_format", "w", "median_abs_err", "median_are_pct",
    "median_contam_bits", "mean_contam_bits", "samples", "seed",
]

# 软件精度默认值：FP16 累加 16 位，FP32 累加 27 位
DEFAULT_SW_PRECISION = {"fp16": 16, "fp32": 27}


@dataclass(frozen=True)
class SweepJob:
    dist: str
    params: Tuple[Tuple[str, float], ...]
    acc_format: str
    w_values: Tuple[int, ...]
    n: int
    sw_precision: int
    multicycle: bool
    seed: int
    batch_index: int
    count: int


def _run_batch(job: SweepJob) -> Dict[int, np.ndarray]:
    """一个批次：返回 {w: [[abs_err, are_pct, contam_bits], ...]}"""
    a_bits, b_bits = sample_vectors(
        job.dist, dict(job.params), job.n, job.count, [job.seed, job.batch_index]
    )
    out = {w: np.empty((job.count, 3)) for w in job.w_values}
    cfgs = {w: IpuConfig(n=job.n, w=w, sw_precision=job.sw_precision) for w in job.w_values}

    for row in range(job.count):
        a_ints = [int(x) for x in a_bits[row]]
        b_ints = [int(y) for y in b_bits[row]]
        exact = exact_fp_ip(a_ints, b_ints)
        # 分解一次，各 w 共享
        a_ops = [to_operand(x) for x in a_ints]
        b_ops = [to_operand(y) for y in b_ints]
        for w, cfg in cfgs.items():
            bits, _ = fp_ip_approx(a_ops, b_ops, cfg, job.acc_format, job.multicycle)
            rep = error_metrics(bits, exact, job.acc_format)
            out[w][row] = (rep.abs_error, rep.are_percent, rep.contaminated_bits)
    return out


def _batches(count: int) -> List[Tuple[int, int]]:
    return [(idx, min(BATCH_SIZE, count - start))
            for idx, start in enumerate(range(0, count, BATCH_SIZE))]


def precision_sweep(
    dist: str,
    acc_format: str,
    w_range: Iterable[int],
    count: int,
    seed: int,
    n: int = 16,
    params: Optional[Dict[str, float]] = None,
    sw_precision: Optional[int] = None,
    multicycle: bool = False,
    threads: int = 1,
) -> pd.DataFrame:
    """
    各 IPU 精度 w 下的误差中位数表

    Args:
        dist: 输入分布
        acc_format: fp16 / fp32
        w_range: 待测 IPU 精度
        count: 样本数
        seed: 随机种子
        n: 向量长度
        sw_precision: 软件精度，默认按累加格式取 16 / 27
        multicycle: True 时测 MC-IPU 数值（只有软件屏蔽带来误差）
        threads: 进程数

    Returns:
        DataFrame，列见 SWEEP_COLUMNS
    """
    if dist not in DISTRIBUTIONS:
        raise ValueError(f"未知分布: {dist}")
    if count < 1:
        raise ValueError(f"样本数必须为正: {count}")
    fmt = format_by_name(acc_format).name
    w_values = tuple(sorted(set(int(w) for w in w_range)))
    if sw_precision is None:
        sw_precision = DEFAULT_SW_PRECISION[fmt]

    jobs = [
        SweepJob(
            dist=dist,
            params=tuple(sorted((params or {}).items())),
            acc_format=fmt,
            w_values=w_values,
            n=n,
            sw_precision=sw_precision,
            multicycle=multicycle,
            seed=seed,
            batch_index=idx,
            count=size,
        )
        for idx, size in _batches(count)
    ]
    logger.info("精度扫描 %s/%s: %s 个样本, %s 个批次, w=%s..%s",
                dist, fmt, count, len(jobs), w_values[0], w_values[-1])

    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_batch, jobs))
    else:
        results = [_run_batch(job) for job in jobs]

    rows = []
    for w in w_values:
        metrics = np.concatenate([res[w] for res in results])
        abs_err, are, contam = metrics[:, 0], metrics[:, 1], metrics[:, 2]
        rows.append({
            "dist": dist,
            "acc_format": fmt,
            "w": w,
            "median_abs_err": float(np.median(abs_err)),
            "median_are_pct": float(np.nanmedian(are)) if np.any(~np.isnan(are)) else float("nan"),
            "median_contam_bits": float(np.median(contam)),
            "mean_contam_bits": float(np.mean(contam)),
            "samples": int(len(metrics)),
            "seed": seed,
        })
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


BOUND_COLUMNS = ["trial", "dist", "n", "w", "i", "j", "max_exp", "error", "bound", "ok"]


def bound_check(
    trials: int,
    n_values: Sequence[int] = (2, 8, 16),
    w_values: Sequence[int] = (12, 16, 20, 28),
    dists: Sequence[str] = DISTRIBUTIONS,
    seed: int = 0,
) -> Tuple[pd.DataFrame, int]:
    """
    逐迭代检查截断误差不超过上界

    每个 trial 采一对向量并检查全部 9 次迭代，(n, w, dist) 按 trial 轮转。

    Returns:
        (逐迭代明细 DataFrame, 违反次数)
    """
    combos = [(n, w, d) for n in n_values for w in w_values for d in dists]
    rows = []
    for trial in range(trials):
        n, w, dist = combos[trial % len(combos)]
        a_bits, b_bits = sample_vectors(dist, None, n, 1, [seed, trial])
        a = [to_operand(int(x)) for x in a_bits[0]]
        b = [to_operand(int(y)) for y in b_bits[0]]
        cfg = IpuConfig(n=n, w=w)
        max_exp = max(
            (x.exp_unbiased + y.exp_unbiased for x, y in zip(a, b) if not (x.is_zero or y.is_zero)),
            default=None,
        )
        for i, j in ITERATION_ORDER:
            err, bound = iteration_error(a, b, i, j, cfg)
            rows.append({
                "trial": trial, "dist": dist, "n": n, "w": w, "i": i, "j": j,
                "max_exp": max_exp,
                "error": float(err), "bound": float(bound), "ok": err <= bound,
            })

    df = pd.DataFrame(rows, columns=BOUND_COLUMNS)
    violations = int((~df["ok"]).sum()) if len(df) else 0
    if violations:
        logger.warning("误差上界被违反 %s 次", violations)
    return df, violations
