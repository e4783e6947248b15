"""
四个工作流：trace-ipu / analyze-error / simulate-tile / sweep

每个工作流都是 (配置, 种子) 的纯函数；给定 output 时原子写出结果。
"""
from __future__ import annotations

import logging
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from numerics.errors import (
    AccumulatorOverflowError,
    ConfigError,
    MappingError,
    NumericDomainError,
    TensorFileError,
)

from ipu.trace import IpuTrace, trace_fp_ip
from oracle.sampling import sample_vectors, to_fp16_bits
from oracle.sweep import SWEEP_COLUMNS, precision_sweep
from tile_sim.engine import TileSimulator
from tile_sim.sweep import SIM_COLUMNS, report_row, sweep_design_space

from .config import ExperimentConfig
from .reporting import run_metadata, write_csv, write_json, write_text
from .storage import ResultStorage

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def exit_code_for(exc: BaseException) -> Optional[int]:
    """异常 -> 退出码；非预期异常返回 None（ConfigError/MappingError 要先于一般 ValueError 判断）"""
    if isinstance(exc, (ConfigError, MappingError)):
        return EXIT_CONFIG
    if isinstance(exc, (NumericDomainError, AccumulatorOverflowError)):
        return EXIT_NUMERIC
    if isinstance(exc, (TensorFileError, OSError)):
        return EXIT_IO
    if isinstance(exc, ValueError):
        return EXIT_CONFIG
    return None


def _trace_inputs(cfg: ExperimentConfig) -> Tuple[list, list]:
    tr = cfg.trace
    if tr.a_bits is not None or tr.b_bits is not None:
        if tr.a_bits is None or tr.b_bits is None:
            raise ConfigError("trace.a_bits 与 trace.b_bits 必须同时给出")
        a, b = [int(x) for x in tr.a_bits], [int(y) for y in tr.b_bits]
    elif tr.a is not None or tr.b is not None:
        if tr.a is None or tr.b is None:
            raise ConfigError("trace.a 与 trace.b 必须同时给出")
        a = [int(x) for x in to_fp16_bits(np.array(tr.a, dtype=np.float64))]
        b = [int(y) for y in to_fp16_bits(np.array(tr.b, dtype=np.float64))]
    else:
        a_bits, b_bits = sample_vectors(tr.dist, None, cfg.ipu.n, 1, cfg.seed)
        a, b = [int(x) for x in a_bits[0]], [int(y) for y in b_bits[0]]

    if len(a) != len(b):
        raise ConfigError(f"trace 向量长度不一致: {len(a)} vs {len(b)}")
    if not 1 <= len(a) <= min(cfg.ipu.n, 16):
        raise ConfigError(f"trace 向量长度必须在 1..min(n, 16) 内: {len(a)}")
    return a, b


def run_trace_ipu(cfg: ExperimentConfig) -> IpuTrace:
    """逐周期追踪一次 FP-IP，输出 JSON 与文本"""
    a, b = _trace_inputs(cfg)
    trace = trace_fp_ip(a, b, cfg.ipu.to_ipu_config(), cfg.ipu.acc_format, cfg.ipu.multicycle)
    if cfg.output:
        meta = run_metadata(cfg.hashable_dict(), cfg.seed)
        write_json(trace.to_dict(), cfg.output, meta)
        write_text(trace.render_text(), f"{cfg.output}.txt")
    return trace


def run_analyze_error(cfg: ExperimentConfig) -> pd.DataFrame:
    """精度研究，每个 (分布, 累加格式) 一组 w 行"""
    an = cfg.analysis
    frames = []
    for dist in an.dists:
        for fmt in an.acc_formats:
            frames.append(precision_sweep(
                dist=dist,
                acc_format=fmt,
                w_range=an.w_range,
                count=an.count,
                seed=cfg.seed,
                n=an.n,
                params=an.params.get(dist),
                sw_precision=an.sw_precision,
                multicycle=an.multicycle,
                threads=cfg.threads,
            ))
    df = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=SWEEP_COLUMNS)
    _emit(cfg, df)
    return df


def run_simulate_tile(cfg: ExperimentConfig) -> pd.DataFrame:
    """按配置的 tile 模拟每一层"""
    tile = cfg.tile_config()
    sim = TileSimulator(tile)
    rows = [report_row(sim.simulate_layer(layer, cfg.seed), tile) for layer in cfg.layer_specs()]
    df = pd.DataFrame(rows, columns=SIM_COLUMNS)
    _emit(cfg, df)
    return df


def run_sweep(cfg: ExperimentConfig) -> pd.DataFrame:
    """w 列表 x 簇大小 的设计空间扫描"""
    df = sweep_design_space(
        cfg.layer_specs(),
        cfg.sweep.w_list,
        cfg.sweep.cluster_sizes,
        seed=cfg.seed,
        tile=cfg.tile_config(),
        threads=cfg.threads,
    )
    _emit(cfg, df)
    return df


def _emit(cfg: ExperimentConfig, df: pd.DataFrame):
    if cfg.output:
        write_csv(df, cfg.output, run_metadata(cfg.hashable_dict(), cfg.seed))


WORKFLOW_RUNNERS = {
    "trace-ipu": run_trace_ipu,
    "analyze-error": run_analyze_error,
    "simulate-tile": run_simulate_tile,
    "sweep": run_sweep,
}


def run_workflow(cfg: ExperimentConfig, storage: Optional[ResultStorage] = None):
    """运行配置指定的工作流；给定 storage 时结果表同时存入 SQLite"""
    logger.info("运行工作流 %s（seed=%s）", cfg.workflow, cfg.seed)
    result = WORKFLOW_RUNNERS[cfg.workflow](cfg)
    if storage is not None:
        meta = run_metadata(cfg.hashable_dict(), cfg.seed)
        table = result if isinstance(result, pd.DataFrame) else pd.DataFrame(result.to_dict()["cycles"])
        storage.save_rows(cfg.workflow, table, meta, cfg.hashable_dict())
    return result
