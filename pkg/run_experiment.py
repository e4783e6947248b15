#!/usr/bin/env python3
"""
混合精度 IPU 实验入口

用法:
    python run_experiment.py --config experiments/walkthrough.json
    python run_experiment.py --config experiments/analyze_error.json --threads 8 --out results/err.csv
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import List, Optional

from experiment import __version__
from experiment.config import WORKFLOWS, ExperimentConfig
from experiment.storage import ResultStorage
from experiment.workflows import EXIT_OK, exit_code_for, run_workflow
from ipu.trace import IpuTrace

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description="混合精度 IPU 功能模型与 tile 周期模拟")
    p.add_argument("--config", help="JSON 实验配置路径")
    p.add_argument("--seed", type=int, default=None, help="随机种子（u64，覆盖配置）")
    p.add_argument("--out", default=None, help="输出路径（覆盖配置）")
    p.add_argument("--workflow", choices=WORKFLOWS, default=None, help="工作流（覆盖配置）")
    p.add_argument("--threads", type=int, default=None, help="并行进程数")
    p.add_argument("--db", default=None, help="同时把结果存入该 SQLite 数据库")
    p.add_argument("--verbose", action="store_true", help="输出调试日志")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """读取配置并应用命令行覆盖"""
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig.from_dict({})
    overrides = {}
    if args.workflow is not None:
        overrides["workflow"] = args.workflow
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output"] = args.out
    if args.threads is not None:
        overrides["threads"] = args.threads
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
        cfg.validate()
    return cfg


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s',
    )

    try:
        cfg = load_config(args)
        storage = ResultStorage(args.db) if args.db else None
        result = run_workflow(cfg, storage)
    except Exception as e:
        code = exit_code_for(e)
        if code is None:
            raise
        logger.error("%s: %s", type(e).__name__, e)
        return code

    if isinstance(result, IpuTrace):
        print(result.render_text())
    else:
        print(result.to_string(index=False))
    if cfg.output:
        logger.info("输出: %s", Path(cfg.output).resolve())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
