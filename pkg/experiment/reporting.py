"""
结果输出：CSV / JSON / 文本，均原子写入

每个输出附带运行元数据（config_hash, seed, tool_version）：
CSV 写在 <out>.meta.json 旁路文件，JSON 直接内嵌。
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Union

import pandas as pd

from . import TOOL_NAME, __version__

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.9e"

PathLike = Union[str, os.PathLike]


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def config_hash(config: Dict[str, Any]) -> str:
    """规范化 JSON 的 sha256"""
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def run_metadata(config: Dict[str, Any], seed: int) -> Dict[str, Any]:
    return {
        "config_hash": config_hash(config),
        "seed": seed,
        "tool": TOOL_NAME,
        "tool_version": __version__,
    }


def _atomic_write(path: PathLike, text: str):
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    os.replace(tmp, path)


def meta_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def write_csv(df: pd.DataFrame, path: PathLike, meta: Dict[str, Any]) -> Path:
    """写 CSV 及其元数据旁路文件"""
    _atomic_write(path, df.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n"))
    _atomic_write(meta_path(path), json.dumps(meta, indent=2, sort_keys=True) + "\n")
    logger.info("结果已写入 %s（%s 行）", path, len(df))
    return Path(path)


def write_json(obj: Dict[str, Any], path: PathLike, meta: Dict[str, Any]) -> Path:
    _atomic_write(path, json.dumps({"meta": meta, **obj}, indent=2, sort_keys=True) + "\n")
    logger.info("结果已写入 %s", path)
    return Path(path)


def write_text(text: str, path: PathLike) -> Path:
    _atomic_write(path, text if text.endswith("\n") else text + "\n")
    return Path(path)
