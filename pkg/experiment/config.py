"""
实验配置（JSON）

各层键均做校验，未知键直接拒绝。
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from numerics.errors import ConfigError, MappingError

from ipu.config import IpuConfig
from oracle.sampling import DISTRIBUTIONS
from tile_sim.models import DataSource, LayerSpec, TileConfig

from .tensor_file import load_tensor

logger = logging.getLogger(__name__)

WORKFLOWS = ("trace-ipu", "analyze-error", "simulate-tile", "sweep")


def _check_keys(section: Dict[str, Any], allowed: Sequence[str], where: str):
    if not isinstance(section, dict):
        raise ConfigError(f"{where} 必须是 JSON 对象")
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"{where} 含未知键: {unknown}")


@dataclass
class IpuSection:
    n: int = 16
    w: int = 16
    sw_precision: int = 16
    max_accumulations: int = 1 << 15
    charge_empty_partitions: bool = False
    multicycle: bool = True
    acc_format: str = "fp16"

    def to_ipu_config(self) -> IpuConfig:
        return IpuConfig(
            n=self.n,
            w=self.w,
            sw_precision=self.sw_precision,
            max_accumulations=self.max_accumulations,
            charge_empty_partitions=self.charge_empty_partitions,
        )


@dataclass
class TraceSection:
    """a / b 为实数（舍入到 FP16），a_bits / b_bits 为位模式；都不给时按种子采样"""
    a: Optional[List[float]] = None
    b: Optional[List[float]] = None
    a_bits: Optional[List[int]] = None
    b_bits: Optional[List[int]] = None
    dist: str = "normal"


@dataclass
class AnalysisSection:
    dists: List[str] = field(default_factory=lambda: ["normal"])
    acc_formats: List[str] = field(default_factory=lambda: ["fp16", "fp32"])
    w_min: int = 9
    w_max: int = 38
    count: int = 100_000
    n: int = 16
    params: Dict[str, Dict[str, float]] = field(default_factory=dict)
    sw_precision: Optional[int] = None
    multicycle: bool = False

    @property
    def w_range(self) -> range:
        return range(self.w_min, self.w_max + 1)


@dataclass
class SweepSection:
    w_list: List[int] = field(default_factory=lambda: [12, 14, 16, 20, 25, 38])
    cluster_sizes: List[int] = field(default_factory=lambda: [1, 2, 4, 8])


_TILE_KEYS = ("preset", "C", "K", "Ho", "Wo", "cluster_size", "buffer_depth", "num_tiles",
              "w", "sw_precision", "charge_empty_partitions", "acc_format", "ipu_inputs")
_LAYER_KEYS = ("name", "C", "H", "W", "K", "R", "S", "stride", "padding", "source")
_SOURCE_KEYS = ("kind", "dist", "params", "exp_spread", "exp_range", "value", "ifm_path", "weight_path")


@dataclass
class ExperimentConfig:
    """一次实验的完整配置"""
    workflow: str = "trace-ipu"
    seed: int = 0
    output: Optional[str] = None
    threads: int = 1
    ipu: IpuSection = field(default_factory=IpuSection)
    trace: TraceSection = field(default_factory=TraceSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)
    tile: Dict[str, Any] = field(default_factory=lambda: {"preset": "small"})
    layers: List[Dict[str, Any]] = field(default_factory=list)
    sweep: SweepSection = field(default_factory=SweepSection)
    base_dir: Path = field(default=Path("."), compare=False, repr=False)

    @classmethod
    def from_dict(cls, data: Dict[str, Any], base_dir: Path = Path(".")) -> "ExperimentConfig":
        """
        从字典构建并校验

        Raises:
            ConfigError: 未知键、类型或取值错误
        """
        top_keys = ("workflow", "seed", "output", "threads", "ipu", "trace",
                    "analysis", "tile", "layers", "sweep")
        _check_keys(data, top_keys, "配置")

        def _section(key, klass):
            raw = data.get(key, {})
            _check_keys(raw, klass.__dataclass_fields__.keys(), key)
            try:
                return klass(**raw)
            except TypeError as e:
                raise ConfigError(f"{key}: {e}") from e

        tile = data.get("tile", {"preset": "small"})
        _check_keys(tile, _TILE_KEYS, "tile")
        layers = data.get("layers", [])
        if not isinstance(layers, list):
            raise ConfigError("layers 必须是列表")
        for idx, layer in enumerate(layers):
            _check_keys(layer, _LAYER_KEYS, f"layers[{idx}]")
            _check_keys(layer.get("source", {}), _SOURCE_KEYS, f"layers[{idx}].source")

        cfg = cls(
            workflow=data.get("workflow", "trace-ipu"),
            seed=data.get("seed", 0),
            output=data.get("output"),
            threads=data.get("threads", 1),
            ipu=_section("ipu", IpuSection),
            trace=_section("trace", TraceSection),
            analysis=_section("analysis", AnalysisSection),
            tile=dict(tile),
            layers=[dict(layer) for layer in layers],
            sweep=_section("sweep", SweepSection),
            base_dir=Path(base_dir),
        )
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: JSON 解析失败: {e}") from e
        return cls.from_dict(data, base_dir=path.parent)

    def validate(self):
        if self.workflow not in WORKFLOWS:
            raise ConfigError(f"未知工作流: {self.workflow}，可选: {WORKFLOWS}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 1 << 64:
            raise ConfigError(f"seed 必须是 u64 整数: {self.seed!r}")
        if not isinstance(self.threads, int) or self.threads < 1:
            raise ConfigError(f"threads 必须是正整数: {self.threads!r}")
        for dist in self.analysis.dists:
            if dist not in DISTRIBUTIONS:
                raise ConfigError(f"analysis.dists 含未知分布: {dist}")
        if self.analysis.w_min > self.analysis.w_max:
            raise ConfigError("analysis.w_min 不能大于 w_max")
        if self.trace.dist not in DISTRIBUTIONS:
            raise ConfigError(f"trace.dist 未知: {self.trace.dist}")
        try:
            self.ipu.to_ipu_config()
            self.tile_config()
        except ValueError as e:
            if isinstance(e, (ConfigError, MappingError)):
                raise
            raise ConfigError(str(e)) from e
        if self.workflow in ("simulate-tile", "sweep") and not self.layers:
            raise ConfigError(f"{self.workflow} 需要至少一个 layer")

    def to_dict(self) -> Dict[str, Any]:
        """解析后的配置（用于哈希与存档）"""
        return {
            "workflow": self.workflow,
            "seed": self.seed,
            "output": self.output,
            "threads": self.threads,
            "ipu": asdict(self.ipu),
            "trace": asdict(self.trace),
            "analysis": asdict(self.analysis),
            "tile": self.tile,
            "layers": self.layers,
            "sweep": asdict(self.sweep),
        }

    def hashable_dict(self) -> Dict[str, Any]:
        """结果只取决于这些字段：去掉输出路径与进程数"""
        d = self.to_dict()
        d.pop("output")
        d.pop("threads")
        return d

    def tile_config(self, **overrides) -> TileConfig:
        spec = dict(self.tile)
        preset = spec.pop("preset", None)
        spec.update(overrides)
        if preset is None:
            return TileConfig(**spec)
        if preset == "small":
            return TileConfig.small(**spec)
        if preset == "big":
            return TileConfig.big(**spec)
        raise ConfigError(f"未知 tile 预设: {preset}")

    def _data_source(self, raw: Dict[str, Any]) -> DataSource:
        raw = dict(raw)
        kind = raw.get("kind", "synthetic")
        if kind == "tensor":
            ifm_path = raw.get("ifm_path")
            weight_path = raw.get("weight_path")
            if not ifm_path or not weight_path:
                raise ConfigError("tensor 数据来源需要 ifm_path 与 weight_path")
            return DataSource(
                kind="array",
                ifm=load_tensor(self.base_dir / ifm_path),
                weights=load_tensor(self.base_dir / weight_path),
            )
        if "ifm_path" in raw or "weight_path" in raw:
            raise ConfigError(f"{kind} 数据来源不接受张量路径")
        if "exp_range" in raw:
            raw["exp_range"] = tuple(raw["exp_range"])
        try:
            return DataSource(**raw)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"数据来源无效: {e}") from e

    def layer_specs(self) -> List[LayerSpec]:
        """构建 LayerSpec（张量文件在此读入）"""
        specs = []
        for idx, raw in enumerate(self.layers):
            raw = dict(raw)
            source = self._data_source(raw.pop("source", {}))
            raw.setdefault("name", f"layer{idx}")
            try:
                specs.append(LayerSpec(source=source, **raw))
            except TypeError as e:
                raise ConfigError(f"layers[{idx}]: {e}") from e
        return specs
