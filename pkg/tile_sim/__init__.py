"""tile_sim: MC-IPU 卷积 tile 周期精确模拟。"""

from .models import TileConfig, LayerSpec, DataSource, SimReport, HISTOGRAM_BINS, NIBBLE_ITERATIONS
from .histogram import decode_exponents, exp_diff_histogram
from .engine import TileSimulator, simulate_layer, baseline_cycles
from .sweep import SIM_COLUMNS, report_row, sweep_design_space

__all__ = [
    "TileConfig",
    "LayerSpec",
    "DataSource",
    "SimReport",
    "HISTOGRAM_BINS",
    "NIBBLE_ITERATIONS",
    "decode_exponents",
    "exp_diff_histogram",
    "TileSimulator",
    "simulate_layer",
    "baseline_cycles",
    "SIM_COLUMNS",
    "report_row",
    "sweep_design_space",
]
