"""
卷积 tile 周期模拟器测试
"""
import numpy as np
import pytest

from ipu import AccumulatorState, fp_ip_accumulate, fp_ip_step
from numerics import MappingError, NumericDomainError, round_to_fp16
from oracle.sampling import to_fp16_bits
from tile_sim import (
    SIM_COLUMNS,
    DataSource,
    LayerSpec,
    TileConfig,
    TileSimulator,
    baseline_cycles,
    exp_diff_histogram,
    simulate_layer,
    sweep_design_space,
)


def fp16_array(values):
    return to_fp16_bits(np.asarray(values, dtype=np.float64))


def synthetic_layer(name="conv", C=8, H=6, W=6, K=8, R=3, S=3, **source):
    return LayerSpec(name=name, C=C, H=H, W=W, K=K, R=R, S=S, source=DataSource(**source))


def two_partition_layer():
    """通道 0 为 256、其余为 1：每步对齐差 (0, 8, ..., 8)"""
    ifm = np.ones((8, 4, 4))
    ifm[0] = 256.0
    weights = np.ones((8, 8, 3, 3))
    return LayerSpec(
        name="two-partitions", C=8, H=4, W=4, K=8,
        source=DataSource(kind="array", ifm=fp16_array(ifm), weights=fp16_array(weights)),
    )


class TestModels:
    """测试 tile 与层配置"""

    def test_presets(self):
        small, big = TileConfig.small(), TileConfig.big()
        assert small.unroll == (8, 8, 2, 2)
        assert big.unroll == (16, 16, 2, 2)
        assert small.ipus_per_tile == 32
        assert big.with_(cluster_size=4).num_clusters == 16

    def test_c_exceeds_inputs(self):
        with pytest.raises(MappingError):
            TileConfig.small(ipu_inputs=4)

    def test_cluster_must_divide(self):
        with pytest.raises(ValueError):
            TileConfig.small(cluster_size=3)

    def test_invalid_layer(self):
        with pytest.raises(MappingError):
            LayerSpec(name="bad", C=8, H=2, W=2, K=8, R=3, S=3)
        with pytest.raises(MappingError):
            LayerSpec(name="bad", C=0, H=4, W=4, K=8)

    def test_output_shape(self):
        layer = LayerSpec(name="s2", C=3, H=7, W=7, K=4, stride=2, padding=1)
        assert (layer.out_h, layer.out_w) == (4, 4)
        assert layer.macs == 4 * 16 * 3 * 9

    def test_array_shape_mismatch(self):
        layer = LayerSpec(
            name="x", C=8, H=4, W=4, K=8,
            source=DataSource(kind="array", ifm=np.zeros((8, 3, 3), np.uint16),
                              weights=np.zeros((8, 8, 3, 3), np.uint16)),
        )
        with pytest.raises(MappingError):
            simulate_layer(layer, TileConfig.small())

    def test_exp_spread_range(self):
        with pytest.raises(ValueError):
            DataSource(exp_spread=13)
        layer = synthetic_layer(C=8, H=6, W=6, K=8, dist="laplace", exp_spread=12)
        ifm, weights = layer.source.materialize(layer, 0)
        for t in (ifm, weights):
            assert not np.any((t >> 10 & 0x1F) == 0x1F)

    def test_inf_in_tensor(self):
        ifm = np.full((8, 4, 4), 0x7C00, dtype=np.uint16)
        layer = LayerSpec(
            name="inf", C=8, H=4, W=4, K=8,
            source=DataSource(kind="array", ifm=ifm, weights=np.zeros((8, 8, 3, 3), np.uint16)),
        )
        with pytest.raises(NumericDomainError):
            simulate_layer(layer, TileConfig.small())


class TestBaseline:
    """测试 38 位加法树基线"""

    def test_pointwise_conv(self):
        layer = synthetic_layer(C=8, H=2, W=2, K=8, R=1, S=1)
        assert baseline_cycles(layer, TileConfig.small()) == 9

    def test_scales_with_blocks(self):
        tile = TileConfig.small(num_tiles=1)
        a = synthetic_layer(C=8, H=2, W=2, K=8, R=1, S=1)
        b = synthetic_layer(C=8, H=2, W=2, K=16, R=1, S=1)
        assert baseline_cycles(b, tile) == 2 * baseline_cycles(a, tile)
        # 块数不超过 tile 数时并行完成
        assert baseline_cycles(b, TileConfig.small()) == baseline_cycles(a, TileConfig.small())

    def test_wide_ipu_matches_baseline(self):
        """测试 w=38 时每次迭代都只需 1 周期"""
        for cs in (1, 4, 32):
            tile = TileConfig.small(w=38, cluster_size=cs)
            layer = synthetic_layer(C=12, H=6, W=7, K=10, kind="exponent", exp_range=(-14, 15))
            report = simulate_layer(layer, tile, seed=1)
            assert report.total_cycles == report.baseline_cycles
            assert report.normalized_time == 1.0
            assert report.mean_cycles_per_iteration == 1.0


class TestCycles:
    """测试周期计数与队列"""

    def test_walkthrough_step_cost(self):
        """测试每个 IPU 都是 walk-through 数据时每步 18 周期"""
        ifm = fp16_array([32, 2, 4, 16]).reshape(4, 1, 1)
        weights = np.tile(fp16_array([32, 2, 2, 16]).reshape(1, 4, 1, 1), (2, 1, 1, 1))
        layer = LayerSpec(name="walk", C=4, H=1, W=1, K=2, R=1, S=1,
                          source=DataSource(kind="array", ifm=ifm, weights=weights))
        tile = TileConfig(C=4, K=2, Ho=1, Wo=1, num_tiles=1, w=14)
        report = simulate_layer(layer, tile, compute_outputs=True)
        assert report.total_cycles == 18
        assert report.baseline_cycles == 9
        assert report.mean_cycles_per_iteration == 2.0
        assert report.outputs.tolist() == [[[round_to_fp16(1292)]]] * 2

    def test_two_partitions_double_time(self):
        for cs in (1, 32):
            report = simulate_layer(two_partition_layer(), TileConfig.small(w=16, cluster_size=cs))
            assert report.total_cycles == 2 * report.baseline_cycles
            assert report.stall_cycles == 0

    def test_masked_lanes_cost_nothing(self):
        """测试对齐差超出软件精度的通道不占周期"""
        report = simulate_layer(two_partition_layer(), TileConfig.small(w=16, sw_precision=8))
        assert report.total_cycles == report.baseline_cycles

    def test_macs_conserved(self):
        for layer in (
            synthetic_layer(C=10, H=7, W=5, K=5),
            synthetic_layer(C=8, H=4, W=4, K=8, R=1, S=1),
            LayerSpec(name="s2", C=3, H=9, W=9, K=12, stride=2, padding=1),
        ):
            report = simulate_layer(layer, TileConfig.small())
            assert report.macs == layer.macs

    def test_normalized_time_at_least_one(self):
        layer = synthetic_layer(C=8, H=6, W=6, K=8, kind="exponent", exp_range=(-14, 15))
        report = simulate_layer(layer, TileConfig.small(w=12))
        assert report.normalized_time > 1.0
        assert report.total_cycles >= report.baseline_cycles

    def test_cluster_monotone(self):
        """测试簇越大（整除链）总周期不减"""
        layer = synthetic_layer(C=8, H=8, W=8, K=16, dist="laplace", exp_spread=4)
        totals = [
            simulate_layer(layer, TileConfig.small(w=14, cluster_size=cs), seed=2).total_cycles
            for cs in (1, 2, 4, 8, 16, 32)
        ]
        assert totals == sorted(totals)

    def test_precision_monotone(self):
        """测试逐阈值计数时总周期随 w 不增"""
        layer = synthetic_layer(C=8, H=6, W=6, K=8, dist="normal", exp_spread=3)
        totals = [
            simulate_layer(layer, TileConfig.small(w=w, cluster_size=4, charge_empty_partitions=True),
                           seed=5).total_cycles
            for w in range(10, 39, 2)
        ]
        assert totals == sorted(totals, reverse=True)

    def test_deeper_buffers_never_slower(self):
        layer = synthetic_layer(C=8, H=8, W=8, K=8, dist="laplace", exp_spread=5)
        totals = [
            simulate_layer(layer, TileConfig.small(w=13, buffer_depth=d), seed=3).total_cycles
            for d in (1, 2, 4, 16)
        ]
        assert totals == sorted(totals, reverse=True)

    @pytest.mark.parametrize("dist", ["laplace", "normal"])
    @pytest.mark.parametrize("w", [12, 16])
    def test_big_tile_not_faster_than_small(self, dist, w):
        """测试相同数据下 16 输入 IPU 的归一化时间不低于 8 输入"""
        layer = LayerSpec(name="conv3x3", C=32, H=14, W=14, K=32, padding=1,
                          source=DataSource(dist=dist))
        for seed in (0, 1):
            small = simulate_layer(layer, TileConfig.small(w=w), seed=seed)
            big = simulate_layer(layer, TileConfig.big(w=w), seed=seed)
            assert big.normalized_time >= small.normalized_time

    def test_queue_absorbs_imbalance(self):
        """测试两簇负载交错时队列让各自按自己的节奏运行"""
        costs = np.array([[[18, 9], [9, 9], [9, 9], [9, 18]]])
        total, busy = TileSimulator._run_tile(costs, depth=1)
        assert total == 45
        assert busy.tolist() == [45, 45]

    def test_queue_bounds(self, rng):
        """测试总周期介于最忙簇与同步锁步之间，且随队列加深不增"""
        costs = 9 * rng.integers(1, 5, size=(3, 6, 4))
        lockstep = int(costs.max(axis=2).sum())
        previous = None
        for depth in (1, 2, 3, 8):
            total, busy = TileSimulator._run_tile(costs, depth)
            assert busy.max() <= total <= lockstep
            if previous is not None:
                assert total <= previous
            previous = total


def random_bits(rng, shape, exp_lo, exp_hi):
    """随机 FP16 位模式，约 10% 为 ±0，raw_exp=0 时为非正规数"""
    sign = rng.integers(0, 2, size=shape) << 15
    exp = rng.integers(exp_lo, exp_hi + 1, size=shape) << 10
    man = rng.integers(0, 1024, size=shape)
    bits = (sign | exp | man).astype(np.uint16)
    zeros = rng.random(shape) < 0.1
    bits[zeros] = (sign[zeros]).astype(np.uint16)
    return bits


class TestCycleTable:
    """整层向量化周期表与逐步 EHU 调度一致"""

    @pytest.mark.parametrize("exp_range", [(0, 30), (12, 18)])
    @pytest.mark.parametrize("overrides", [
        {"w": 10},
        {"w": 12, "charge_empty_partitions": True},
        {"w": 14, "sw_precision": 8},
        {"w": 12, "ipu_inputs": 16},
        {"w": 10, "charge_empty_partitions": True, "sw_precision": 24},
    ])
    def test_matches_fp_ip_step(self, rng, exp_range, overrides):
        tile = TileConfig.small(**overrides)
        cfg = tile.ipu_config()
        # C=11 在 C_u=8 下最后一个 chunk 只有 3 个通道
        C, K, stride, pad = 11, 3, 2, 1
        ifm = random_bits(rng, (C, 5, 5), *exp_range)
        weights = random_bits(rng, (K, C, 3, 3), *exp_range)
        layer = LayerSpec(
            name="odd", C=C, H=5, W=5, K=K, stride=stride, padding=pad,
            source=DataSource(kind="array", ifm=ifm, weights=weights),
        )
        table, _ = TileSimulator(tile)._cycle_table(layer, ifm, weights)
        assert table.shape == (K, 2, 3, 3, layer.out_h, layer.out_w)

        padded = np.pad(ifm, ((0, 0), (pad, pad), (pad, pad)))
        for k, c, r, s, oh, ow in np.ndindex(*table.shape):
            lanes = range(c * tile.C, min((c + 1) * tile.C, C))
            a = [int(padded[ch, oh * stride + r, ow * stride + s]) for ch in lanes]
            b = [int(weights[k, ch, r, s]) for ch in lanes]
            _, stats, _ = fp_ip_step(AccumulatorState(), a, b, cfg)
            assert table[k, c, r, s, oh, ow] == stats.iteration_cycles, (k, c, r, s, oh, ow)


class TestOutputs:
    """测试数值结果与模拟配置无关"""

    def test_outputs_match_ipu_model(self):
        layer = synthetic_layer(C=8, H=4, W=4, K=2, dist="normal")
        tile = TileConfig.small(w=14)
        sim = TileSimulator(tile)
        report = sim.simulate_layer(layer, seed=6, compute_outputs=True)
        assert report.outputs.shape == (2, 2, 2)

        ifm, weights = layer.source.materialize(layer, 6)
        steps = [
            ([int(x) for x in ifm[:, 1 + r, 0 + s]], [int(y) for y in weights[1, :, r, s]])
            for r in range(3) for s in range(3)
        ]
        bits, _, _ = fp_ip_accumulate(steps, tile.ipu_config(), "fp16", multicycle=True)
        assert report.outputs[1, 1, 0] == bits

    def test_outputs_independent_of_schedule(self):
        layer = synthetic_layer(C=8, H=4, W=5, K=3, dist="laplace", exp_spread=2)
        reference = None
        for cs, depth in ((1, 1), (4, 2), (32, 8)):
            report = simulate_layer(layer, TileConfig.small(w=15, cluster_size=cs, buffer_depth=depth),
                                    seed=4, compute_outputs=True)
            if reference is None:
                reference = report.outputs
            assert np.array_equal(report.outputs, reference)

    def test_fp32_outputs(self):
        layer = synthetic_layer(C=8, H=3, W=3, K=1, kind="constant", value=0.5)
        report = simulate_layer(layer, TileConfig.small(acc_format="fp32"), compute_outputs=True)
        assert report.outputs.dtype == np.uint32
        # 72 * 0.25 = 18.0
        assert int(report.outputs[0, 0, 0]) == 0x41900000


class TestHistogram:
    """测试对齐差直方图"""

    def test_constant_data(self):
        layer = synthetic_layer(C=8, H=4, W=4, K=8, kind="constant", value=1.5)
        hist = exp_diff_histogram(layer, TileConfig.small())
        assert hist.shape == (59,)
        assert hist[0] == layer.macs
        assert hist[1:].sum() == 0

    def test_narrow_exponent_range(self):
        layer = synthetic_layer(C=8, H=4, W=4, K=8, kind="exponent", exp_range=(0, 1))
        hist = exp_diff_histogram(layer, TileConfig.small(), seed=3)
        assert hist[3:].sum() == 0
        assert hist.sum() == layer.macs
        assert hist[1] > 0 and hist[2] > 0

    def test_report_percentage(self):
        report = simulate_layer(two_partition_layer(), TileConfig.small())
        assert report.pct_diffs_gt8 == 0.0
        assert report.exp_diff_histogram[8] == 7 * report.exp_diff_histogram[0]

    def test_laplace_mass_near_zero(self):
        """Laplace 数据的对齐差集中在小值，尾部逐段衰减"""
        layer = synthetic_layer(C=8, H=16, W=16, K=16, dist="laplace")
        hist = exp_diff_histogram(layer, TileConfig.small(), seed=0)
        assert hist.sum() == layer.macs
        assert hist[:9].sum() >= 0.75 * hist.sum()
        assert hist[:9].sum() > hist[9:17].sum() > hist[17:].sum()
        assert hist[8:12].sum() > hist[12:16].sum() > hist[16:20].sum()
        assert np.all(hist[0] >= hist[9:])

    def test_zero_lanes_excluded(self):
        layer = LayerSpec(name="pad", C=8, H=2, W=2, K=8, padding=1,
                          source=DataSource(kind="constant", value=1.0))
        hist = exp_diff_histogram(layer, TileConfig.small())
        assert hist.sum() == 8 * 8 * 4 * 4


class TestSweep:
    """测试设计空间扫描"""

    def test_rows(self):
        layers = [synthetic_layer(name="a", C=8, H=4, W=4, K=8), synthetic_layer(name="b", C=4, H=5, W=5, K=8)]
        df = sweep_design_space(layers, [12, 38], [1, 32], seed=1)
        assert list(df.columns) == SIM_COLUMNS
        assert len(df) == 8
        assert (df.loc[df["w"] == 38, "normalized_time"] == 1.0).all()
        assert (df["normalized_time"] >= 1.0).all()
