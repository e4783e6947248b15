"""
测试公共配置
"""
import sys
from pathlib import Path

import numpy as np
import pytest

# 添加项目根目录到路径
sys.path.insert(0, str(Path(__file__).resolve().parents[1]))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: 验收规模的长时间测试（-m 'not slow' 跳过）")


@pytest.fixture
def rng():
    """固定种子的随机数发生器"""
    return np.random.default_rng(12345)

