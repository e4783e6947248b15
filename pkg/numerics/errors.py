"""
异常定义

CLI 按异常类型映射退出码（见 experiment/workflows.py）。
"""


class IpuModelError(Exception):
    """模型异常基类"""


class NumericDomainError(IpuModelError, ValueError):
    """数值域错误：INF/NaN 输入、整数越界等"""


class AccumulatorOverflowError(IpuModelError, ArithmeticError):
    """累加寄存器超出 33+t+l 位宽"""


class MappingError(IpuModelError, ValueError):
    """卷积层无法映射到 tile（例如 C 展开大于 IPU 输入数）"""


class ConfigError(IpuModelError, ValueError):
    """实验配置不符合 schema"""


class TensorFileError(IpuModelError, OSError):
    """MPT1 张量文件格式错误"""
