"""experiment: 实验配置、张量文件、工作流与结果输出。"""

__version__ = "0.3.0"

TOOL_NAME = "mixed_precision_ipu"
