"""numerics: FP16/FP32 编解码、半字节分解与精确二进制有理数。"""

from .errors import (
    IpuModelError,
    NumericDomainError,
    AccumulatorOverflowError,
    MappingError,
    ConfigError,
    TensorFileError,
)
from .models import (
    FpClass,
    FloatFormat,
    FP16,
    FP32,
    FORMATS,
    format_by_name,
    FloatValue,
    Fp16Value,
    DecomposedOperand,
    ExactValue,
)
from .fp_codec import (
    decode_float,
    decode_fp16,
    decode_fp32,
    decompose_fp16,
    decompose_int,
    recompose_int,
    value_to_exact,
    bits_to_exact,
    fp16_to_exact,
    round_to_format,
    round_to_fp16,
    round_to_fp32,
)

__all__ = [
    "IpuModelError",
    "NumericDomainError",
    "AccumulatorOverflowError",
    "MappingError",
    "ConfigError",
    "TensorFileError",
    "FpClass",
    "FloatFormat",
    "FP16",
    "FP32",
    "FORMATS",
    "format_by_name",
    "FloatValue",
    "Fp16Value",
    "DecomposedOperand",
    "ExactValue",
    "decode_float",
    "decode_fp16",
    "decode_fp32",
    "decompose_fp16",
    "decompose_int",
    "recompose_int",
    "value_to_exact",
    "bits_to_exact",
    "fp16_to_exact",
    "round_to_format",
    "round_to_fp16",
    "round_to_fp32",
]
