"""
MPT1 张量文件

布局（小端）:
    b"MPT1" | uint8 dtype (1 = FP16) | uint8 rank | rank x uint32 dims | payload
payload 为 FP16 位模式，长度必须等于 2 * prod(dims) 字节。
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from numerics.errors import TensorFileError

MAGIC = b"MPT1"
DTYPE_FP16 = 1
_DTYPES = {DTYPE_FP16: np.dtype("<u2")}

PathLike = Union[str, os.PathLike]


@dataclass
class TensorFile:
    """FP16 张量（位模式）"""
    data: np.ndarray
    dtype: int = DTYPE_FP16

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(self.data.shape)

    @classmethod
    def read(cls, path: PathLike) -> "TensorFile":
        raw = Path(path).read_bytes()
        if raw[:4] != MAGIC:
            raise TensorFileError(f"{path}: 魔数错误 {raw[:4]!r}")
        if len(raw) < 6:
            raise TensorFileError(f"{path}: 文件头不完整")
        dtype, rank = struct.unpack_from("<BB", raw, 4)
        if dtype not in _DTYPES:
            raise TensorFileError(f"{path}: 不支持的 dtype 代码 {dtype}")

        header_len = 6 + 4 * rank
        if len(raw) < header_len:
            raise TensorFileError(f"{path}: 维度信息不完整")
        dims = struct.unpack_from(f"<{rank}I", raw, 6)

        np_dtype = _DTYPES[dtype]
        expected = np_dtype.itemsize * int(np.prod(dims, dtype=np.int64))
        payload = raw[header_len:]
        if len(payload) != expected:
            raise TensorFileError(
                f"{path}: payload 长度 {len(payload)} 与维度 {dims} 不符（应为 {expected}）"
            )
        data = np.frombuffer(payload, dtype=np_dtype).astype(np.uint16).reshape(dims)
        return cls(data=data, dtype=dtype)

    def write(self, path: PathLike):
        """原子写入（临时文件 + 重命名）"""
        if self.dtype not in _DTYPES:
            raise TensorFileError(f"不支持的 dtype 代码 {self.dtype}")
        header = MAGIC + struct.pack("<BB", self.dtype, len(self.dims))
        header += struct.pack(f"<{len(self.dims)}I", *self.dims)
        payload = np.ascontiguousarray(self.data, dtype=_DTYPES[self.dtype]).tobytes()

        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(header + payload)
        os.replace(tmp, path)


def load_tensor(path: PathLike) -> np.ndarray:
    return TensorFile.read(path).data


def save_tensor(path: PathLike, data: np.ndarray):
    TensorFile(data=np.asarray(data, dtype=np.uint16)).write(path)
