"""
Model File Codec

Binary layout (all integers little-endian):

    magic            4 bytes   b"OCNN"
    version          u16       FORMAT_VERSION
    channels         u8
    input_size       u16
    param_count      u16
    param_count x:
        name_len     u8
        name         UTF-8
        ndim         u8
        extents      ndim x u32
    parameter data   float32 LE, table order
    momentum data    float32 LE, table order

Anything shorter than the table announces, or longer, is a truncated /
corrupt file and no model is returned.
"""

import io
import logging
import struct
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

from models.network_models import CnnModel, param_names
from utils.errors import (
    ArtifactNotFoundError,
    BadMagicError,
    ConfigError,
    DataError,
    TruncatedFileError,
    VersionMismatchError,
)

logger = logging.getLogger(__name__)

MAGIC = b"OCNN"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHBHH")
_FLOAT = np.dtype("<f4")

PathLike = Union[str, Path]


def encode_model(model: CnnModel) -> bytes:
    """Serialize a model, momentum buffers included."""
    names = list(model.params)
    out = io.BytesIO()
    out.write(_HEADER.pack(MAGIC, FORMAT_VERSION, model.channels, model.input_size, len(names)))
    for name in names:
        encoded = name.encode("utf-8")
        shape = model.params[name].shape
        out.write(struct.pack("<B", len(encoded)))
        out.write(encoded)
        out.write(struct.pack("<B", len(shape)))
        out.write(struct.pack(f"<{len(shape)}I", *shape))
    for table in (model.params, model.momentum):
        for name in names:
            out.write(np.ascontiguousarray(table[name], dtype=_FLOAT).tobytes())
    return out.getvalue()


class _Reader:
    def __init__(self, payload: bytes):
        self.payload = payload
        self.offset = 0

    def take(self, size: int, what: str) -> bytes:
        end = self.offset + size
        if end > len(self.payload):
            raise TruncatedFileError(
                f"truncated model file: needed {size} bytes for {what} at offset {self.offset}, "
                f"{len(self.payload) - self.offset} left")
        chunk = self.payload[self.offset:end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str, what: str) -> Tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode_model(payload: bytes) -> CnnModel:
    """Parse bytes produced by encode_model."""
    if len(payload) >= len(MAGIC) and payload[:len(MAGIC)] != MAGIC:
        raise BadMagicError(f"not a model file (magic {payload[:len(MAGIC)]!r})")
    reader = _Reader(payload)
    magic, version, channels, input_size, count = _HEADER.unpack(reader.take(_HEADER.size, "header"))
    if magic != MAGIC:
        raise BadMagicError(f"not a model file (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"model format version {version}, expected {FORMAT_VERSION}")

    table: List[Tuple[str, Tuple[int, ...]]] = []
    for _ in range(count):
        (name_len,) = reader.unpack("<B", "name length")
        name = reader.take(name_len, "parameter name").decode("utf-8")
        (ndim,) = reader.unpack("<B", "rank")
        shape = reader.unpack(f"<{ndim}I", f"extents of {name}")
        table.append((name, shape))

    buffers: List[Dict[str, np.ndarray]] = [{}, {}]
    for target, section in zip(buffers, ("parameters", "momentum")):
        for name, shape in table:
            size = int(np.prod(shape)) * _FLOAT.itemsize
            raw = reader.take(size, f"{section} of {name}")
            target[name] = np.frombuffer(raw, dtype=_FLOAT).reshape(shape).astype(np.float32)
    if reader.offset != len(payload):
        raise TruncatedFileError(f"{len(payload) - reader.offset} trailing bytes after model data")

    if [name for name, _ in table] != param_names():
        raise DataError(f"unexpected parameter table {[name for name, _ in table]}")
    try:
        return CnnModel(channels=channels, input_size=input_size, params=buffers[0], momentum=buffers[1])
    except ConfigError as e:
        raise DataError(f"invalid model file: {e}") from e


def save_model(model: CnnModel, path: PathLike) -> None:
    """Write a model file, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = encode_model(model)
    try:
        path.write_bytes(payload)
    except OSError as e:
        raise DataError(f"cannot write model file {path}: {e}") from e
    logger.info(f"Saved model ({model.channels} channels, {model.num_parameters()} parameters) to {path}")


def load_model(path: PathLike) -> CnnModel:
    """Read a model file; raises ArtifactNotFoundError when it does not exist."""
    path = Path(path)
    if not path.is_file():
        raise ArtifactNotFoundError("model file", path)
    model = decode_model(path.read_bytes())
    logger.info(f"Loaded model ({model.channels} channels) from {path}")
    return model
