"""Binary weights file: magic, version, config echo, then named tensors.

Layout (little-endian):

    4 bytes   magic "TCW1"
    u32       version (1)
    u32       length of the JSON-encoded model config, then that many bytes
    u32       tensor count
    per tensor, sorted by name:
        u32   name length, then UTF-8 name
        u32   rank, then u32 dims
        f32   values (C order)

The loader validates every tensor shape against the config.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import ShapeMismatchError
from .model import ModelConfig, init_params

MAGIC = b"TCW1"
VERSION = 1


def save_weights(path: str | Path, cfg: ModelConfig, params: dict[str, np.ndarray]) -> None:
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", VERSION)
    cfg_bytes = json.dumps(cfg.to_dict(), sort_keys=True).encode("utf-8")
    blob += struct.pack("<I", len(cfg_bytes))
    blob += cfg_bytes
    blob += struct.pack("<I", len(params))
    for name in sorted(params):
        tensor = np.ascontiguousarray(params[name], dtype="<f4")
        name_bytes = name.encode("utf-8")
        blob += struct.pack("<I", len(name_bytes))
        blob += name_bytes
        blob += struct.pack("<I", tensor.ndim)
        blob += struct.pack(f"<{tensor.ndim}I", *tensor.shape)
        blob += tensor.tobytes()
    Path(path).write_bytes(bytes(blob))


def load_weights(path: str | Path) -> tuple[ModelConfig, dict[str, np.ndarray]]:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ValueError("not a trajcast weights file")
    pos = 4
    (version,) = struct.unpack_from("<I", data, pos)
    pos += 4
    if version != VERSION:
        raise ValueError(f"unsupported weights version {version}")
    (cfg_len,) = struct.unpack_from("<I", data, pos)
    pos += 4
    cfg = ModelConfig.from_dict(json.loads(data[pos : pos + cfg_len].decode("utf-8")))
    pos += cfg_len
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    params: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<I", data, pos)
        pos += 4
        name = data[pos : pos + name_len].decode("utf-8")
        pos += name_len
        (rank,) = struct.unpack_from("<I", data, pos)
        pos += 4
        shape = struct.unpack_from(f"<{rank}I", data, pos)
        pos += 4 * rank
        size = int(np.prod(shape)) if rank else 1
        values = np.frombuffer(data, dtype="<f4", count=size, offset=pos).reshape(shape)
        pos += 4 * size
        params[name] = values.astype(np.float32)

    expected = init_params(cfg, np.random.default_rng(0), np.float32)
    if set(expected) != set(params):
        missing = set(expected).symmetric_difference(params)
        raise ShapeMismatchError(f"tensor names do not match the config: {sorted(missing)}")
    for name, ref in expected.items():
        if params[name].shape != ref.shape:
            raise ShapeMismatchError(
                f"tensor {name!r} has shape {params[name].shape}, config implies {ref.shape}"
            )
    return cfg, params
