"""Binary checkpoint format.

Layout: 8-byte magic, then a payload (version, JSON config snapshot,
named-tensor table), then CRC-32 of the payload bytes. Tensors are stored
row-major little-endian; f64 by default, f32 as opt-in.
"""

from __future__ import annotations

import json
import struct
import zlib

import numpy as np

from .autodiff import Tensor
from .errors import CheckpointError

MAGIC = b"SPTSEG1\x00"
VERSION = 1
_DTYPES = {0: "<f4", 1: "<f8"}
_TAGS = {"f32": 0, "f64": 1}


def save_checkpoint(tensors, config, dtype="f64"):
    """Serialize named tensors plus a config snapshot to bytes."""
    if dtype not in _TAGS:
        raise CheckpointError(f"unknown dtype {dtype!r}")
    tag = _TAGS[dtype]
    np_dtype = _DTYPES[tag]
    parts = [struct.pack("<I", VERSION)]
    cfg_bytes = json.dumps(config, sort_keys=True).encode("utf-8")
    parts.append(struct.pack("<I", len(cfg_bytes)))
    parts.append(cfg_bytes)
    parts.append(struct.pack("<I", len(tensors)))
    for name in sorted(tensors):
        arr = tensors[name].data if isinstance(tensors[name], Tensor) else np.asarray(tensors[name])
        nb = name.encode("utf-8")
        parts.append(struct.pack("<H", len(nb)))
        parts.append(nb)
        parts.append(struct.pack("<BB", tag, arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype=np_dtype).tobytes())
    payload = b"".join(parts)
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    return MAGIC + payload + struct.pack("<I", crc)


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise CheckpointError("truncated checkpoint")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(blob):
    """Parse checkpoint bytes -> (tensors: dict[str, np.ndarray], config)."""
    if len(blob) < len(MAGIC) + 8:
        raise CheckpointError("file too short to be a checkpoint")
    if blob[:len(MAGIC)] != MAGIC:
        raise CheckpointError("bad magic; not a checkpoint file")
    payload = blob[len(MAGIC):-4]
    (stored_crc,) = struct.unpack("<I", blob[-4:])
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    if crc != stored_crc:
        raise CheckpointError(
            f"CRC mismatch: stored {stored_crc:#010x}, computed {crc:#010x}")
    r = _Reader(payload)
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (cfg_len,) = r.unpack("<I")
    config = json.loads(r.take(cfg_len).decode("utf-8"))
    (count,) = r.unpack("<I")
    tensors = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        tag, rank = r.unpack("<BB")
        if tag not in _DTYPES:
            raise CheckpointError(f"unknown dtype tag {tag}")
        shape = r.unpack(f"<{rank}I")
        arr = np.frombuffer(r.take(int(np.prod(shape, dtype=np.int64))
                                   * np.dtype(_DTYPES[tag]).itemsize),
                            dtype=_DTYPES[tag]).reshape(shape)
        tensors[name] = arr.astype(np.float64)
    if r.pos != len(payload):
        raise CheckpointError("trailing bytes after tensor table")
    return tensors, config
