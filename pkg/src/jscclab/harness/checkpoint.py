"""Binary checkpoint archive.

Layout (all integers little-endian)::

    magic        4 bytes  b"SWJC"
    version      u32
    config_len   u32, then config_len bytes of UTF-8 JSON
    n_entries    u32
    entries      n_entries x (name_len u16, name, rank u8, dims u32 x rank,
                              dtype u8, offset u64)
    payload      concatenated float32 little-endian tensors

Offsets are relative to the start of the payload.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from ..codec import CodecConfig
from ..model import JSCCModel

MAGIC = b"SWJC"
VERSION = 1
DTYPE_F32LE = 0


class CheckpointError(Exception):
    pass


class CorruptHeaderError(CheckpointError):
    pass


class UnsupportedVersionError(CheckpointError):
    pass


class TruncatedPayloadError(CheckpointError):
    def __init__(self, entry: str, msg: str):
        super().__init__(msg)
        self.entry = entry


@dataclass
class Entry:
    name: str
    dims: tuple
    dtype: int
    offset: int

    @property
    def nbytes(self) -> int:
        return 4 * int(np.prod(self.dims, dtype=np.int64))


def save_checkpoint(model_or_params, path, config: CodecConfig | None = None) -> Path:
    """Write parameters (a :class:`JSCCModel` or a name->tensor dict) and the
    config snapshot to ``path``."""
    if isinstance(model_or_params, JSCCModel):
        config = model_or_params.config
        params = model_or_params.state_dict()
    else:
        params = model_or_params
    if config is None:
        raise ValueError("a codec config is required")
    arrays = {name: np.ascontiguousarray(t.detach().cpu().numpy() if torch.is_tensor(t) else t, dtype="<f4")
              for name, t in params.items()}
    meta = json.dumps(config.to_dict(), sort_keys=True).encode("utf-8")

    head = bytearray(MAGIC)
    head += struct.pack("<II", VERSION, len(meta)) + meta
    head += struct.pack("<I", len(arrays))
    offset = 0
    for name, arr in arrays.items():
        raw = name.encode("utf-8")
        head += struct.pack("<H", len(raw)) + raw + struct.pack("<B", arr.ndim)
        head += struct.pack(f"<{arr.ndim}I", *arr.shape)
        head += struct.pack("<BQ", DTYPE_F32LE, offset)
        offset += arr.nbytes
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(head)
        for arr in arrays.values():
            fh.write(arr.tobytes())
    return path


class _Reader:
    def __init__(self, buf: bytes):
        self.buf, self.pos = buf, 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.buf):
            raise CorruptHeaderError("header ends prematurely")
        out = struct.unpack_from(fmt, self.buf, self.pos)
        self.pos += size
        return out

    def raw(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CorruptHeaderError("header ends prematurely")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out


def read_archive(path) -> tuple[dict, CodecConfig]:
    """Validate and read an archive into (name -> float32 ndarray, config)."""
    buf = Path(path).read_bytes()
    if buf[:4] != MAGIC:
        raise CorruptHeaderError(f"bad magic {buf[:4]!r}")
    r = _Reader(buf)
    r.pos = 4
    (version,) = r.take("<I")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported checkpoint version {version}")
    (meta_len,) = r.take("<I")
    try:
        config = CodecConfig.from_dict(json.loads(r.raw(meta_len).decode("utf-8")))
    except (ValueError, TypeError) as exc:
        raise CorruptHeaderError(f"unreadable config snapshot: {exc}") from exc
    (n,) = r.take("<I")
    entries, names = [], set()
    for _ in range(n):
        (name_len,) = r.take("<H")
        try:
            name = r.raw(name_len).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptHeaderError("entry name is not UTF-8") from exc
        (rank,) = r.take("<B")
        dims = r.take(f"<{rank}I") if rank else ()
        dtype, offset = r.take("<BQ")
        if dtype != DTYPE_F32LE:
            raise CorruptHeaderError(f"entry {name!r} has unknown dtype code {dtype}")
        if name in names:
            raise CorruptHeaderError(f"duplicate entry {name!r}")
        names.add(name)
        entries.append(Entry(name, tuple(dims), dtype, offset))
    end = 0
    for e in sorted(entries, key=lambda e: e.offset):
        if e.offset < end:
            raise CorruptHeaderError(f"entry {e.name!r} overlaps its predecessor")
        end = e.offset + e.nbytes
    payload = memoryview(buf)[r.pos:]
    for e in sorted(entries, key=lambda e: e.offset):
        if e.offset + e.nbytes > len(payload):
            raise TruncatedPayloadError(e.name, f"payload truncated inside entry {e.name!r}")
    params = {}
    for e in entries:
        arr = np.frombuffer(payload, dtype="<f4", count=e.nbytes // 4, offset=e.offset)
        params[e.name] = arr.reshape(e.dims).copy()
    return params, config


def load_checkpoint(path) -> tuple[dict, CodecConfig]:
    """Parameters as float32 tensors plus the stored config."""
    arrays, config = read_archive(path)
    return {k: torch.from_numpy(v) for k, v in arrays.items()}, config


def load_model(path) -> JSCCModel:
    params, config = load_checkpoint(path)
    model = JSCCModel(config)
    model.load_state_dict(params)
    return model.eval()
