"""Weight checkpoints and training-curve CSV files.

Checkpoint layout (little-endian)::

    b"CKPT"        magic
    u16            version (1)
    u32            tensor count
    per tensor:    u16 name length, UTF-8 name, u8 ndim, u32 x ndim shape, f64 payload (C order)
    u32            metadata length, then a UTF-8 JSON object
"""
from __future__ import annotations

import csv
import io
import json
import struct

import numpy as np

from ..errors import FormatError

MAGIC = b"CKPT"
VERSION = 1


def dumps_state(state: dict, meta: dict | None = None) -> bytes:
    buf = io.BytesIO()
    buf.write(struct.pack("<4sHI", MAGIC, VERSION, len(state)))
    for name in sorted(state):
        arr = np.ascontiguousarray(state[name], dtype="<f8")
        raw = name.encode("utf-8")
        buf.write(struct.pack("<HB", len(raw), arr.ndim))
        buf.write(raw)
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(arr.tobytes())
    m = json.dumps(meta or {}, sort_keys=True, separators=(",", ":")).encode("utf-8")
    buf.write(struct.pack("<I", len(m)))
    buf.write(m)
    return buf.getvalue()


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise FormatError("unexpected EOF", self.pos)
        out = self.data[self.pos: self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size))


def loads_state(data: bytes):
    """Return (state dict of float64 arrays, metadata dict)."""
    r = _Reader(bytes(data))
    magic, version, count = r.unpack("<4sHI")
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", 4)
    state = {}
    for _ in range(count):
        n_name, ndim = r.unpack("<HB")
        at = r.pos
        try:
            name = r.take(n_name).decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError("tensor name is not UTF-8", at) from None
        shape = r.unpack(f"<{ndim}I")
        size = int(np.prod(shape, dtype=np.int64))
        at = r.pos
        arr = np.frombuffer(r.take(8 * size), dtype="<f8").reshape(shape).astype(np.float64)
        if not np.all(np.isfinite(arr)):
            raise FormatError(f"non-finite values in tensor {name!r}", at)
        state[name] = arr
    (n_meta,) = r.unpack("<I")
    at = r.pos
    try:
        meta = json.loads(r.take(n_meta).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise FormatError("invalid checkpoint metadata", at) from None
    if r.pos != len(r.data):
        raise FormatError("trailing bytes after checkpoint", r.pos)
    return state, meta


def save_checkpoint(module, path, meta=None):
    data = dumps_state(module.state_dict(), meta)
    with open(path, "wb") as fh:
        fh.write(data)
    return len(data)


def load_checkpoint(module, path):
    """Load weights into ``module`` (cast to its dtype); returns the metadata."""
    with open(path, "rb") as fh:
        state, meta = loads_state(fh.read())
    module.load_state_dict(state)
    return meta


def write_curves(path, columns: dict):
    """CSV with an ``epoch`` column followed by one column per named curve.

    Curves of different lengths are padded with empty cells.
    """
    names = list(columns)
    length = max((len(v) for v in columns.values()), default=0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", *names])
        for e in range(length):
            w.writerow([e, *[repr(float(columns[n][e])) if e < len(columns[n]) else "" for n in names]])


def read_curves(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {name: [float(r[i]) for r in body if r[i] != ""] for i, name in enumerate(header[1:], start=1)}
