"""CSI data model and the ``.csit`` binary container.

A :class:`CsiTensor` holds complex channel estimates indexed as
(time, subcarrier, rx antenna, tx antenna).

Container layout (all little-endian)::

    b"CSIT"            magic, 4 bytes
    u16                format version (1)
    u32 x 4            T, S, M, N
    f64                sample interval in seconds
    f64 x S            per-subcarrier carrier frequency in Hz
    f64 x 2*T*S*M*N    interleaved (re, im), row-major over (T, S, M, N)
    u32                metadata length in bytes
    bytes              UTF-8 JSON object
"""
from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, ValidationError

MAGIC = b"CSIT"
VERSION = 1
_HEAD = struct.Struct("<4sH4Id")


@dataclass(frozen=True, eq=False)
class CsiTensor:
    data: np.ndarray
    sample_interval: float
    carrier_freqs: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        data = np.array(self.data, dtype=np.complex128)
        if data.ndim != 4 or min(data.shape) < 1:
            raise ValidationError(f"data must have shape (T, S, M, N) with all dims >= 1, got {data.shape}", "data")
        if not np.all(np.isfinite(data)):
            raise ValidationError("data contains non-finite entries", "data")
        freqs = np.array(self.carrier_freqs, dtype=np.float64).reshape(-1)
        if freqs.shape[0] != data.shape[1]:
            raise ValidationError(f"expected {data.shape[1]} carrier frequencies, got {freqs.shape[0]}", "carrier_freqs")
        if not (np.all(np.isfinite(freqs)) and np.all(freqs > 0) and np.all(np.diff(freqs) > 0)):
            raise ValidationError("carrier_freqs must be positive and strictly increasing", "carrier_freqs")
        dt = float(self.sample_interval)
        if not (np.isfinite(dt) and dt > 0):
            raise ValidationError("sample_interval must be > 0", "sample_interval")
        data.setflags(write=False)
        freqs.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "carrier_freqs", freqs)
        object.__setattr__(self, "sample_interval", dt)
        object.__setattr__(self, "meta", {str(k): v for k, v in dict(self.meta).items()})

    @property
    def shape(self):
        return self.data.shape

    def replace(self, data=None, meta=None):
        return CsiTensor(
            self.data if data is None else data,
            self.sample_interval,
            self.carrier_freqs,
            self.meta if meta is None else meta,
        )

    def __eq__(self, other):
        if not isinstance(other, CsiTensor):
            return NotImplemented
        return (
            self.shape == other.shape
            and self.sample_interval == other.sample_interval
            and np.array_equal(self.carrier_freqs, other.carrier_freqs)
            and np.array_equal(self.data.view(np.float64), other.data.view(np.float64))
            and self.meta == other.meta
        )


@dataclass(frozen=True)
class AmpPhaseView:
    amplitude: np.ndarray
    phase: np.ndarray

    def reconstruct(self):
        return self.amplitude * np.exp(1j * self.phase)


def principal_angle(z):
    """Argument in (-pi, pi]; numpy returns -pi for negative reals with -0.0 imaginary part."""
    ang = np.angle(z)
    return np.where(ang <= -np.pi, np.pi, ang)


def wrap_phase(x):
    """Map radians into (-pi, pi]."""
    y = np.mod(x + np.pi, 2 * np.pi) - np.pi
    return np.where(y <= -np.pi, y + 2 * np.pi, y)


def split_amp_phase(csi: CsiTensor) -> AmpPhaseView:
    return AmpPhaseView(np.abs(csi.data), principal_angle(csi.data))


def write_csit(csi: CsiTensor, sink) -> int:
    """Serialize ``csi`` to a binary stream; returns the number of bytes written."""
    T, S, M, N = csi.shape
    meta = json.dumps(csi.meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [
        _HEAD.pack(MAGIC, VERSION, T, S, M, N, csi.sample_interval),
        csi.carrier_freqs.astype("<f8").tobytes(),
        np.ascontiguousarray(csi.data).view(np.float64).astype("<f8").tobytes(),
        struct.pack("<I", len(meta)),
        meta,
    ]
    written = 0
    for part in parts:
        try:
            n = sink.write(part)
        except OSError as exc:
            raise OSError(f"write failed at byte offset {written}: {exc}") from exc
        if n is not None and n != len(part):
            raise OSError(f"short write at byte offset {written + n}")
        written += len(part)
    return written


def _read_exact(buf, n, offset):
    chunk = buf.read(n)
    if len(chunk) != n:
        raise FormatError("unexpected EOF", offset + len(chunk))
    return chunk


def read_csit(source) -> CsiTensor:
    """Parse a ``.csit`` container from a binary stream or bytes."""
    if isinstance(source, (bytes, bytearray, memoryview)):
        source = io.BytesIO(bytes(source))
    off = 0
    head = _read_exact(source, _HEAD.size, off)
    magic, version, T, S, M, N, dt = _HEAD.unpack(head)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    off += _HEAD.size
    count = T * S * M * N
    if count == 0:
        raise FormatError("zero-sized dimension", 6)
    # guard against absurd dims before allocating (needs a seekable source)
    try:
        here = source.tell()
        end = source.seek(0, io.SEEK_END)
        source.seek(here)
        if end - here < 8 * S + 16 * count + 4:
            raise FormatError(f"dims {T}x{S}x{M}x{N} exceed stream length {end}; unexpected EOF", end)
    except (AttributeError, io.UnsupportedOperation):
        pass
    freqs = np.frombuffer(_read_exact(source, 8 * S, off), dtype="<f8").astype(np.float64)
    off += 8 * S
    raw = np.frombuffer(_read_exact(source, 16 * count, off), dtype="<f8")
    off += 16 * count
    if not np.all(np.isfinite(raw)):
        bad = int(np.argmax(~np.isfinite(raw)))
        raise FormatError("non-finite payload value", off - 16 * count + 8 * bad)
    (mlen,) = struct.unpack("<I", _read_exact(source, 4, off))
    off += 4
    meta_bytes = _read_exact(source, mlen, off)
    off += mlen
    if source.read(1):
        raise FormatError("trailing bytes after container", off)
    try:
        meta = json.loads(meta_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"invalid metadata JSON: {exc}", off - mlen) from exc
    if not isinstance(meta, dict):
        raise FormatError("metadata must be a JSON object", off - mlen)
    data = raw.astype(np.float64).view(np.complex128).reshape(T, S, M, N)
    try:
        return CsiTensor(data, dt, freqs, meta)
    except ValidationError as exc:
        raise FormatError(str(exc), 6) from exc


def save(csi: CsiTensor, path) -> int:
    with open(path, "wb") as fh:
        return write_csit(csi, fh)


def load(path) -> CsiTensor:
    with open(path, "rb") as fh:
        return read_csit(fh)
