import io
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csisense.core import CsiTensor, principal_angle, read_csit, split_amp_phase, wrap_phase, write_csit
from csisense.errors import FormatError, ValidationError


def make(shape=(4, 8, 2, 1), seed=0, meta=None):
    rng = np.random.default_rng(seed)
    data = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    freqs = 5.8e9 + 312.5e3 * np.arange(shape[1])
    return CsiTensor(data, 1e-3, freqs, meta or {})


def to_bytes(csi):
    buf = io.BytesIO()
    write_csit(csi, buf)
    return buf.getvalue()


def test_amp_phase_examples():
    csi = CsiTensor(np.array([1 + 0j, 0 - 2j]).reshape(1, 2, 1, 1), 1.0, [1.0, 2.0])
    view = split_amp_phase(csi)
    assert view.amplitude.ravel().tolist() == [1.0, 2.0]
    assert view.phase.ravel()[0] == 0.0
    assert view.phase.ravel()[1] == pytest.approx(-np.pi / 2, abs=1e-15)


def test_amp_phase_roundtrip():
    csi = make()
    rec = split_amp_phase(csi).reconstruct()
    assert np.max(np.abs(rec - csi.data) / np.abs(csi.data)) < 1e-12


def test_phase_branch_excludes_minus_pi():
    z = np.array([complex(-1.0, -0.0), complex(-1.0, 0.0)])
    assert np.all(principal_angle(z) == np.pi)
    assert wrap_phase(-np.pi) == np.pi
    assert wrap_phase(3 * np.pi) == pytest.approx(np.pi)


@pytest.mark.parametrize(
    "kwargs, field",
    [
        (dict(data=np.zeros((0, 1, 1, 1))), "data"),
        (dict(data=np.full((1, 1, 1, 1), np.nan)), "data"),
        (dict(sample_interval=0.0), "sample_interval"),
        (dict(carrier_freqs=[2.0, 1.0]), "carrier_freqs"),
        (dict(carrier_freqs=[1.0]), "carrier_freqs"),
    ],
)
def test_invalid_tensor(kwargs, field):
    args = dict(data=np.ones((1, 2, 1, 1)), sample_interval=1.0, carrier_freqs=[1.0, 2.0])
    args.update(kwargs)
    with pytest.raises(ValidationError) as exc:
        CsiTensor(**args)
    assert exc.value.field == field


def test_tensor_is_immutable():
    csi = make()
    with pytest.raises(ValueError):
        csi.data[0, 0, 0, 0] = 1.0


def test_minimal_container_layout():
    csi = CsiTensor(np.zeros((1, 1, 1, 1)), 0.5, [2.4e9])
    raw = to_bytes(csi)
    # header 4+2+16+8, one carrier frequency, one complex payload, u32 length and "{}"
    assert len(raw) == 30 + 8 + 16 + 4 + 2
    assert raw[:4] == b"CSIT"
    assert struct.unpack_from("<H", raw, 4)[0] == 1
    assert struct.unpack_from("<4I", raw, 6) == (1, 1, 1, 1)
    assert struct.unpack_from("<d", raw, 22)[0] == 0.5
    assert raw[-6:] == struct.pack("<I", 2) + b"{}"


def test_roundtrip_bit_exact():
    csi = make(meta={"label": 3, "scene": "a"})
    back = read_csit(to_bytes(csi))
    assert back == csi
    assert np.array_equal(back.data.view(np.float64), csi.data.view(np.float64))


@settings(max_examples=30, deadline=None)
@given(
    dims=st.tuples(*[st.integers(1, 3)] * 4),
    seed=st.integers(0, 2**32 - 1),
)
def test_roundtrip_property(dims, seed):
    csi = make(dims, seed, {"seed": seed})
    raw = to_bytes(csi)
    assert read_csit(raw) == csi
    assert to_bytes(read_csit(raw)) == raw


def test_bad_magic():
    raw = bytearray(to_bytes(make()))
    raw[:4] = b"XXXX"
    with pytest.raises(FormatError, match="bad magic"):
        read_csit(bytes(raw))


def test_unsupported_version():
    raw = bytearray(to_bytes(make()))
    raw[4:6] = struct.pack("<H", 2)
    with pytest.raises(FormatError, match="unsupported version"):
        read_csit(bytes(raw))


def test_truncated_payload_reports_offset():
    raw = to_bytes(make())
    with pytest.raises(FormatError, match=r"unexpected EOF at offset \d+") as exc:
        read_csit(raw[:40])
    assert exc.value.offset == 40


def test_truncated_non_seekable():
    raw = to_bytes(make())[:50]

    class Stream:
        def __init__(self):
            self.buf = io.BytesIO(raw)

        def read(self, n=-1):
            return self.buf.read(n)

    with pytest.raises(FormatError, match="unexpected EOF"):
        read_csit(Stream())


def test_dim_overflow():
    raw = bytearray(to_bytes(make()))
    raw[6:22] = struct.pack("<4I", 2**20, 8, 2, 1)
    with pytest.raises(FormatError, match="exceed stream length"):
        read_csit(bytes(raw))


def test_trailing_bytes():
    with pytest.raises(FormatError, match="trailing"):
        read_csit(to_bytes(make()) + b"\0")


def test_non_finite_payload():
    raw = bytearray(to_bytes(make()))
    struct.pack_into("<d", raw, 30 + 8 * 8, float("inf"))
    with pytest.raises(FormatError, match="non-finite"):
        read_csit(bytes(raw))


def test_write_failure_reports_offset():
    class Broken:
        def __init__(self):
            self.calls = 0

        def write(self, b):
            self.calls += 1
            if self.calls == 3:
                raise OSError("disk full")
            return len(b)

    with pytest.raises(OSError, match="offset 94"):
        write_csit(make(), Broken())
