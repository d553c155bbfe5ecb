import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nsalpha.io import (
    EE7_COLUMNS,
    HISTORY_COLUMNS,
    SnapshotFormatError,
    decode_snapshot,
    encode_snapshot,
    format_value,
    read_csv,
    read_fields,
    read_manifest,
    read_snapshot,
    read_trajectory,
    write_csv,
    write_ee7_csv,
    write_fields,
    write_history_csv,
    write_manifest,
    write_snapshot,
    write_trajectory,
)
from nsalpha.spectral import ModeSet, random_field
from nsalpha.trajectory import Trajectory

HEADER_BYTES = 20


def test_snapshot_layout(modes2, rng):
    u = random_field(modes2, rng)
    blob = encode_snapshot(modes2, u.coeff)
    assert blob[:4] == b"NSAF"
    assert struct.unpack("<IIII", blob[4:20]) == (1, 2, 8, 1)
    assert len(blob) == HEADER_BYTES + 2 * 64 * 16
    # component-major, C-ordered wavenumber axes, (re, im) float64 pairs
    payload = np.frombuffer(blob[20:], dtype="<f8").reshape(2, 8, 8, 2)
    assert np.array_equal(payload[..., 0], u.coeff.real)
    assert np.array_equal(payload[..., 1], u.coeff.imag)


def test_snapshot_roundtrip_bit_exact(tmp_path, modes3, rng):
    fields = [random_field(modes3, rng) for _ in range(3)]
    path = tmp_path / "u.nsaf"
    write_fields(path, fields)
    back = read_fields(path)
    assert len(back) == 3 and back[0].modes == modes3
    for a, b in zip(fields, back):
        assert a.coeff.tobytes() == b.coeff.tobytes()
    # rewriting reproduces the file byte for byte
    write_fields(tmp_path / "v.nsaf", back)
    assert path.read_bytes() == (tmp_path / "v.nsaf").read_bytes()


def test_single_field_gets_count_one(tmp_path, modes2, rng):
    u = random_field(modes2, rng)
    write_snapshot(tmp_path / "s.nsaf", modes2, u.coeff)
    modes, data = read_snapshot(tmp_path / "s.nsaf")
    assert modes == modes2 and data.shape == (1,) + modes2.field_shape


def test_trajectory_roundtrip(tmp_path, modes2, rng):
    traj = Trajectory.from_fields([random_field(modes2, rng) for _ in range(5)], 0.0, 0.8, staggered=True)
    write_trajectory(tmp_path / "t.nsaf", traj)
    back = read_trajectory(tmp_path / "t.nsaf", 0.0, 0.8, staggered=True)
    assert back.same_mesh(traj) and np.array_equal(back.data, traj.data)


@pytest.mark.parametrize("mutate, msg", [
    (lambda b: b"XXXX" + b[4:], "magic"),
    (lambda b: b[:4] + struct.pack("<I", 2) + b[8:], "version"),
    (lambda b: b[:-16], "size"),
    (lambda b: b + b"\0", "size"),
    (lambda b: b[:10], "short"),
    (lambda b: b[:8] + struct.pack("<I", 5) + b[12:], "header"),
    (lambda b: b[:12] + struct.pack("<I", 7) + b[16:], "header"),
])
def test_corrupt_snapshots_rejected(modes2, rng, mutate, msg):
    blob = encode_snapshot(modes2, random_field(modes2, rng).coeff)
    with pytest.raises(SnapshotFormatError, match=msg):
        decode_snapshot(mutate(blob))


def test_encode_shape_mismatch(modes2):
    with pytest.raises(SnapshotFormatError):
        encode_snapshot(modes2, np.zeros((2, 4, 4), complex))


@given(arrays(np.complex128, (2, 2, 4, 4),
              elements=st.complex_numbers(allow_nan=False, allow_infinity=False, max_magnitude=1e300)))
@settings(max_examples=30, deadline=None)
def test_arbitrary_arrays_roundtrip(data):
    modes = ModeSet(2, 4)
    back_modes, back = decode_snapshot(encode_snapshot(modes, data))
    assert back_modes == modes and back.tobytes() == data.tobytes()


def test_empty_snapshot_allowed(modes2):
    _, data = decode_snapshot(encode_snapshot(modes2, np.zeros((0,) + modes2.field_shape, complex)))
    assert data.shape == (0,) + modes2.field_shape


# -- CSV -------------------------------------------------------------------------

def test_format_value():
    assert format_value(3) == "3"
    assert format_value(np.int64(7)) == "7"
    assert format_value(True) == "1" and format_value(np.bool_(False)) == "0"
    assert format_value(0.1) == "0.10000000000000001"
    assert float(format_value(np.pi)) == np.pi


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=20))
@settings(max_examples=30, deadline=None)
def test_csv_float_roundtrip_exact(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("csv") / "x.csv"
    write_csv(path, ["i", "x"], enumerate(values))
    cols = read_csv(path)
    assert cols["x"].tolist() == values and cols["i"].tolist() == list(range(len(values)))


def test_empty_csv_rejected(tmp_path):
    (tmp_path / "e.csv").write_text("")
    with pytest.raises(ValueError):
        read_csv(tmp_path / "e.csv")


def test_history_and_ee7_writers(tmp_path):
    hist = [{"iter": 0, "J": 1.5, "step": 0.0, "grad_norm": 2.0, "vi_residual": 2.0, "armijo_test": ""},
            {"iter": 1, "J": 1.0, "step": 0.5, "grad_norm": 1.0, "vi_residual": 1.0, "armijo_test": "value"}]
    write_history_csv(tmp_path / "h.csv", hist)
    assert (tmp_path / "h.csv").read_text().splitlines() == [
        ",".join(HISTORY_COLUMNS), "0,1.5,0,2,2", "1,1,0.5,1,1"]
    mon = {c: float(i) for i, c in enumerate(EE7_COLUMNS)}
    write_ee7_csv(tmp_path / "e.csv", [mon])
    assert read_csv(tmp_path / "e.csv")["l2l2_alpha2_A"].tolist() == [4.0]


# -- manifests -------------------------------------------------------------------

def test_manifest_roundtrip(tmp_path):
    m = {"mode": "optimize", "J": [1.0, 0.5], "mesh": {"n": 8, "dim": 2}, "ok": True}
    write_manifest(tmp_path / "m.json", m)
    text = (tmp_path / "m.json").read_text()
    assert text.index('"J"') < text.index('"mesh"') < text.index('"mode"')
    assert read_manifest(tmp_path / "m.json") == m
