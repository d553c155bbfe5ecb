"""On-disk formats: NSAF field snapshots, CSV tables and JSON manifests.

See docs/formats.md for the byte layout.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .spectral import ModeSet, SolenoidalField
from .trajectory import Trajectory

MAGIC = b"NSAF"
VERSION = 1
_HEADER = struct.Struct("<4sIIII")     # magic, version, dim, n, count
_COEFF_DTYPE = np.dtype("<c16")         # little-endian float64 (re, im) pairs


class SnapshotFormatError(ValueError):
    pass


# -- snapshots ----------------------------------------------------------------

def encode_snapshot(modes: ModeSet, coeffs: np.ndarray) -> bytes:
    coeffs = np.asarray(coeffs)
    if coeffs.shape == modes.field_shape:
        coeffs = coeffs[None]
    if coeffs.shape[1:] != modes.field_shape:
        raise SnapshotFormatError(f"coefficient shape {coeffs.shape} does not match {modes.field_shape}")
    header = _HEADER.pack(MAGIC, VERSION, modes.dim, modes.n, len(coeffs))
    return header + np.ascontiguousarray(coeffs, dtype=_COEFF_DTYPE).tobytes()


def decode_snapshot(blob: bytes) -> tuple[ModeSet, np.ndarray]:
    if len(blob) < _HEADER.size:
        raise SnapshotFormatError("file too short for an NSAF header")
    magic, version, dim, n, count = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotFormatError(f"unsupported NSAF version {version}")
    try:
        modes = ModeSet(dim, n)
    except ValueError as exc:
        raise SnapshotFormatError(f"invalid header: {exc}") from exc
    shape = (count,) + modes.field_shape
    expected = _HEADER.size + int(np.prod(shape)) * _COEFF_DTYPE.itemsize
    if len(blob) != expected:
        raise SnapshotFormatError(f"payload size {len(blob)} bytes, expected {expected}")
    data = np.frombuffer(blob, dtype=_COEFF_DTYPE, offset=_HEADER.size).reshape(shape)
    return modes, data.astype(complex)


def write_snapshot(path, modes: ModeSet, coeffs: np.ndarray) -> None:
    Path(path).write_bytes(encode_snapshot(modes, coeffs))


def read_snapshot(path) -> tuple[ModeSet, np.ndarray]:
    """(modes, coefficients of shape (count, dim, n, ..., n))."""
    return decode_snapshot(Path(path).read_bytes())


def write_fields(path, fields: Sequence[SolenoidalField]) -> None:
    modes = fields[0].modes
    write_snapshot(path, modes, np.stack([f.coeff for f in fields]))


def read_fields(path) -> list[SolenoidalField]:
    modes, data = read_snapshot(path)
    return [SolenoidalField(modes, c) for c in data]


def write_trajectory(path, traj: Trajectory) -> None:
    write_snapshot(path, traj.modes, traj.data)


def read_trajectory(path, t0: float, t_final: float, staggered: bool = False) -> Trajectory:
    """Snapshots carry no time axis; the mesh comes from the caller (or a manifest)."""
    modes, data = read_snapshot(path)
    return Trajectory(modes, t0, t_final, data, staggered)


# -- CSV ----------------------------------------------------------------------

def format_value(v) -> str:
    """Integers verbatim, booleans as 0/1, floats with 17 significant digits."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return f"{float(v):.17g}"


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])


def read_csv(path) -> dict[str, np.ndarray]:
    """Columns of a numeric CSV table keyed by header name."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    header, body = rows[0], rows[1:]
    cols = np.array(body, dtype=float).reshape(len(body), len(header))
    return {name: cols[:, j] for j, name in enumerate(header)}


HISTORY_COLUMNS = ("iter", "J", "step", "grad_norm", "vi_residual")
EE7_COLUMNS = ("alpha", "sup_l2", "sup_alpha2_gradl2", "l2l2_grad", "l2l2_alpha2_A")


def write_history_csv(path, history: Sequence[dict]) -> None:
    write_csv(path, HISTORY_COLUMNS, ([h[c] for c in HISTORY_COLUMNS] for h in history))


def write_ee7_csv(path, monitors: Sequence[dict]) -> None:
    write_csv(path, EE7_COLUMNS, ([mon[c] for c in EE7_COLUMNS] for mon in monitors))


# -- manifests ----------------------------------------------------------------

def write_manifest(path, manifest: dict) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True, allow_nan=True) + "\n")


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text())
