"""Lossless on-disk format for grid fields: one JSON header line, then raw float64 bytes."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import AxisGrid, DistributionField, grid_shape
from .errors import DumpFormatError

DUMP_FORMAT = "dispersion-chain-grid"
DUMP_VERSION = 1
PAYLOAD_DTYPE = "<f8"


def dump_bytes(field: DistributionField) -> bytes:
    """Serialise a field; axes are stored in ascending kinematic order, payload row-major."""
    payload = np.ascontiguousarray(field.values, dtype=PAYLOAD_DTYPE).tobytes(order="C")
    header = {
        "format": DUMP_FORMAT,
        "version": DUMP_VERSION,
        "index_set": list(field.index_set.indices),
        "axes": [ax.to_dict() for ax in field.axes],
        "time": field.time,
        "dtype": PAYLOAD_DTYPE,
        "shape": list(grid_shape(field.axes)),
        "payload_bytes": len(payload),
    }
    return json.dumps(header, sort_keys=True).encode("utf-8") + b"\n" + payload


def load_bytes(blob: bytes, source: str = "<bytes>") -> DistributionField:
    newline = blob.find(b"\n")
    if newline < 0:
        raise DumpFormatError(f"{source}: missing header line")
    try:
        header = json.loads(blob[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DumpFormatError(f"{source}: unreadable header ({exc})") from exc
    if header.get("format") != DUMP_FORMAT:
        raise DumpFormatError(f"{source}: not a grid dump (format={header.get('format')!r})")
    if header.get("dtype") != PAYLOAD_DTYPE:
        raise DumpFormatError(f"{source}: unsupported dtype {header.get('dtype')!r}")
    axes = tuple(AxisGrid.from_dict(spec) for spec in header["axes"])
    shape = tuple(header["shape"])
    if shape != grid_shape(axes):
        raise DumpFormatError(f"{source}: header shape {shape} disagrees with axes {grid_shape(axes)}")
    payload = blob[newline + 1 :]
    expected = int(np.prod(shape, dtype=np.int64)) * 8
    if header["payload_bytes"] != expected or len(payload) != expected:
        raise DumpFormatError(
            f"{source}: payload size mismatch (header says {header['payload_bytes']} bytes, "
            f"grid needs {expected}, file holds {len(payload)})"
        )
    values = np.frombuffer(payload, dtype=PAYLOAD_DTYPE).reshape(shape).astype(np.float64)
    field = DistributionField(axes, values, header["time"])
    if list(field.index_set.indices) != header["index_set"]:
        raise DumpFormatError(f"{source}: index set {header['index_set']} disagrees with axes")
    return field


def write_grid_dump(field: DistributionField, path) -> Path:
    path = Path(path)
    try:
        path.write_bytes(dump_bytes(field))
    except OSError as exc:
        raise OSError(f"cannot write grid dump to {path}: {exc.strerror}") from exc
    return path


def read_grid_dump(path) -> DistributionField:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read grid dump {path}: {exc.strerror}") from exc
    return load_bytes(blob, str(path))
