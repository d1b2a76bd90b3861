"""WDF1 snapshots, trajectory indices and deterministic CSV/JSON reports.

A WDF1 file is one UTF-8 JSON header line followed by the field payload as
little-endian complex128 values in ``(j, i, row, col)`` order.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import FormatError
from .field import GridSpec, MatrixField, SampledSource

MAGIC = "WDF1"
_DTYPE = np.dtype("<c16")
_REQUIRED = ("nx", "ny", "N", "t", "h", "origin", "unitary")


def header_bytes(f: MatrixField) -> bytes:
    hdr = {"magic": MAGIC, "nx": f.grid.nx, "ny": f.grid.ny, "N": f.N, "t": float(f.t),
           "h": f.grid.h, "origin": list(f.grid.origin), "unitary": bool(f.unitary)}
    if f.meta:
        hdr["meta"] = f.meta
    return (json.dumps(hdr, allow_nan=False) + "\n").encode("utf-8")


def encode_snapshot(f: MatrixField) -> bytes:
    f.validate()
    return header_bytes(f) + np.ascontiguousarray(f.data, dtype=_DTYPE).tobytes()


def write_snapshot(f: MatrixField, path) -> Path:
    path = Path(path)
    path.write_bytes(encode_snapshot(f))
    return path


def decode_snapshot(raw: bytes) -> MatrixField:
    if not raw.startswith(b'{"magic": "WDF1"') and not raw.startswith(b'{"magic":"WDF1"'):
        raise FormatError("missing WDF1 magic", offset=0)
    nl = raw.find(b"\n")
    if nl < 0:
        raise FormatError("header line is not terminated", offset=len(raw))
    try:
        hdr = json.loads(raw[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"header is not valid JSON: {exc}", offset=0) from None
    if not isinstance(hdr, dict) or hdr.get("magic") != MAGIC:
        raise FormatError("missing WDF1 magic", offset=0)
    missing = [k for k in _REQUIRED if k not in hdr]
    if missing:
        raise FormatError(f"header lacks keys {missing}", offset=0)
    try:
        nx, ny, N = int(hdr["nx"]), int(hdr["ny"]), int(hdr["N"])
        grid = GridSpec(nx, ny, float(hdr["h"]), tuple(hdr["origin"]))
    except (TypeError, ValueError) as exc:
        raise FormatError(f"invalid header geometry: {exc}", offset=0) from None
    if N < 1:
        raise FormatError("matrix size must be positive", offset=0)
    start = nl + 1
    expected = start + ny * nx * N * N * _DTYPE.itemsize
    if len(raw) != expected:
        what = "truncated" if len(raw) < expected else "has trailing bytes"
        raise FormatError(f"payload {what}: file is {len(raw)} bytes, expected {expected}",
                          offset=expected)
    data = np.frombuffer(raw, dtype=_DTYPE, offset=start).reshape(ny, nx, N, N).copy()
    f = MatrixField(grid, data, t=float(hdr["t"]), unitary=bool(hdr["unitary"]),
                    meta=dict(hdr.get("meta") or {}))
    return f.validate()


def read_snapshot(path) -> MatrixField:
    return decode_snapshot(Path(path).read_bytes())


def write_trajectory(traj: SampledSource, directory, prefix: str = "slice") -> Path:
    """Write every slice plus ``index.json``; returns the index path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for k, f in enumerate(traj.trajectory):
        name = f"{prefix}_{k:05d}.wdf"
        write_snapshot(f, directory / name)
        files.append(name)
    index = {"dt": traj.time_step, "steps": len(files) - 1, "files": files}
    p = directory / "index.json"
    p.write_text(json.dumps(index, indent=1) + "\n")
    return p


def read_trajectory(index_path, order: int = 3) -> SampledSource:
    index_path = Path(index_path)
    try:
        index = json.loads(index_path.read_text())
        files = index["files"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"bad trajectory index: {exc}", offset=0) from None
    slices = [read_snapshot(index_path.parent / name) for name in files]
    return SampledSource(slices, order=order)


def fmt(v) -> str:
    """Deterministic text form of a report value."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(header))
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def write_text(path, text: str) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, complex):
        return {"re": v.real, "im": v.imag}
    return v


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=1) + "\n"
