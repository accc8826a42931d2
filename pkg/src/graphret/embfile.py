"""On-disk formats for embeddings, indices, and plain-text reports.

Binary matrix file: magic bytes ``SEMB``, then u32 row count, u32 dimension
(both little-endian), then the rows as 32-bit little-endian IEEE-754 floats,
row-major.  A sidecar text file maps row index to passage/document id, one id
per line, UTF-8.

All writers are deterministic: same inputs, same bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MAGIC = b"SEMB"
_HEADER = struct.Struct("<4sII")


def write_embedding_matrix(path: str | Path, matrix: np.ndarray) -> None:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError(f"matrix must be 2-D, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("matrix contains non-finite values")
    rows, dim = matrix.shape
    with Path(path).open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, rows, dim))
        fh.write(matrix.astype("<f4").tobytes(order="C"))


def read_embedding_matrix(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated embedding file")
    magic, rows, dim = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    body = data[_HEADER.size :]
    expected = rows * dim * 4
    if len(body) != expected:
        raise ValueError(f"{path}: payload is {len(body)} bytes, expected {expected}")
    return np.frombuffer(body, dtype="<f4").reshape(rows, dim).copy()


def write_id_sidecar(path: str | Path, ids: Sequence[str]) -> None:
    for i in ids:
        if "\n" in i:
            raise ValueError(f"id contains a newline: {i!r}")
    Path(path).write_text("".join(f"{i}\n" for i in ids), encoding="utf-8")


def read_id_sidecar(path: str | Path) -> list[str]:
    text = Path(path).read_text(encoding="utf-8")
    return text.splitlines()


def write_manifest(path: str | Path, manifest: dict) -> None:
    Path(path).write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def read_manifest(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def format_float(value: float) -> str:
    """Shortest round-trip repr; deterministic for report files."""
    return repr(float(value))


def write_kv_report(path: str | Path, items: Iterable[tuple[str, object]]) -> None:
    """Plain-text key-value report, one ``key=value`` pair per line."""
    lines = []
    for key, value in items:
        if isinstance(value, float):
            value = format_float(value)
        lines.append(f"{key}={value}\n")
    Path(path).write_text("".join(lines), encoding="utf-8")


def read_kv_report(path: str | Path) -> dict[str, str]:
    out: dict[str, str] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"malformed report line: {line!r}")
        out[key] = value
    return out
