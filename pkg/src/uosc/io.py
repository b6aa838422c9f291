"""Binary matrix files and key/value sidecars.

A matrix record is the 4-byte magic ``UOSM``, two little-endian ``u32``
values (rows, cols), then ``rows * cols`` little-endian ``f64`` values in
row-major order.

A block file (used for basis sets) starts with the index header
``UOSI``, a ``u32`` block count and one ``u32`` column width per block,
followed by a single matrix record holding the blocks side by side.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MATRIX_MAGIC = b"UOSM"
INDEX_MAGIC = b"UOSI"


def _matrix_bytes(X):
    X = np.ascontiguousarray(X, dtype="<f8")
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {X.shape}")
    rows, cols = X.shape
    return MATRIX_MAGIC + struct.pack("<II", rows, cols) + X.tobytes(order="C")


def _read_matrix(buf, offset=0):
    if buf[offset:offset + 4] != MATRIX_MAGIC:
        raise ValueError("bad matrix magic")
    rows, cols = struct.unpack_from("<II", buf, offset + 4)
    start = offset + 12
    stop = start + 8 * rows * cols
    if stop > len(buf):
        raise ValueError("truncated matrix record")
    X = np.frombuffer(buf[start:stop], dtype="<f8").reshape(rows, cols)
    return X.astype(np.float64), stop


def write_matrix(path, X):
    Path(path).write_bytes(_matrix_bytes(X))


def read_matrix(path):
    X, _ = _read_matrix(Path(path).read_bytes())
    return X


def write_blocks(path, blocks):
    """Write column blocks sharing a row count as one indexed record."""
    blocks = [np.asarray(b, dtype=float) for b in blocks]
    rows = {b.shape[0] for b in blocks}
    if len(rows) != 1:
        raise ValueError("blocks must share a row count")
    widths = [b.shape[1] for b in blocks]
    header = INDEX_MAGIC + struct.pack(f"<I{len(widths)}I", len(widths), *widths)
    Path(path).write_bytes(header + _matrix_bytes(np.hstack(blocks)))


def read_blocks(path):
    buf = Path(path).read_bytes()
    if buf[:4] != INDEX_MAGIC:
        raise ValueError("bad block index magic")
    (count,) = struct.unpack_from("<I", buf, 4)
    widths = struct.unpack_from(f"<{count}I", buf, 8)
    X, _ = _read_matrix(buf, 8 + 4 * count)
    if sum(widths) != X.shape[1]:
        raise ValueError("block widths do not match matrix width")
    edges = np.cumsum((0,) + tuple(widths))
    return [X[:, a:b].copy() for a, b in zip(edges[:-1], edges[1:])]


def write_keyvalues(path, items):
    lines = [f"{key} = {value}" for key, value in items.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_keyvalues(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out
