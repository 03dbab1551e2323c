"""Binary persistence of adjacency-tensor trajectories and edge-list ingestion.

File layout (version 1): magic b"DMTS", version byte 0x01, three little-endian
uint32 fields n, L, T, then T snapshots; each snapshot stores its L layers in
order, each layer as ceil(n*n/8) bytes bit-packing the full row-major n x n
0/1 matrix most-significant-bit first.
"""

from __future__ import annotations

import struct

import numpy as np

__all__ = ["write_dmts", "read_dmts", "ingest_edge_list", "DmtsError"]

MAGIC = b"DMTS"
VERSION = 1


class DmtsError(ValueError):
    """Malformed trajectory file or edge list."""


def _layer_nbytes(n: int) -> int:
    return (n * n + 7) // 8


def write_dmts(path: str, snapshots: np.ndarray) -> None:
    """Serialize a (T, n, n, L) 0/1 trajectory array."""
    snapshots = np.asarray(snapshots)
    if snapshots.ndim != 4 or snapshots.shape[1] != snapshots.shape[2]:
        raise DmtsError(f"expected shape (T, n, n, L), got {snapshots.shape}")
    if not np.isin(snapshots, (0, 1)).all():
        raise DmtsError("snapshots must be 0/1 valued")
    t_count, n, _, l_count = snapshots.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(bytes([VERSION]))
        fh.write(struct.pack("<III", n, l_count, t_count))
        for t in range(t_count):
            for l in range(l_count):
                bits = snapshots[t, :, :, l].astype(np.uint8).reshape(-1)
                fh.write(np.packbits(bits).tobytes())


def read_dmts(path: str) -> np.ndarray:
    """Load a trajectory file; validates the header and per-layer symmetry."""
    with open(path, "rb") as fh:
        header = fh.read(17)
        if len(header) < 17 or header[:4] != MAGIC:
            raise DmtsError(f"{path}: not a DMTS file (bad magic at byte 0)")
        if header[4] != VERSION:
            raise DmtsError(f"{path}: unsupported version {header[4]} at byte 4")
        n, l_count, t_count = struct.unpack("<III", header[5:17])
        nbytes = _layer_nbytes(n)
        payload = fh.read()
    expected = t_count * l_count * nbytes
    if len(payload) != expected:
        raise DmtsError(
            f"{path}: payload is {len(payload)} bytes, expected {expected} "
            f"(truncated or trailing data after byte {17 + min(len(payload), expected)})"
        )
    out = np.empty((t_count, n, n, l_count), dtype=np.uint8)
    offset = 0
    for t in range(t_count):
        for l in range(l_count):
            chunk = np.frombuffer(payload, dtype=np.uint8, count=nbytes, offset=offset)
            offset += nbytes
            mat = np.unpackbits(chunk, count=n * n).reshape(n, n)
            if not np.array_equal(mat, mat.T):
                raise DmtsError(f"{path}: snapshot {t} layer {l} is not symmetric")
            out[t, :, :, l] = mat
    return out


def ingest_edge_list(path: str, n: int, l_count: int, t_count: int) -> np.ndarray:
    """Build a trajectory from whitespace-separated (t, i, j, l) rows, 1-based.

    Unlisted edges stay 0, duplicates OR together, self-loops and out-of-range
    indices are rejected with their line number.
    """
    out = np.zeros((t_count, n, n, l_count), dtype=np.uint8)
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 4:
                raise DmtsError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            try:
                t, i, j, l = (int(p) for p in parts)
            except ValueError:
                raise DmtsError(f"{path}:{lineno}: non-integer field in {line!r}") from None
            if i == j:
                raise DmtsError(f"{path}:{lineno}: self-loop ({i}, {j}) not allowed")
            if not (1 <= t <= t_count and 1 <= i <= n and 1 <= j <= n and 1 <= l <= l_count):
                raise DmtsError(f"{path}:{lineno}: index out of range in {line!r}")
            out[t - 1, i - 1, j - 1, l - 1] = 1
            out[t - 1, j - 1, i - 1, l - 1] = 1
    return out
