"""Minimal independent writer/reader for raw-mode QNNC containers.

Implements the interchange format from scratch (little-endian): magic
"QNNC", version u16 = 1, mode u8 = 0 (raw), layer count u16, then per
layer rows u32, cols u32, m u16, (m+1) float64 codebook, (m+1) u64 color
counts, payload bit length u64, and the payload as packed color indices
(one byte per cell for m < 256, two otherwise), row-major, zero-padded
to whole bytes.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"QNNC"
VERSION = 1
MODE_RAW = 0


def write_raw_container(layers: list[tuple[np.ndarray, np.ndarray]]) -> bytes:
    """Serialize [(color_cells, codebook_weights), ...] as a raw container."""
    out = bytearray()
    out += struct.pack("<4sHBH", MAGIC, VERSION, MODE_RAW, len(layers))
    for cells, weights in layers:
        rows, cols = cells.shape
        m = len(weights) - 1
        if cells.min() < 0 or cells.max() > m:
            raise ValueError("color indices exceed the codebook")
        counts = np.bincount(cells.ravel(), minlength=m + 1)
        payload = cells.astype("<u1" if m < 256 else "<u2").tobytes()
        out += struct.pack("<IIH", rows, cols, m)
        out += struct.pack(f"<{m + 1}d", *[float(w) for w in weights])
        out += struct.pack(f"<{m + 1}Q", *[int(c) for c in counts])
        out += struct.pack("<Q", 8 * len(payload))
        out += payload
    return bytes(out)


def read_raw_container(blob: bytes) -> list[tuple[np.ndarray, np.ndarray]]:
    """Parse a raw container back into [(cells, codebook weights), ...]."""
    off = 0

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        vals = struct.unpack_from(fmt, blob, off)
        off += size
        return vals

    magic, version, mode, k = take("<4sHBH")
    if magic != MAGIC or version != VERSION:
        raise ValueError("not a QNNC v1 container")
    if mode != MODE_RAW:
        raise ValueError("reader handles raw mode only")
    layers = []
    for _ in range(k):
        rows, cols, m = take("<IIH")
        weights = np.array(take(f"<{m + 1}d"))
        take(f"<{m + 1}Q")  # counts are derivable; skip
        (payload_bits,) = take("<Q")
        nbytes = (payload_bits + 7) // 8
        dtype = "<u1" if m < 256 else "<u2"
        cells = (
            np.frombuffer(blob[off : off + nbytes], dtype=dtype)
            .astype(np.int64)
            .reshape(rows, cols)
        )
        off += nbytes
        layers.append((cells, weights))
    if off != len(blob):
        raise ValueError("trailing bytes after container")
    return layers
