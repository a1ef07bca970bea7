#
# density/rendering.py
#
"""
Image and binary outputs for density matrices.

* PGM (P5, 8-bit gray), always available;
* PNG through a matplotlib colormap;
* the ``TFDM`` dump: 16-byte header (magic, u, v as little-endian uint32,
  4 reserved zero bytes) followed by the cells as row-major little-endian
  float64, for byte-level diffing between runs.

Images are drawn north-up: the last grid row is the first image row.
"""
from __future__ import annotations

import io
import struct

import numpy as np
from matplotlib import colormaps
from matplotlib import image as mpimg

from core.exceptions import GridSpecError
from .models import DensityMatrix

SCALES = ("linear", "log")
DUMP_MAGIC = b"TFDM"
_DUMP_HEADER = struct.Struct("<4sII4x")


def intensity(m: DensityMatrix, scale: str = "linear") -> np.ndarray:
    """Cells mapped to [0, 1]: zero stays 0, the maximum becomes 1."""
    if scale not in SCALES:
        raise ValueError(f"unknown scale {scale!r}; choose one of {', '.join(SCALES)}")
    cells = m.cells
    if scale == "log":
        cells = np.log1p(cells)
    top = cells.max() if cells.size else 0.0
    if top <= 0:
        return np.zeros_like(cells)
    return np.flipud(cells / top)


def render_pgm(m: DensityMatrix, scale: str = "linear") -> bytes:
    gray = np.rint(intensity(m, scale) * 255).astype(np.uint8)
    header = f"P5\n{m.u} {m.v}\n255\n".encode("ascii")
    return header + gray.tobytes()


def render_png(m: DensityMatrix, colormap: str = "viridis", scale: str = "linear") -> bytes:
    try:
        cmap = colormaps[colormap]
    except KeyError as exc:
        raise ValueError(f"unknown colormap {colormap!r}") from exc
    rgba = cmap(intensity(m, scale), bytes=True)
    buffer = io.BytesIO()
    mpimg.imsave(buffer, rgba, format="png")
    return buffer.getvalue()


def render(m: DensityMatrix, colormap: str = "gray", scale: str = "linear", image_format: str = "pgm") -> bytes:
    if image_format == "pgm":
        return render_pgm(m, scale)
    if image_format == "png":
        return render_png(m, colormap, scale)
    raise ValueError(f"unknown image format {image_format!r}")


def dump_density(m: DensityMatrix) -> bytes:
    return _DUMP_HEADER.pack(DUMP_MAGIC, m.u, m.v) + m.cells.astype("<f8").tobytes(order="C")


def load_density_dump(data: bytes) -> DensityMatrix:
    if len(data) < _DUMP_HEADER.size:
        raise GridSpecError("density dump is shorter than its header")
    magic, u, v = _DUMP_HEADER.unpack_from(data)
    if magic != DUMP_MAGIC:
        raise GridSpecError(f"not a density dump (magic {magic!r})")
    body = data[_DUMP_HEADER.size:]
    if len(body) != 8 * u * v:
        raise GridSpecError(f"density dump holds {len(body)} bytes, expected {8 * u * v} for {u}x{v}")
    return DensityMatrix(cells=np.frombuffer(body, dtype="<f8").reshape(v, u).copy())
