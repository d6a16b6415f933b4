"""Uniform weight quantization over a closed symmetric interval.

Levels lie on the uniform grid over [-clip, clip] including both
endpoints; the level count must be odd so that 0 is itself a level.
Color 0 is the zero level; colors 1..L-1 enumerate the nonzero levels
from most negative to most positive.
"""

from __future__ import annotations

import numpy as np


def level_grid(levels: int, clip: float) -> np.ndarray:
    if levels < 3 or levels % 2 == 0:
        raise ValueError("level count must be odd and at least 3 so 0 is a level")
    if clip <= 0:
        raise ValueError("clip must be positive")
    grid = np.linspace(-clip, clip, levels)
    grid[levels // 2] = 0.0  # exact zero at the center
    return grid


def quantize_weights(w: np.ndarray, levels: int, clip: float) -> np.ndarray:
    """Clip then map every weight to the nearest grid level."""
    grid = level_grid(levels, clip)
    step = 2.0 * clip / (levels - 1)
    idx = np.rint((np.clip(w, -clip, clip) + clip) / step).astype(np.int64)
    return grid[np.clip(idx, 0, levels - 1)]


def codebook_and_colors(levels: int, clip: float) -> tuple[np.ndarray, dict[float, int]]:
    """Color table: weights[0] = 0.0, then nonzero levels ascending."""
    grid = level_grid(levels, clip)
    nonzero = [v for v in grid if v != 0.0]
    weights = np.array([0.0] + nonzero)
    return weights, {float(v): i for i, v in enumerate(weights)}


def colorize(quantized: np.ndarray, levels: int, clip: float) -> tuple[np.ndarray, np.ndarray]:
    """Map a quantized weight matrix to (color cells, codebook weights)."""
    weights, color_of = codebook_and_colors(levels, clip)
    cells = np.empty(quantized.shape, dtype=np.int64)
    flat_in = quantized.ravel()
    flat_out = cells.ravel()
    for i, v in enumerate(flat_in):
        flat_out[i] = color_of[float(v)]
    return cells, weights
