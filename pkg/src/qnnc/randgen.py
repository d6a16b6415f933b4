"""Seeded generators for random matrices and networks.

Cells are i.i.d. over the color distribution.  The PRNG is pinned to
numpy's PCG64 so identical specs reproduce identical outputs across
runs; bench outputs record the generator name alongside the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .deepcodec import QuantizedNetwork
from .errors import ValidationError
from .model import Codebook, ColorMatrix
from .ubg import BinaryAdjacency

GENERATOR_NAME = "numpy-pcg64"

WEIGHT_SPAN = 0.16  # synthetic codebooks draw nonzero weights from +-this


@dataclass(frozen=True)
class GenSpec:
    """One reproducible sampling configuration."""

    rows: int
    cols: int
    probs: tuple[float, ...]
    seed: int = 0
    kind: str = "partially-labeled"  # labeled | partially-labeled | unlabeled | network

    def __post_init__(self) -> None:
        probs = tuple(float(p) for p in self.probs)
        if self.rows < 1 or self.cols < 1:
            raise ValidationError("dimensions must be positive")
        if len(probs) < 2:
            raise ValidationError("need probabilities for color 0 and at least one color")
        if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
            raise ValidationError("probabilities must be nonnegative and sum to 1")
        if self.kind not in {"labeled", "partially-labeled", "unlabeled", "network"}:
            raise ValidationError(f"unknown model kind {self.kind!r}")
        if self.kind == "unlabeled" and (len(probs) != 2 or self.rows != self.cols):
            raise ValidationError("unlabeled graphs are square and binary")
        object.__setattr__(self, "probs", probs)

    @property
    def m(self) -> int:
        return len(self.probs) - 1

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def gen_matrix(spec: GenSpec, rng: np.random.Generator | None = None) -> ColorMatrix:
    """Sample a color matrix with i.i.d. cells."""
    rng = spec.rng() if rng is None else rng
    cells = rng.choice(spec.m + 1, size=(spec.rows, spec.cols), p=np.asarray(spec.probs))
    return ColorMatrix(rows=spec.rows, cols=spec.cols, m=spec.m, cells=cells)


def gen_adjacency(spec: GenSpec, rng: np.random.Generator | None = None) -> BinaryAdjacency:
    """Sample a square binary adjacency matrix (edge probability = probs[1])."""
    rng = spec.rng() if rng is None else rng
    cells = (rng.random((spec.rows, spec.rows)) < spec.probs[1]).astype(np.int64)
    return BinaryAdjacency(n=spec.rows, cells=cells)


def gen_codebook(m: int, rng: np.random.Generator) -> Codebook:
    """Codebook with weight 0 for color 0 and sorted random nonzero weights."""
    nonzero = np.sort(rng.uniform(-WEIGHT_SPAN, WEIGHT_SPAN, size=m))
    return Codebook((0.0,) + tuple(float(w) for w in nonzero))


def gen_network(spec: GenSpec, widths) -> QuantizedNetwork:
    """Sample a network along a width chain [in, h1, ..., out].

    ``spec.rows``/``spec.cols`` are ignored here; the chain gives each
    matrix its shape (rows = next width, cols = previous width).
    """
    widths = [int(w) for w in widths]
    if len(widths) < 2 or any(w < 1 for w in widths):
        raise ValidationError("need a chain of at least two positive widths")
    rng = spec.rng()
    probs = np.asarray(spec.probs)
    layers = []
    for cols, rows in zip(widths[:-1], widths[1:]):
        cells = rng.choice(spec.m + 1, size=(rows, cols), p=probs)
        mat = ColorMatrix(rows=rows, cols=cols, m=spec.m, cells=cells)
        layers.append((mat, gen_codebook(spec.m, rng)))
    return QuantizedNetwork(tuple(layers))
