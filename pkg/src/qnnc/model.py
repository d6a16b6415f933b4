"""Core data types shared by every codec.

A layer of a quantized feedforward network is viewed as a matrix of edge
colors: rows are the destination nodes (unlabeled, order-free), columns
are the source nodes (labeled), and each cell holds a color in 0..m where
color 0 means "no edge" (weight exactly zero).  All types are immutable
after construction; operations are pure functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class ColorMatrix:
    """rows x cols matrix of edge colors 0..m (color 0 = no edge)."""

    rows: int
    cols: int
    m: int
    cells: np.ndarray = field(compare=False)

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValidationError("matrix needs at least one row and column")
        if self.m < 1:
            raise ValidationError("need at least one nonzero color")
        cells = np.ascontiguousarray(self.cells, dtype=np.int64)
        if cells.shape != (self.rows, self.cols):
            raise ValidationError(
                f"cell array shape {cells.shape} != ({self.rows}, {self.cols})"
            )
        if cells.min() < 0 or cells.max() > self.m:
            raise ValidationError("cell colors must lie in 0..m")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @classmethod
    def from_array(cls, cells, m: int | None = None) -> "ColorMatrix":
        arr = np.asarray(cells, dtype=np.int64)
        if arr.ndim != 2:
            raise ValidationError("cell array must be two-dimensional")
        if m is None:
            m = max(1, int(arr.max(initial=0)))
        return cls(rows=arr.shape[0], cols=arr.shape[1], m=m, cells=arr)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ColorMatrix)
            and self.rows == other.rows
            and self.cols == other.cols
            and self.m == other.m
            and bool(np.array_equal(self.cells, other.cells))
        )

    def row_tuples(self) -> list[tuple[int, ...]]:
        return [tuple(int(c) for c in row) for row in self.cells]


@dataclass(frozen=True)
class EdgeModel:
    """Color probabilities held as exact integer occurrence counts."""

    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        counts = tuple(int(c) for c in self.counts)
        if len(counts) < 2:
            raise ValidationError("model needs counts for color 0 and at least one color")
        if any(c < 0 for c in counts):
            raise ValidationError("counts must be nonnegative")
        if sum(counts) <= 0:
            raise ValidationError("total count must be positive")
        object.__setattr__(self, "counts", counts)

    @property
    def m(self) -> int:
        return len(self.counts) - 1

    @property
    def total(self) -> int:
        return sum(self.counts)

    @cached_property
    def suffix_totals(self) -> tuple[int, ...]:
        """suffix_totals[i] = counts[i] + ... + counts[m]."""
        out = [0] * (len(self.counts) + 1)
        for i in range(len(self.counts) - 1, -1, -1):
            out[i] = out[i + 1] + self.counts[i]
        return tuple(out)

    def probabilities(self) -> tuple[Fraction, ...]:
        t = self.total
        return tuple(Fraction(c, t) for c in self.counts)

    def float_probabilities(self) -> tuple[float, ...]:
        t = self.total
        return tuple(c / t for c in self.counts)

    @classmethod
    def from_probabilities(cls, probs, scale: int = 10**9) -> "EdgeModel":
        """Build a model from float probabilities via exact rational scaling."""
        fracs = [Fraction(p).limit_denominator(scale) for p in probs]
        if any(f < 0 for f in fracs):
            raise ValidationError("probabilities must be nonnegative")
        if sum(fracs) != 1:
            raise ValidationError(f"probabilities must sum to 1, got {float(sum(fracs))}")
        den = 1
        for f in fracs:
            den = den * f.denominator // math.gcd(den, f.denominator)
        return cls(tuple(int(f * den) for f in fracs))


@dataclass(frozen=True)
class Codebook:
    """Map color index -> synaptic weight; entry 0 is pinned to weight 0."""

    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        weights = tuple(float(w) for w in self.weights)
        if not weights or weights[0] != 0.0:
            raise ValidationError("codebook entry 0 must be exactly 0.0")
        if not all(np.isfinite(weights)):
            raise ValidationError("codebook weights must be finite")
        object.__setattr__(self, "weights", weights)

    @property
    def m(self) -> int:
        return len(self.weights) - 1

    def as_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.float64)


@dataclass(frozen=True)
class RowPermutation:
    """Bijection original row index -> canonical position."""

    perm: tuple[int, ...]

    def __post_init__(self) -> None:
        perm = tuple(int(p) for p in self.perm)
        if sorted(perm) != list(range(len(perm))):
            raise ValidationError("permutation must be a bijection on 0..N-1")
        object.__setattr__(self, "perm", perm)

    def __len__(self) -> int:
        return len(self.perm)

    def apply_to_columns(self, cells: np.ndarray) -> np.ndarray:
        """Reorder columns so old column r lands at position perm[r]."""
        if cells.shape[1] != len(self.perm):
            raise ValidationError("column count does not match permutation size")
        out = np.empty_like(cells)
        out[:, list(self.perm)] = cells
        return out

    def inverse(self) -> "RowPermutation":
        inv = [0] * len(self.perm)
        for src, dst in enumerate(self.perm):
            inv[dst] = src
        return RowPermutation(tuple(inv))


def canonical_sort_rows(matrix: ColorMatrix) -> tuple[ColorMatrix, RowPermutation]:
    """Reorder rows into ascending lexicographic order of color sequences.

    The returned permutation maps each input row index to its canonical
    position.  Ties between duplicate rows are broken by original index,
    which keeps the map deterministic; decoding a compressed layer always
    reproduces exactly this row order.
    """
    order = sorted(range(matrix.rows), key=lambda r: tuple(matrix.cells[r]))
    perm = [0] * matrix.rows
    for pos, src in enumerate(order):
        perm[src] = pos
    sorted_cells = matrix.cells[order]
    out = ColorMatrix(matrix.rows, matrix.cols, matrix.m, sorted_cells)
    return out, RowPermutation(tuple(perm))


def empirical_model(matrix: ColorMatrix) -> EdgeModel:
    """Count occurrences of each color; total equals rows * cols."""
    counts = np.bincount(matrix.cells.ravel(), minlength=matrix.m + 1)
    return EdgeModel(tuple(int(c) for c in counts))
