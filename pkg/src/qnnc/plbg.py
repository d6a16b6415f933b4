"""Codec for matrices with labeled columns and unlabeled rows.

The row order of a layer matrix carries no information (hidden nodes are
interchangeable), so the matrix is coded as a multiset of row vectors.
The encoder walks an (m+1)-ary count tree: the root holds N, and each
node at depth d splits its rows by the color found in column d.  Child
counts follow a multinomial law, coded here as a chain of binomials so
the arithmetic coder only ever sees one-dimensional tables.  The last
child of every node is implied and zero-value nodes are never expanded.

Emission order is fixed: breadth first, depth by depth, nodes left to
right, children in color order 0..m.  That makes the decoder's output
the canonical matrix: rows in ascending lexicographic order.

``multiset_log_prob`` is the per-instance rate oracle: the exact ideal
codelength of this factorization, computed in log space from the row
multiplicities and exact rational color probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coder import (
    ArithmeticDecoder,
    ArithmeticEncoder,
    Bitstream,
    BitWriter,
    binomial_table,
    elias_decode,
    elias_encode,
)
from .errors import ModelMismatchError, StreamError, ValidationError
from .model import ColorMatrix, EdgeModel

_LN2 = math.log(2.0)


def _log2_factorial(n: int) -> float:
    return math.lgamma(n + 1) / _LN2


def validate_pair(matrix: ColorMatrix, model: EdgeModel) -> None:
    """Check that the model can drive coding for this matrix."""
    if model.m != matrix.m:
        raise ModelMismatchError(
            f"model has {model.m} colors but matrix declares {matrix.m}"
        )
    present = np.bincount(matrix.cells.ravel(), minlength=model.m + 1)
    for color, (seen, cnt) in enumerate(zip(present, model.counts)):
        if seen and cnt == 0:
            raise ModelMismatchError(
                f"color {color} appears in the matrix but has zero model count"
            )


def _encode_split(enc: ArithmeticEncoder, value: int, observed, model: EdgeModel) -> None:
    rem = value
    for color in range(model.m):
        if rem == 0:
            break
        den = model.suffix_totals[color]
        if den == 0:
            raise ModelMismatchError("rows remain but the model excludes all further colors")
        count = int(observed[color])
        enc.encode(binomial_table(rem, model.counts[color], den), count)
        rem -= count
    if rem != int(observed[model.m]):
        # only reachable when the observed counts do not sum to value
        raise ValidationError("split counts do not sum to the node value")


def _decode_split(dec: ArithmeticDecoder, value: int, model: EdgeModel) -> list[int]:
    rem = value
    counts = [0] * (model.m + 1)
    for color in range(model.m):
        if rem == 0:
            break
        den = model.suffix_totals[color]
        if den == 0:
            raise StreamError("stream requires colors the model excludes")
        counts[color] = dec.decode(binomial_table(rem, model.counts[color], den))
        rem -= counts[color]
        if rem < 0:
            raise StreamError("child counts exceed their parent value")
    counts[model.m] = rem
    return counts


def count_tree_splits(matrix: ColorMatrix) -> list[list[tuple[int, ...]]]:
    """Per-depth child-count tuples of the count tree, in emission order.

    Entry d lists, for every nonzero node at depth d left to right, the
    tuple (a_0, ..., a_m) of its child values.  Used by tests to check
    tree conservation; the encoder below walks the same structure.
    """
    cells = matrix.cells[np.lexsort(matrix.cells.T[::-1])]
    levels: list[list[tuple[int, ...]]] = []
    groups = [(0, matrix.rows)]
    for d in range(matrix.cols):
        splits = []
        next_groups = []
        for start, end in groups:
            col = cells[start:end, d]
            counts = np.bincount(col, minlength=matrix.m + 1)
            splits.append(tuple(int(c) for c in counts))
            off = start
            for c in counts:
                if c > 0:
                    next_groups.append((off, off + int(c)))
                    off += int(c)
        levels.append(splits)
        groups = next_groups
    return levels


def plbg_encode(matrix: ColorMatrix, model: EdgeModel) -> Bitstream:
    """Encode a color matrix as [gamma(N)] [arithmetic-coded count tree].

    The output is invariant under any permutation of the input rows and
    self-delimiting given the model and the column count.
    """
    validate_pair(matrix, model)
    cells = matrix.cells[np.lexsort(matrix.cells.T[::-1])]
    out = BitWriter()
    elias_encode(matrix.rows, out)
    header_bits = out.bit_length
    enc = ArithmeticEncoder(out)
    groups = [(0, matrix.rows)]
    for d in range(matrix.cols):
        next_groups = []
        for start, end in groups:
            col = cells[start:end, d]
            counts = np.bincount(col, minlength=matrix.m + 1)
            _encode_split(enc, end - start, counts, model)
            off = start
            for c in counts:
                if c > 0:
                    next_groups.append((off, off + int(c)))
                    off += int(c)
        groups = next_groups
    enc.finish()
    return Bitstream(out.getvalue(), out.bit_length, header_bits)


def plbg_decode(stream: Bitstream, model: EdgeModel, cols: int) -> ColorMatrix:
    """Rebuild the canonical matrix (rows ascending lexicographic)."""
    if cols < 1:
        raise ValidationError("need at least one column")
    src = stream.reader()
    n = elias_decode(src)
    if n < 1:
        raise StreamError("stream declares an empty matrix")
    dec = ArithmeticDecoder(src)
    values = [n]
    column_runs: list[list[tuple[int, int]]] = []
    for _ in range(cols):
        runs = []
        next_values = []
        for v in values:
            counts = _decode_split(dec, v, model)
            for color, c in enumerate(counts):
                if c > 0:
                    runs.append((color, c))
                    next_values.append(c)
        column_runs.append(runs)
        values = next_values
    cells = np.empty((n, cols), dtype=np.int64)
    for d, runs in enumerate(column_runs):
        colors = [color for color, _ in runs]
        lengths = [c for _, c in runs]
        cells[:, d] = np.repeat(colors, lengths)
    return ColorMatrix(rows=n, cols=cols, m=model.m, cells=cells)


@dataclass(frozen=True)
class MultisetStats:
    """Distinct rows of a matrix with multiplicities and log-probabilities."""

    multiplicities: tuple[int, ...]
    log2_probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.multiplicities) != len(self.log2_probs):
            raise ValidationError("multiplicities and probabilities must align")


def multiset_stats(matrix: ColorMatrix, model: EdgeModel) -> MultisetStats:
    validate_pair(matrix, model)
    log2p = []
    total = model.total
    for count in model.counts:
        log2p.append(math.log2(count / total) if count else math.nan)
    log2p_arr = np.asarray(log2p)
    _, first_idx, mult = np.unique(
        matrix.cells, axis=0, return_index=True, return_counts=True
    )
    row_log2 = log2p_arr[matrix.cells[first_idx]].sum(axis=1)
    return MultisetStats(
        multiplicities=tuple(int(k) for k in mult),
        log2_probs=tuple(float(v) for v in row_log2),
    )


def multiset_log_prob(matrix: ColorMatrix, model: EdgeModel) -> float:
    """Ideal codelength in bits of the row multiset under the model.

    Returns -log2[ N!/(prod k_i!) * prod pi_i^{k_i} ] where k_i are the
    multiplicities of the distinct rows and pi_i their per-row
    probabilities.
    """
    stats = multiset_stats(matrix, model)
    log2_prob = _log2_factorial(matrix.rows)
    for k, row_lp in zip(stats.multiplicities, stats.log2_probs):
        log2_prob += k * row_lp - _log2_factorial(k)
    return -log2_prob
