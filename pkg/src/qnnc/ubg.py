"""Two-tree codec for unlabeled square binary adjacency matrices.

Both vertex sets are unlabeled here, so the encoding must be identical
for any valid rearrangement (any composition of row and column
permutations).  The codec alternates between consuming one column and
one row per iteration:

* a row tree tracks groups of rows that agree on every consumed column,
* a column tree tracks groups of columns that agree on every consumed row.

Consuming a column splits every row group into (connected, rest); the
connected count of each group is arithmetic-coded against a binomial
conditional.  Rows are then consumed symmetrically.  Values are tracked
through ordered group member lists (the matrix is never physically
permuted), and each consumed vertex is debited from the leftmost
nonempty group of its own tree.

Where the procedure is free to "choose any" vertex, the choice is
canonicalized: candidates are ranked by iterated color refinement of the
live submatrix seeded with the current group structure, so the ranking
depends only on the unlabeled graph.  Refinement-equivalent candidates
are assumed interchangeable (true for random and for fully symmetric
graphs); the tie is broken by group order.

The decoder replays the same schedule from counts alone and materializes
a canonical representative; re-encoding that representative reproduces
the stream.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

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
from .errors import StreamError, ValidationError
from .model import EdgeModel


@dataclass(frozen=True)
class BinaryAdjacency:
    """Square 0/1 adjacency matrix of an unlabeled bipartite graph."""

    n: int
    cells: np.ndarray = field(compare=False)

    def __post_init__(self) -> None:
        cells = np.ascontiguousarray(self.cells, dtype=np.int64)
        if cells.shape != (self.n, self.n):
            raise ValidationError("adjacency must be square and match n")
        if self.n < 1:
            raise ValidationError("adjacency needs at least one vertex")
        if not np.isin(cells, (0, 1)).all():
            raise ValidationError("adjacency cells must be 0 or 1")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @classmethod
    def from_array(cls, cells) -> "BinaryAdjacency":
        arr = np.asarray(cells)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValidationError("adjacency must be a square matrix")
        return cls(n=arr.shape[0], cells=arr.astype(np.int64))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BinaryAdjacency)
            and self.n == other.n
            and bool(np.array_equal(self.cells, other.cells))
        )

    def row_masks(self) -> list[int]:
        return [int(sum(1 << c for c in np.flatnonzero(self.cells[r]))) for r in range(self.n)]

    def col_masks(self) -> list[int]:
        return [int(sum(1 << r for r in np.flatnonzero(self.cells[:, c]))) for c in range(self.n)]


def _validate_binary_model(model: EdgeModel) -> tuple[int, int]:
    if model.m != 1:
        raise ValidationError("unlabeled codec works on binary edge models only")
    return model.counts[1], model.total


def _dense_rank(sigs: dict[int, tuple]) -> dict[int, int]:
    order = {sig: rank for rank, sig in enumerate(sorted(set(sigs.values())))}
    return {v: order[sig] for v, sig in sigs.items()}


def _refine_colors(row_groups, col_groups, row_masks, col_masks):
    """Iterated color refinement of the live submatrix.

    Initial colors are the current group indices (canonical by
    construction); one round recolors every live row by its 1-degree into
    each column class and vice versa, until the numbers of classes stop
    growing.  The resulting integer colors depend only on the unlabeled
    structure.
    """
    row_color = {r: gi for gi, grp in enumerate(row_groups) for r in grp}
    col_color = {c: gi for gi, grp in enumerate(col_groups) for c in grp}
    while True:
        col_classes: dict[int, int] = {}
        for c, color in col_color.items():
            col_classes[color] = col_classes.get(color, 0) | (1 << c)
        col_class_masks = [col_classes[k] for k in sorted(col_classes)]
        row_classes: dict[int, int] = {}
        for r, color in row_color.items():
            row_classes[color] = row_classes.get(color, 0) | (1 << r)
        row_class_masks = [row_classes[k] for k in sorted(row_classes)]

        row_sigs = {
            r: (row_color[r], tuple((row_masks[r] & mk).bit_count() for mk in col_class_masks))
            for r in row_color
        }
        col_sigs = {
            c: (col_color[c], tuple((col_masks[c] & mk).bit_count() for mk in row_class_masks))
            for c in col_color
        }
        new_row = _dense_rank(row_sigs)
        new_col = _dense_rank(col_sigs)
        stable = len(set(new_row.values())) == len(set(row_color.values())) and len(
            set(new_col.values())
        ) == len(set(col_color.values()))
        row_color, col_color = new_row, new_col
        if stable:
            return row_color, col_color


def _canonical_member(group, colors) -> int:
    best = group[0]
    best_color = colors[best]
    for v in group[1:]:
        if colors[v] < best_color:
            best, best_color = v, colors[v]
    return best


def _remove_member(groups: list[list[int]], member: int) -> None:
    for gi, grp in enumerate(groups):
        if member in grp:
            grp.remove(member)
            if not grp:
                groups.pop(gi)
            return
    raise AssertionError("member not present in any group")


def _select_seed(adj: BinaryAdjacency, row_masks, col_masks) -> tuple[int, int]:
    ones = [(r, c) for r in range(adj.n) for c in range(adj.n) if adj.cells[r, c]]
    candidates = ones if ones else [
        (r, c) for r in range(adj.n) for c in range(adj.n)
    ]
    row_color, col_color = _refine_colors(
        [list(range(adj.n))], [list(range(adj.n))], row_masks, col_masks
    )
    return min(candidates, key=lambda rc: (row_color[rc[0]], col_color[rc[1]], rc))


def ubg_encode(
    adj: BinaryAdjacency,
    model: EdgeModel,
    trace: list[tuple[str, int, int]] | None = None,
) -> Bitstream:
    """Encode an unlabeled bipartite graph as [gamma(N)] [coded divisions].

    The stream is identical for every valid rearrangement of ``adj``.
    When ``trace`` is given, every division is appended to it as
    ``(tree, parent_value, left_value)`` in emission order.
    """
    ones_count, total = _validate_binary_model(model)
    n = adj.n
    has_one = bool(adj.cells.any())
    has_zero = bool((adj.cells == 0).any())
    if has_one and ones_count == 0:
        raise ValidationError("matrix has edges but the model gives them zero count")
    if has_zero and ones_count == total:
        raise ValidationError("matrix has non-edges but the model gives them zero count")

    row_masks = adj.row_masks()
    col_masks = adj.col_masks()
    out = BitWriter()
    elias_encode(n, out)
    header_bits = out.bit_length
    enc = ArithmeticEncoder(out)

    row_groups: list[list[int]] = [list(range(n))]
    col_groups: list[list[int]] = [list(range(n))]
    _, sel_col = _select_seed(adj, row_masks, col_masks)

    for _ in range(n):
        # split every row group by connectivity to the consumed column
        new_rows: list[list[int]] = []
        for grp in row_groups:
            left = [r for r in grp if row_masks[r] >> sel_col & 1]
            right = [r for r in grp if not row_masks[r] >> sel_col & 1]
            enc.encode(binomial_table(len(grp), ones_count, total), len(left))
            if trace is not None:
                trace.append(("rows", len(grp), len(left)))
            if left:
                new_rows.append(left)
            if right:
                new_rows.append(right)
        row_groups = new_rows
        _remove_member(col_groups, sel_col)

        # consume a row chosen canonically from the leftmost group
        if len(row_groups[0]) == 1:
            sel_row = row_groups[0][0]
        else:
            row_color, _ = _refine_colors(row_groups, col_groups, row_masks, col_masks)
            sel_row = _canonical_member(row_groups[0], row_color)

        new_cols: list[list[int]] = []
        for grp in col_groups:
            left = [c for c in grp if col_masks[c] >> sel_row & 1]
            right = [c for c in grp if not col_masks[c] >> sel_row & 1]
            enc.encode(binomial_table(len(grp), ones_count, total), len(left))
            if trace is not None:
                trace.append(("cols", len(grp), len(left)))
            if left:
                new_cols.append(left)
            if right:
                new_cols.append(right)
        col_groups = new_cols
        _remove_member(row_groups, sel_row)

        if col_groups:
            if len(col_groups[0]) == 1:
                sel_col = col_groups[0][0]
            else:
                _, col_color = _refine_colors(row_groups, col_groups, row_masks, col_masks)
                sel_col = _canonical_member(col_groups[0], col_color)

    enc.finish()
    return Bitstream(out.getvalue(), out.bit_length, header_bits)


def ubg_decode(stream: Bitstream, model: EdgeModel, n: int | None = None) -> BinaryAdjacency:
    """Rebuild the canonical representative of the coded equivalence class."""
    ones_count, total = _validate_binary_model(model)
    src = stream.reader()
    n_stream = elias_decode(src)
    if n is not None and n != n_stream:
        raise StreamError(f"stream is for n={n_stream}, caller expected n={n}")
    n = n_stream
    if n < 1:
        raise StreamError("stream declares an empty graph")
    dec = ArithmeticDecoder(src)

    cells = np.zeros((n, n), dtype=np.int64)
    row_groups: list[list[int]] = [list(range(n))]
    col_groups: list[list[int]] = [list(range(n))]

    for _ in range(n):
        sel_col = col_groups[0][0]
        new_rows: list[list[int]] = []
        for grp in row_groups:
            left_count = dec.decode(binomial_table(len(grp), ones_count, total))
            left, right = grp[:left_count], grp[left_count:]
            for r in left:
                cells[r, sel_col] = 1
            if left:
                new_rows.append(left)
            if right:
                new_rows.append(right)
        row_groups = new_rows
        _remove_member(col_groups, sel_col)

        sel_row = row_groups[0][0]
        new_cols: list[list[int]] = []
        for grp in col_groups:
            left_count = dec.decode(binomial_table(len(grp), ones_count, total))
            left, right = grp[:left_count], grp[left_count:]
            for c in left:
                cells[sel_row, c] = 1
            if left:
                new_cols.append(left)
            if right:
                new_cols.append(right)
        col_groups = new_cols
        _remove_member(row_groups, sel_row)

    return BinaryAdjacency(n=n, cells=cells)


def two_stage_bits(trace: list[tuple[str, int, int]]) -> Bitstream:
    """Debug form of a division trace: left values in ceil(log2(v+1)) raw bits.

    This is the fixed-width intermediate representation (before entropy
    coding) of every division, for inspection only; the production
    encoder codes the divisions against binomial conditionals directly.
    """
    out = BitWriter()
    for _, parent, left in trace:
        width = int(parent + 1).bit_length() if parent > 0 else 0
        if width:
            out.write_bits(left, width)
    return Bitstream(out.getvalue(), out.bit_length)


def bipartite_iso(a: BinaryAdjacency, b: BinaryAdjacency) -> bool:
    """Exhaustive test oracle: are the two graphs related by row and column
    permutations?  Factorial search, restricted to n <= 8."""
    if a.n != b.n:
        return False
    n = a.n
    if n > 8:
        raise ValidationError("exhaustive isomorphism search is limited to n <= 8")
    if int(a.cells.sum()) != int(b.cells.sum()):
        return False
    if sorted(a.cells.sum(axis=1)) != sorted(b.cells.sum(axis=1)):
        return False
    if sorted(a.cells.sum(axis=0)) != sorted(b.cells.sum(axis=0)):
        return False
    pow2 = 1 << np.arange(n, dtype=np.int64)
    b_cols = np.sort(pow2 @ b.cells)
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    # column codes of a under every row permutation, each sorted
    codes = np.einsum("r,prc->pc", pow2, a.cells[perms])
    codes.sort(axis=1)
    return bool((codes == b_cols).all(axis=1).any())
