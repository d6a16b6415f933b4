"""Whole-network compression, compressed inference, and the QNNC container.

Two compression paths:

* the layer-by-layer path (primary): each hidden weight matrix is sorted
  into canonical row order and coded with the row-multiset codec; the
  resulting row permutation relabels the next matrix's columns before it
  is processed, and the final matrix (into the labeled output layer) is
  stored raw in its column-relabeled form so output ordering survives.

* the multi-tree path (binary networks of uniform width): all node
  layers are consumed jointly, one node per layer per iteration, each
  consumption splitting the neighbor layers' groups; the two outer
  layers' orderings are appended as fixed-width permutation arrays.

The container is a little-endian binary format: magic ``QNNC``, version,
mode (0=raw, 1=layer codec, 2=multi-tree), layer count, then one record
per weight matrix (dims, codebook, color counts, payload).  Parsing the
header alone is enough to rebuild every frequency table.
"""

from __future__ import annotations

import enum
import struct
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
from .errors import StreamError, ValidationError
from .model import (
    Codebook,
    ColorMatrix,
    EdgeModel,
    RowPermutation,
    canonical_sort_rows,
    empirical_model,
)
from .plbg import plbg_decode, plbg_encode
from .succinct import ActivationKind, PhaseTimer, QueueMetrics, infer_layer

MAGIC = b"QNNC"
VERSION = 1


class Mode(enum.IntEnum):
    RAW = 0
    PLBG = 1
    KTREE = 2


@dataclass(frozen=True)
class QuantizedNetwork:
    """Weight matrices plus codebooks; adjacent dimensions must chain."""

    layers: tuple[tuple[ColorMatrix, Codebook], ...]

    def __post_init__(self) -> None:
        if not self.layers:
            raise ValidationError("network needs at least one weight matrix")
        for i, (mat, cb) in enumerate(self.layers):
            if cb.m != mat.m:
                raise ValidationError(f"layer {i}: codebook colors != matrix colors")
            if i and mat.cols != self.layers[i - 1][0].rows:
                raise ValidationError(
                    f"layer {i}: expects {self.layers[i - 1][0].rows} inputs, has {mat.cols}"
                )
        object.__setattr__(self, "layers", tuple(self.layers))

    @property
    def num_matrices(self) -> int:
        return len(self.layers)

    @property
    def input_width(self) -> int:
        return self.layers[0][0].cols

    @property
    def output_width(self) -> int:
        return self.layers[-1][0].rows

    def widths(self) -> list[int]:
        return [self.input_width] + [mat.rows for mat, _ in self.layers]


@dataclass(frozen=True)
class CompressedLayer:
    """One weight matrix inside a container: metadata plus its payload."""

    rows: int
    cols: int
    m: int
    weights: tuple[float, ...]
    counts: tuple[int, ...]
    payload: Bitstream

    def codebook(self) -> Codebook:
        return Codebook(self.weights)

    def model(self) -> EdgeModel:
        return EdgeModel(self.counts)


@dataclass(frozen=True)
class NetworkContainer:
    mode: Mode
    layers: tuple[CompressedLayer, ...]

    def __post_init__(self) -> None:
        if not self.layers:
            raise ValidationError("container needs at least one layer")

    @property
    def num_matrices(self) -> int:
        return len(self.layers)

    @property
    def input_width(self) -> int:
        return self.layers[0].cols

    @property
    def output_width(self) -> int:
        return self.layers[-1].rows

    def payload_bits(self) -> int:
        return sum(rec.payload.bit_length for rec in self.layers)

    def serialize(self) -> bytes:
        out = bytearray()
        out += struct.pack("<4sHBH", MAGIC, VERSION, int(self.mode), len(self.layers))
        for rec in self.layers:
            out += struct.pack("<IIH", rec.rows, rec.cols, rec.m)
            out += struct.pack(f"<{rec.m + 1}d", *rec.weights)
            out += struct.pack(f"<{rec.m + 1}Q", *rec.counts)
            out += struct.pack("<Q", rec.payload.bit_length)
            out += rec.payload.data
        return bytes(out)

    @classmethod
    def parse(cls, blob: bytes) -> "NetworkContainer":
        view = memoryview(blob)

        def take(n: int) -> memoryview:
            nonlocal view
            if len(view) < n:
                raise ValidationError("container truncated")
            chunk, view = view[:n], view[n:]
            return chunk

        magic, version, mode_raw, k = struct.unpack("<4sHBH", take(9))
        if magic != MAGIC:
            raise ValidationError("not a QNNC container (bad magic)")
        if version != VERSION:
            raise ValidationError(f"unsupported container version {version}")
        try:
            mode = Mode(mode_raw)
        except ValueError:
            raise ValidationError(f"unknown container mode {mode_raw}") from None
        if k < 1:
            raise ValidationError("container declares zero layers")
        layers = []
        for _ in range(k):
            rows, cols, m = struct.unpack("<IIH", take(10))
            if rows < 1 or cols < 1 or m < 1:
                raise ValidationError("layer record has degenerate dimensions")
            weights = struct.unpack(f"<{m + 1}d", take(8 * (m + 1)))
            counts = struct.unpack(f"<{m + 1}Q", take(8 * (m + 1)))
            (payload_bits,) = struct.unpack("<Q", take(8))
            nbytes = (payload_bits + 7) // 8
            payload = Bitstream(bytes(take(nbytes)), payload_bits)
            layers.append(
                CompressedLayer(
                    rows=rows,
                    cols=cols,
                    m=m,
                    weights=tuple(weights),
                    counts=tuple(counts),
                    payload=payload,
                )
            )
        if len(view):
            raise ValidationError(f"{len(view)} trailing bytes after container payload")
        for i in range(1, k):
            if layers[i].cols != layers[i - 1].rows:
                raise ValidationError("layer dimensions do not chain")
        return cls(mode=mode, layers=tuple(layers))


def pack_raw_matrix(matrix: ColorMatrix) -> Bitstream:
    """Pack color indices row-major, one or two bytes per cell by m."""
    dtype = "<u1" if matrix.m < 256 else "<u2"
    data = matrix.cells.astype(dtype).tobytes()
    return Bitstream(data, 8 * len(data))


def unpack_raw_matrix(payload: Bitstream, rows: int, cols: int, m: int) -> ColorMatrix:
    dtype = "<u1" if m < 256 else "<u2"
    width = 1 if m < 256 else 2
    if len(payload.data) != rows * cols * width:
        raise ValidationError("raw layer payload has the wrong size")
    cells = np.frombuffer(payload.data, dtype=dtype).reshape(rows, cols).astype(np.int64)
    if cells.max(initial=0) > m:
        raise ValidationError("raw layer payload contains out-of-range colors")
    return ColorMatrix(rows=rows, cols=cols, m=m, cells=cells)


def _raw_record(matrix: ColorMatrix, codebook: Codebook) -> CompressedLayer:
    return CompressedLayer(
        rows=matrix.rows,
        cols=matrix.cols,
        m=matrix.m,
        weights=codebook.weights,
        counts=empirical_model(matrix).counts,
        payload=pack_raw_matrix(matrix),
    )


def container_from_network(net: QuantizedNetwork) -> NetworkContainer:
    """Store every matrix raw (mode 0)."""
    return NetworkContainer(
        mode=Mode.RAW,
        layers=tuple(_raw_record(mat, cb) for mat, cb in net.layers),
    )


def network_from_container(container: NetworkContainer) -> QuantizedNetwork:
    """Materialize a raw-mode container back into a network."""
    if container.mode != Mode.RAW:
        raise ValidationError("only raw containers map directly to a network")
    layers = []
    for rec in container.layers:
        mat = unpack_raw_matrix(rec.payload, rec.rows, rec.cols, rec.m)
        layers.append((mat, rec.codebook()))
    return QuantizedNetwork(tuple(layers))


def compress_network_plbg(net: QuantizedNetwork) -> NetworkContainer:
    """Code hidden layers with the row-multiset codec, chaining relabelings.

    Matrix l is canonical-sorted and coded; the sort permutation relabels
    matrix l+1's columns before it is processed.  The final matrix is
    stored raw in its relabeled form, so the output stays labeled.
    """
    records = []
    pending: RowPermutation | None = None
    for idx, (mat, cb) in enumerate(net.layers):
        if pending is not None:
            mat = ColorMatrix(mat.rows, mat.cols, mat.m, pending.apply_to_columns(mat.cells))
        if idx == net.num_matrices - 1:
            records.append(_raw_record(mat, cb))
            pending = None
            continue
        canonical, perm = canonical_sort_rows(mat)
        model = empirical_model(canonical)
        stream = plbg_encode(canonical, model)
        records.append(
            CompressedLayer(
                rows=mat.rows,
                cols=mat.cols,
                m=mat.m,
                weights=cb.weights,
                counts=model.counts,
                payload=stream,
            )
        )
        pending = perm
    return NetworkContainer(mode=Mode.PLBG, layers=tuple(records))


def decompress_network(container: NetworkContainer) -> QuantizedNetwork:
    """Inverse of compression where defined.

    Layer-codec containers yield hidden matrices in canonical row order
    with downstream columns already relabeled to match; the network
    function is preserved exactly.  Multi-tree containers come back with
    the stored outer permutations applied.
    """
    if container.mode == Mode.RAW:
        return network_from_container(container)
    if container.mode == Mode.KTREE:
        net, _, _ = decode_network_ktree(container)
        return net
    layers = []
    for idx, rec in enumerate(container.layers):
        if idx == container.num_matrices - 1:
            mat = unpack_raw_matrix(rec.payload, rec.rows, rec.cols, rec.m)
        else:
            mat = plbg_decode(rec.payload, rec.model(), rec.cols)
            if mat.rows != rec.rows:
                raise StreamError("payload row count disagrees with the layer record")
        layers.append((mat, rec.codebook()))
    return QuantizedNetwork(tuple(layers))


def dense_forward(
    net: QuantizedNetwork,
    x,
    activation: ActivationKind = ActivationKind.IDENTITY,
    final_activation: ActivationKind = ActivationKind.IDENTITY,
) -> np.ndarray:
    """Reference forward pass on materialized weights."""
    a = np.asarray(x, dtype=np.float64)
    if a.shape != (net.input_width,):
        raise ValidationError(f"input width {a.size} != {net.input_width}")
    last = net.num_matrices - 1
    for idx, (mat, cb) in enumerate(net.layers):
        z = cb.as_array()[mat.cells] @ a
        a = (final_activation if idx == last else activation).apply(z)
    return a


def infer_network(
    container: NetworkContainer,
    x,
    activation: ActivationKind = ActivationKind.IDENTITY,
    final_activation: ActivationKind = ActivationKind.IDENTITY,
    metrics_out: list[QueueMetrics] | None = None,
    timing: PhaseTimer | None = None,
) -> np.ndarray:
    """Forward pass straight off the container.

    Layer-codec containers are evaluated without materializing hidden
    matrices; every compressed stream is re-encoded on the fly and must
    come back bit-identical.  Raw containers fall back to the dense pass.
    """
    a = np.asarray(x, dtype=np.float64)
    if a.shape != (container.input_width,):
        raise ValidationError(f"input width {a.size} != {container.input_width}")
    if container.mode == Mode.RAW:
        return dense_forward(network_from_container(container), a, activation, final_activation)
    if container.mode != Mode.PLBG:
        raise ValidationError(
            "direct inference needs a raw or layer-codec container; decompress first"
        )
    last = container.num_matrices - 1
    for idx, rec in enumerate(container.layers):
        if idx == last:
            mat = unpack_raw_matrix(rec.payload, rec.rows, rec.cols, rec.m)
            z = rec.codebook().as_array()[mat.cells] @ a
            a = final_activation.apply(z)
            continue
        y, stream_out, metrics = infer_layer(
            rec.payload, rec.model(), rec.codebook(), a, activation, timing=timing
        )
        if (
            stream_out.data != rec.payload.data
            or stream_out.bit_length != rec.payload.bit_length
        ):
            raise StreamError(f"layer {idx}: re-encoded stream diverged from input")
        if metrics_out is not None:
            metrics_out.append(metrics)
        a = y
    return a


# ---------------------------------------------------------------------------
# multi-tree path for binary networks of uniform width
# ---------------------------------------------------------------------------


def _perm_entry_bits(n: int) -> int:
    return (n - 1).bit_length() if n > 1 else 0


def compress_network_ktree(net: QuantizedNetwork) -> NetworkContainer:
    """Joint multi-tree coding of a binary network of uniform width.

    All node layers hold N nodes; one node per layer is consumed per
    iteration, and every consumption splits the neighboring layers' node
    groups by connectivity (group sizes coded against the owning matrix's
    empirical no-edge probability).  The input and output layer orderings
    are appended as two ceil(log2 N)-bit-per-entry arrays.
    """
    n = net.input_width
    for idx, (mat, _) in enumerate(net.layers):
        if mat.m != 1:
            raise ValidationError("multi-tree coding needs binary colors")
        if mat.rows != n or mat.cols != n:
            raise ValidationError("multi-tree coding needs uniform width")
    num_layers = net.num_matrices + 1
    models = [empirical_model(mat) for mat, _ in net.layers]
    cells = [mat.cells for mat, _ in net.layers]

    groups: list[list[list[int]]] = [[list(range(n))] for _ in range(num_layers)]
    selection_order: list[list[int]] = [[] for _ in range(num_layers)]
    body = BitWriter()
    enc = ArithmeticEncoder(body)

    def connected(layer_j: int, node_j: int, layer_k: int, node_k: int) -> bool:
        if layer_k == layer_j + 1:
            return bool(cells[layer_j][node_k, node_j])
        return bool(cells[layer_k][node_j, node_k])

    for _ in range(n):
        for j in range(num_layers):
            grp0 = groups[j][0]
            selected = min(grp0)
            grp0.remove(selected)
            if not grp0:
                groups[j].pop(0)
            selection_order[j].append(selected)
            for k in (j - 1, j + 1):
                if not 0 <= k < num_layers:
                    continue
                model = models[min(j, k)]
                new_groups: list[list[int]] = []
                for grp in groups[k]:
                    left = [v for v in grp if not connected(j, selected, k, v)]
                    right = [v for v in grp if connected(j, selected, k, v)]
                    enc.encode(
                        binomial_table(len(grp), model.counts[0], model.total), len(left)
                    )
                    if left:
                        new_groups.append(left)
                    if right:
                        new_groups.append(right)
                groups[k] = new_groups
    enc.finish()

    # layout: [gamma(N)] [input perm] [output perm] [arithmetic body]; the
    # permutations go first because the body's decoder reads ahead
    out = BitWriter()
    elias_encode(n, out)
    header_bits = out.bit_length
    width = _perm_entry_bits(n)
    for node in selection_order[0]:
        out.write_bits(node, width)
    for node in selection_order[-1]:
        out.write_bits(node, width)
    body_reader = body.getvalue()
    for i in range(body.bit_length):
        out.write_bit((body_reader[i >> 3] >> (7 - (i & 7))) & 1)

    stream = Bitstream(out.getvalue(), out.bit_length, header_bits)
    records = []
    for idx, (mat, cb) in enumerate(net.layers):
        records.append(
            CompressedLayer(
                rows=mat.rows,
                cols=mat.cols,
                m=mat.m,
                weights=cb.weights,
                counts=models[idx].counts,
                payload=stream if idx == 0 else Bitstream(b"", 0),
            )
        )
    return NetworkContainer(mode=Mode.KTREE, layers=tuple(records))


def ktree_division_trace(net: QuantizedNetwork) -> list[tuple[int, int, int]]:
    """(tree index, parent value, left value) of every division, in order.

    Runs the encoder's schedule without producing a container; used by
    structural tests on the tree shapes.
    """
    n = net.input_width
    trace: list[tuple[int, int, int]] = []
    num_layers = net.num_matrices + 1
    cells = [mat.cells for mat, _ in net.layers]
    groups: list[list[list[int]]] = [[list(range(n))] for _ in range(num_layers)]

    def connected(layer_j, node_j, layer_k, node_k):
        if layer_k == layer_j + 1:
            return bool(cells[layer_j][node_k, node_j])
        return bool(cells[layer_k][node_j, node_k])

    for _ in range(n):
        for j in range(num_layers):
            grp0 = groups[j][0]
            selected = min(grp0)
            grp0.remove(selected)
            if not grp0:
                groups[j].pop(0)
            for k in (j - 1, j + 1):
                if not 0 <= k < num_layers:
                    continue
                new_groups = []
                for grp in groups[k]:
                    left = [v for v in grp if not connected(j, selected, k, v)]
                    right = [v for v in grp if connected(j, selected, k, v)]
                    trace.append((k, len(grp), len(left)))
                    if left:
                        new_groups.append(left)
                    if right:
                        new_groups.append(right)
                groups[k] = new_groups
    return trace


def decode_network_ktree(
    container: NetworkContainer,
) -> tuple[QuantizedNetwork, RowPermutation, RowPermutation]:
    """Rebuild a function-equivalent network from a multi-tree container.

    Returns (network, input_perm, output_perm).  The stored outer
    permutations are already applied to the first matrix's columns and
    the last matrix's rows, so the returned network computes exactly the
    original function on original-indexed vectors; hidden layers carry
    the decoder's canonical labeling.
    """
    if container.mode != Mode.KTREE:
        raise ValidationError("container is not in multi-tree mode")
    n = container.input_width
    num_layers = container.num_matrices + 1
    models = [rec.model() for rec in container.layers]
    stream = container.layers[0].payload
    src = stream.reader()
    n_stream = elias_decode(src)
    if n_stream != n:
        raise StreamError("payload width disagrees with the layer records")

    width = _perm_entry_bits(n)
    in_perm = [src.read_bits(width) for _ in range(n)]
    out_perm = [src.read_bits(width) for _ in range(n)]
    for entry in in_perm + out_perm:
        if entry >= n:
            raise StreamError("stored permutation entry out of range")

    dec = ArithmeticDecoder(src)
    matrices = [np.zeros((n, n), dtype=np.int64) for _ in range(container.num_matrices)]
    groups: list[list[list[int]]] = [[list(range(n))] for _ in range(num_layers)]
    selection_order: list[list[int]] = [[] for _ in range(num_layers)]

    for _ in range(n):
        for j in range(num_layers):
            grp0 = groups[j][0]
            selected = grp0.pop(0)
            if not grp0:
                groups[j].pop(0)
            selection_order[j].append(selected)
            for k in (j - 1, j + 1):
                if not 0 <= k < num_layers:
                    continue
                model = models[min(j, k)]
                new_groups = []
                for grp in groups[k]:
                    left_count = dec.decode(
                        binomial_table(len(grp), model.counts[0], model.total)
                    )
                    left, right = grp[:left_count], grp[left_count:]
                    for v in right:
                        if k == j + 1:
                            matrices[j][v, selected] = 1
                        else:
                            matrices[k][selected, v] = 1
                    if left:
                        new_groups.append(left)
                    if right:
                        new_groups.append(right)
                groups[k] = new_groups

    # remap outer layers to the stored original labeling
    first = matrices[0].copy()
    for i in range(n):
        first[:, in_perm[i]] = matrices[0][:, selection_order[0][i]]
    last = matrices[-1].copy() if len(matrices) > 1 else first.copy()
    source_last = matrices[-1] if len(matrices) > 1 else first
    for i in range(n):
        last[out_perm[i], :] = source_last[selection_order[-1][i], :]
    matrices[0] = first
    matrices[-1] = last

    layers = []
    for idx, rec in enumerate(container.layers):
        mat = ColorMatrix(rows=n, cols=n, m=1, cells=matrices[idx])
        layers.append((mat, rec.codebook()))
    net = QuantizedNetwork(tuple(layers))
    return net, RowPermutation(tuple(in_perm)), RowPermutation(tuple(out_perm))
