"""Layer evaluation directly on the compressed bitstream.

The weight matrix is never materialized.  The coded count tree is walked
breadth first with a queue of pending node values; each decoded child
block of size c means "the next c output nodes share this color at the
current input column", so the block's contribution is added with one
vector operation.  Every decoded symbol is immediately re-encoded, which
reproduces the input stream bit for bit, and the queue never holds more
than two depths of nodes, so the extra dynamic space is O(N) against the
O(N*M) matrix.

Queue occupancy is metered in coded bits (each entry priced at its
shifted-gamma length) and sampled after every dequeue.
"""

from __future__ import annotations

import enum
import math
import time
from collections import deque
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
    elias_length,
)
from .errors import StreamError, ValidationError
from .model import Codebook, EdgeModel


class ActivationKind(enum.Enum):
    IDENTITY = "identity"
    RELU = "relu"
    SIGMOID = "sigmoid"

    @classmethod
    def from_name(cls, name: str) -> "ActivationKind":
        try:
            return cls(name.lower())
        except ValueError:
            raise ValidationError(f"unknown activation {name!r}") from None

    def apply(self, y: np.ndarray) -> np.ndarray:
        if self is ActivationKind.IDENTITY:
            return y
        if self is ActivationKind.RELU:
            return np.maximum(y, 0.0)
        out = np.empty_like(y)
        pos = y >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-y[pos]))
        ey = np.exp(y[~pos])
        out[~pos] = ey / (1.0 + ey)
        return out


@dataclass
class QueueMetrics:
    """Measured dynamic-space usage of one compressed inference pass."""

    avg_bits: float
    max_bits: int
    entries_max: int
    samples: int


@dataclass
class PhaseTimer:
    """Wall-clock accumulator for the three phases of compressed inference."""

    tables_s: float = 0.0
    coding_s: float = 0.0
    accumulate_s: float = 0.0
    total_s: float = 0.0

    def add(self, other: "PhaseTimer") -> None:
        self.tables_s += other.tables_s
        self.coding_s += other.coding_s
        self.accumulate_s += other.accumulate_s
        self.total_s += other.total_s

    def percentages(self) -> dict[str, float]:
        total = self.total_s if self.total_s > 0 else math.inf
        return {
            "pmf": 100.0 * self.tables_s / total,
            "coding": 100.0 * self.coding_s / total,
            "accumulate": 100.0 * self.accumulate_s / total,
        }


def queue_space_bound(n_rows: int, m: int) -> float:
    """Worst-case coded queue size in bits: 2N(m+1) + 4N(m+1)log2((m+2)/(m+1))."""
    if n_rows < 1 or m < 1:
        raise ValidationError("bound needs n_rows >= 1 and m >= 1")
    nm = n_rows * (m + 1)
    return 2.0 * nm + 4.0 * nm * math.log2((m + 2) / (m + 1))


def infer_layer(
    stream: Bitstream,
    model: EdgeModel,
    codebook: Codebook,
    x: np.ndarray,
    activation: ActivationKind = ActivationKind.IDENTITY,
    timing: PhaseTimer | None = None,
):
    """Evaluate one compressed layer on input vector ``x``.

    Returns ``(y, stream_out, metrics)`` where ``y[j]`` is the activation
    of canonical-order output node j, ``stream_out`` is bit-identical to
    ``stream``, and ``metrics`` carries the measured queue statistics.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise ValidationError("input must be a nonempty vector")
    if codebook.m != model.m:
        raise ValidationError("codebook and model disagree on color count")
    n_cols = x.size
    clock = time.perf_counter
    t_start = clock()

    src = stream.reader()
    out = BitWriter()
    n = elias_decode(src)
    if n < 1:
        raise StreamError("stream declares an empty layer")
    elias_encode(n, out)
    header_bits = out.bit_length
    dec = ArithmeticDecoder(src)
    enc = ArithmeticEncoder(out)

    weights = codebook.as_array()
    counts = model.counts
    suffix = model.suffix_totals
    m = model.m

    y = np.zeros(n, dtype=np.float64)
    queue: deque[int] = deque()
    queue.append(n)
    q_bits = elias_length(n)
    q_entries = 1
    entries_max = 1
    max_bits = 0
    sum_bits = 0
    samples = 0

    d = 0
    j = 0
    saw_nonzero = False
    col_weights = x[0] * weights

    def advance(c: int) -> None:
        nonlocal j, d, saw_nonzero, col_weights
        if c > 0:
            saw_nonzero = True
        j = (j + c) % n
        if j == 0 and saw_nonzero:
            d += 1
            saw_nonzero = False
            if d < n_cols:
                col_weights = x[d] * weights

    while queue and d <= n_cols - 1:
        f = queue.popleft()
        q_entries -= 1
        q_bits -= elias_length(f)
        samples += 1
        sum_bits += q_bits
        if q_bits > max_bits:
            max_bits = q_bits
        if f <= 0:
            continue
        rem = f
        for color in range(m):
            if rem > 0:
                den = suffix[color]
                if den == 0:
                    raise StreamError("stream requires colors the model excludes")
                if timing is None:
                    table = binomial_table(rem, counts[color], den)
                    c = dec.decode(table)
                    enc.encode(table, c)
                else:
                    t0 = clock()
                    table = binomial_table(rem, counts[color], den)
                    t1 = clock()
                    c = dec.decode(table)
                    enc.encode(table, c)
                    t2 = clock()
                    timing.tables_s += t1 - t0
                    timing.coding_s += t2 - t1
                rem -= c
                if rem < 0:
                    raise StreamError("child counts exceed their parent value")
            else:
                c = 0
            queue.append(c)
            q_entries += 1
            q_bits += elias_length(c)
            if q_entries > entries_max:
                entries_max = q_entries
            if c > 0:
                if timing is None:
                    y[j : j + c] += col_weights[color]
                else:
                    t0 = clock()
                    y[j : j + c] += col_weights[color]
                    timing.accumulate_s += clock() - t0
            advance(c)
        # last child is implied by the chain, nothing to decode or re-encode
        c = rem
        queue.append(c)
        q_entries += 1
        q_bits += elias_length(c)
        if q_entries > entries_max:
            entries_max = q_entries
        if c > 0:
            if timing is None:
                y[j : j + c] += col_weights[m]
            else:
                t0 = clock()
                y[j : j + c] += col_weights[m]
                timing.accumulate_s += clock() - t0
        advance(c)

    enc.finish()
    stream_out = Bitstream(out.getvalue(), out.bit_length, header_bits)
    metrics = QueueMetrics(
        avg_bits=sum_bits / samples if samples else 0.0,
        max_bits=max_bits,
        entries_max=entries_max,
        samples=samples,
    )
    if timing is not None:
        timing.total_s += clock() - t_start
    return activation.apply(y), stream_out, metrics
