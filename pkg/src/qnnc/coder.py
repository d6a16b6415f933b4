"""Bit-level entropy coding primitives.

Three pieces live here:

* ``BitWriter`` / ``BitReader`` -- MSB-first bit streams packed into bytes.
* ``elias_encode`` / ``elias_decode`` -- the gamma integer code shifted by
  one so that 0 is encodable; x costs exactly 2*floor(log2(x+1)) + 1 bits.
* ``ArithmeticEncoder`` / ``ArithmeticDecoder`` -- a static arithmetic coder
  with 64-bit registers driven by integer ``FrequencyTable`` objects.

Encoder and decoder must be fed identical table sequences.  Tables are
built from exact integer inputs through one shared quantization routine
(``binomial_table``), so both sides always agree bit for bit.

Termination writes a single disambiguating bit and the decoder zero-pads
reads past the end of the stream; the total overshoot of a stream versus
the ideal codelength is covered by the ``C_TERM_BITS`` budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from .errors import StreamError, ValidationError

# Per-stream allowance for termination plus table-quantization slack.
C_TERM_BITS = 64

# Every frequency table is normalized to this exact total.
TABLE_TOTAL = 1 << 30

_STATE_BITS = 64
_FULL = 1 << _STATE_BITS
_HALF = _FULL >> 1
_QUARTER = _FULL >> 2
_MASK = _FULL - 1
_MIN_RANGE = _QUARTER + 2


@dataclass(frozen=True)
class Bitstream:
    """A finished bit string: packed bytes plus its exact length in bits.

    ``header_bits`` records how many leading bits form the self-delimiting
    integer header (when there is one), so callers can report the
    arithmetic-coded portion separately.
    """

    data: bytes
    bit_length: int
    header_bits: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.bit_length <= 8 * len(self.data):
            raise ValidationError("bit length inconsistent with byte payload")
        if not 0 <= self.header_bits <= self.bit_length:
            raise ValidationError("header length exceeds stream length")

    @property
    def payload_bits(self) -> int:
        """Bits past the integer header (the arithmetic-coded portion)."""
        return self.bit_length - self.header_bits

    def reader(self) -> "BitReader":
        return BitReader(self.data, self.bit_length)


class BitWriter:
    """Append-only bit sink; bits are packed MSB-first into bytes."""

    def __init__(self) -> None:
        self._buf = bytearray()
        self._acc = 0
        self._nacc = 0
        self.bit_length = 0

    def write_bit(self, bit: int) -> None:
        self._acc = (self._acc << 1) | (bit & 1)
        self._nacc += 1
        self.bit_length += 1
        if self._nacc == 8:
            self._buf.append(self._acc)
            self._acc = 0
            self._nacc = 0

    def write_bits(self, value: int, width: int) -> None:
        for shift in range(width - 1, -1, -1):
            self.write_bit((value >> shift) & 1)

    def getvalue(self) -> bytes:
        """Return the stream with the final partial byte zero-padded."""
        if self._nacc:
            return bytes(self._buf) + bytes([self._acc << (8 - self._nacc)])
        return bytes(self._buf)


class BitReader:
    """Bit source over a byte string; reads past the end return zeros.

    ``bits_consumed`` counts every read, including zero-padding, so callers
    can detect gross overreads if they care.
    """

    def __init__(self, data: bytes, bit_length: int | None = None) -> None:
        self._data = data
        self.bit_length = 8 * len(data) if bit_length is None else bit_length
        if self.bit_length > 8 * len(data):
            raise StreamError("declared bit length exceeds the data")
        self.bits_consumed = 0
        self._pos = 0

    def read_bit(self) -> int:
        pos = self._pos
        self.bits_consumed += 1
        if pos >= self.bit_length:
            return 0
        self._pos = pos + 1
        return (self._data[pos >> 3] >> (7 - (pos & 7))) & 1

    def read_bits(self, width: int) -> int:
        value = 0
        for _ in range(width):
            value = (value << 1) | self.read_bit()
        return value

    @property
    def exhausted(self) -> bool:
        return self._pos >= self.bit_length


def elias_length(x: int) -> int:
    """Exact coded length of ``x`` under the shifted gamma code."""
    if x < 0:
        raise ValidationError("gamma code is defined for nonnegative integers")
    return 2 * (x + 1).bit_length() - 1


def elias_encode(x: int, out: BitWriter) -> None:
    """Write the shifted gamma code of ``x >= 0``: 0 -> '1', 1 -> '010', ..."""
    if x < 0:
        raise ValidationError("gamma code is defined for nonnegative integers")
    v = x + 1
    width = v.bit_length()
    for _ in range(width - 1):
        out.write_bit(0)
    out.write_bits(v, width)


def elias_decode(src: BitReader) -> int:
    zeros = 0
    while src.read_bit() == 0:
        zeros += 1
        if zeros > 64:
            raise StreamError("gamma code prefix too long; stream corrupt")
        if src.exhausted:
            raise StreamError("truncated gamma code")
    v = 1
    for _ in range(zeros):
        v = (v << 1) | src.read_bit()
    return v - 1


class FrequencyTable:
    """Immutable integer frequency table with cumulative sums.

    Every symbol must have frequency >= 1 and the total must fit the
    coder's range register.
    """

    __slots__ = ("freqs", "cum", "total")

    def __init__(self, freqs) -> None:
        self.freqs = tuple(freqs)
        if not self.freqs:
            raise ValidationError("frequency table must be nonempty")
        cum = [0]
        for f in self.freqs:
            if f < 1:
                raise ValidationError("every symbol needs frequency >= 1")
            cum.append(cum[-1] + f)
        self.cum = tuple(cum)
        self.total = cum[-1]
        if self.total > _MIN_RANGE:
            raise ValidationError("table total overflows the coder range")

    def __len__(self) -> int:
        return len(self.freqs)

    def interval(self, symbol: int):
        if not 0 <= symbol < len(self.freqs):
            raise ValidationError(f"symbol {symbol} out of table range")
        return self.cum[symbol], self.cum[symbol + 1]

    def locate(self, value: int) -> int:
        """Return the symbol whose cumulative interval contains ``value``."""
        lo, hi = 0, len(self.freqs)
        cum = self.cum
        while lo + 1 < hi:
            mid = (lo + hi) >> 1
            if cum[mid] > value:
                hi = mid
            else:
                lo = mid
        return lo

    def ideal_bits(self, symbol: int) -> float:
        lo, hi = self.interval(symbol)
        return -math.log2((hi - lo) / self.total)


def _binomial_pmf(n: int, num: int, den: int) -> list[float]:
    """pmf of Binomial(n, num/den) via the multiplicative ratio recurrence.

    Falls back to log-space evaluation if q**n underflows to zero.  Both
    paths are deterministic double arithmetic, shared by encoder and
    decoder.
    """
    p = num / den
    q = 1.0 - p
    cur = q**n
    if cur > 0.0 and math.isfinite(cur):
        pmf = []
        ratio = p / q
        for k in range(n + 1):
            pmf.append(cur)
            cur *= ratio * (n - k) / (k + 1.0)
        return pmf
    lp, lq = math.log(p), math.log(q)
    lg = math.lgamma
    logs = [
        lg(n + 1) - lg(k + 1) - lg(n - k + 1) + k * lp + (n - k) * lq
        for k in range(n + 1)
    ]
    peak = max(logs)
    return [math.exp(v - peak) for v in logs]


def _quantize(pmf: list[float]) -> tuple[int, ...]:
    """Scale a pmf to integers totalling ``TABLE_TOTAL``.

    Values are floored, zeros are raised to 1, and the deficit is taken
    out of (or added to) the largest entry, so the total is exact and
    every symbol stays admissible.
    """
    s = sum(pmf)
    if not (s > 0.0 and math.isfinite(s)):
        raise ValidationError("degenerate pmf cannot be quantized")
    freqs = [int(v / s * TABLE_TOTAL) for v in pmf]
    freqs = [f if f > 0 else 1 for f in freqs]
    deficit = sum(freqs) - TABLE_TOTAL
    top = max(range(len(freqs)), key=freqs.__getitem__)
    freqs[top] -= deficit
    if freqs[top] < 1:
        raise ValidationError("pmf too flat for the table resolution")
    return tuple(freqs)


@lru_cache(maxsize=1 << 16)
def binomial_table(n: int, num: int, den: int) -> FrequencyTable:
    """Quantized table over 0..n proportional to Binomial(n, num/den).

    ``num == 0`` and ``num == den`` degenerate cleanly: the certain symbol
    absorbs nearly the whole total while every other symbol keeps
    frequency 1, costing ~0 bits for valid inputs and keeping invalid
    symbols representable (they fail at validation, not mid-stream).
    """
    if n < 0:
        raise ValidationError("binomial trials must be nonnegative")
    if den <= 0 or not 0 <= num <= den:
        raise ValidationError("binomial probability must satisfy 0 <= num <= den")
    if n == 0:
        return FrequencyTable((1,))
    if num == 0:
        pmf = [1.0] + [0.0] * n
    elif num == den:
        pmf = [0.0] * n + [1.0]
    else:
        pmf = _binomial_pmf(n, num, den)
    return FrequencyTable(_quantize(pmf))


class ArithmeticEncoder:
    """Single-owner arithmetic encoding session writing into a BitWriter."""

    def __init__(self, out: BitWriter) -> None:
        self._out = out
        self._low = 0
        self._high = _MASK
        self._pending = 0
        self._finished = False

    def encode(self, table: FrequencyTable, symbol: int) -> None:
        if self._finished:
            raise StreamError("session already terminated")
        sym_lo, sym_hi = table.interval(symbol)
        total = table.total
        span = self._high - self._low + 1
        self._high = self._low + (span * sym_hi) // total - 1
        self._low = self._low + (span * sym_lo) // total
        while True:
            if self._high < _HALF:
                self._emit(0)
            elif self._low >= _HALF:
                self._emit(1)
                self._low -= _HALF
                self._high -= _HALF
            elif self._low >= _QUARTER and self._high < 3 * _QUARTER:
                self._pending += 1
                self._low -= _QUARTER
                self._high -= _QUARTER
            else:
                break
            self._low = (self._low << 1) & _MASK
            self._high = ((self._high << 1) & _MASK) | 1

    def _emit(self, bit: int) -> None:
        self._out.write_bit(bit)
        for _ in range(self._pending):
            self._out.write_bit(bit ^ 1)
        self._pending = 0

    def finish(self) -> None:
        """Flush the single bit that pins the final interval."""
        if not self._finished:
            self._out.write_bit(1)
            self._finished = True


class ArithmeticDecoder:
    """Single-owner decoding session over a BitReader."""

    def __init__(self, src: BitReader) -> None:
        self._src = src
        self._low = 0
        self._high = _MASK
        self._code = src.read_bits(_STATE_BITS)

    def decode(self, table: FrequencyTable) -> int:
        total = table.total
        span = self._high - self._low + 1
        value = ((self._code - self._low + 1) * total - 1) // span
        symbol = table.locate(min(value, total - 1))
        sym_lo, sym_hi = table.interval(symbol)
        self._high = self._low + (span * sym_hi) // total - 1
        self._low = self._low + (span * sym_lo) // total
        while True:
            if self._high < _HALF:
                pass
            elif self._low >= _HALF:
                self._low -= _HALF
                self._high -= _HALF
                self._code -= _HALF
            elif self._low >= _QUARTER and self._high < 3 * _QUARTER:
                self._low -= _QUARTER
                self._high -= _QUARTER
                self._code -= _QUARTER
            else:
                break
            self._low = (self._low << 1) & _MASK
            self._high = ((self._high << 1) & _MASK) | 1
            self._code = ((self._code << 1) & _MASK) | self._src.read_bit()
        return symbol
