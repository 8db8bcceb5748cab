"""Integer arithmetic coding of latent symbol streams.

A 32-bit-state arithmetic coder with underflow handling, driven by a
probability table quantized to 16-bit integer frequencies. The wire
format of a coded stream is

    [version byte = 1][table id: 8 bytes][symbol count: LEB128 varint][payload]

where the payload is the code bitstring MSB-first, zero-padded to a
byte boundary. The table id pins the exact frequency table the payload
was coded against; decoding with any other table raises. Symbol counts
drive termination, so the payload itself carries no end marker.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numba
import numpy as np

BLOB_VERSION = 1
TABLE_TOTAL = 1 << 16  # frequency counts are rescaled to this total

_STATE_BITS = 32
_FULL = (1 << _STATE_BITS) - 1
_HALF = 1 << (_STATE_BITS - 1)
_QUARTER = 1 << (_STATE_BITS - 2)


class DecodeError(ValueError):
    pass


@dataclass(frozen=True)
class ProbTable:
    """Smoothed symbol probabilities plus their integer-frequency form.

    p holds the exact (unquantized) probabilities, all > 0. freq holds
    the 16-bit-total integer counts the coder actually uses, each >= 1.
    """

    p: np.ndarray
    freq: np.ndarray

    @property
    def table_id(self) -> bytes:
        return hashlib.sha256(self.freq.astype("<u4").tobytes()).digest()[:8]

    @property
    def size(self) -> int:
        return self.p.size


def _rescale_to_total(p: np.ndarray, total: int = TABLE_TOTAL) -> np.ndarray:
    """Integer frequencies summing exactly to `total`, every entry >= 1."""
    target = p * total
    freq = np.maximum(1, np.round(target)).astype(np.int64)
    drift = int(total - freq.sum())
    if drift != 0:
        # push the drift onto entries farthest from their target, never below 1
        for _ in range(abs(drift)):
            err = target - freq
            if drift > 0:
                i = int(np.argmax(err))
                freq[i] += 1
            else:
                candidates = np.where(freq > 1, err, np.inf)
                i = int(np.argmin(candidates))
                freq[i] -= 1
        assert freq.sum() == total and (freq >= 1).all()
    return freq


def table_from_probs(p: np.ndarray) -> ProbTable:
    p = np.asarray(p, dtype=np.float64)
    if (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("probabilities must be nonnegative and sum to 1")
    if (p == 0).any():
        raise ValueError("zero-probability symbols are not codable; smooth first")
    return ProbTable(p=p, freq=_rescale_to_total(p))


def estimate_prob_table(symbols, size: int = 64) -> ProbTable:
    """Add-1 smoothed table from one stream or a list of streams.

    p_i = (count_i + 1) / (total + size), exactly.
    """
    if isinstance(symbols, (list, tuple)):
        symbols = np.concatenate([np.asarray(s).reshape(-1) for s in symbols]) \
            if symbols else np.empty(0, dtype=np.int64)
    arr = np.asarray(symbols, dtype=np.int64).reshape(-1)
    if arr.size and (arr.min() < 0 or arr.max() >= size):
        raise ValueError("symbol out of range")
    counts = np.bincount(arr, minlength=size)
    p = (counts + 1.0) / (arr.size + size)
    return ProbTable(p=p, freq=_rescale_to_total(p))


@dataclass(frozen=True)
class CodedBlob:
    symbol_count: int
    table_id: bytes
    payload: bytes
    payload_bits: int
    version: int = BLOB_VERSION

    def to_bytes(self) -> bytes:
        out = bytearray([self.version])
        out += self.table_id
        n = self.symbol_count
        while True:  # LEB128
            byte = n & 0x7F
            n >>= 7
            if n:
                out.append(byte | 0x80)
            else:
                out.append(byte)
                break
        out += self.payload
        return bytes(out)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "CodedBlob":
        if len(raw) < 10:
            raise DecodeError("blob too short for header")
        version = raw[0]
        if version != BLOB_VERSION:
            raise DecodeError(f"unsupported blob version {version}")
        table_id = bytes(raw[1:9])
        pos, count, shift = 9, 0, 0
        while True:
            if pos >= len(raw):
                raise DecodeError("truncated symbol count")
            byte = raw[pos]
            pos += 1
            count |= (byte & 0x7F) << shift
            shift += 7
            if not byte & 0x80:
                break
        payload = bytes(raw[pos:])
        return cls(symbol_count=count, table_id=table_id, payload=payload,
                   payload_bits=8 * len(payload), version=version)


@numba.njit(cache=True)
def _ac_encode_kernel(symbols, cum, out):  # pragma: no cover
    total = cum[-1]
    low = numba.int64(0)
    high = numba.int64(_FULL)
    pending = 0
    pos = 0  # bit position in out
    for k in range(symbols.size):
        s = symbols[k]
        rng = high - low + 1
        high = low + cum[s + 1] * rng // total - 1
        low = low + cum[s] * rng // total
        while True:
            if (low ^ high) & _HALF == 0:
                bit = low >> (_STATE_BITS - 1)
                out[pos >> 3] |= bit << (7 - (pos & 7))
                pos += 1
                inv = 1 - bit
                for _ in range(pending):
                    out[pos >> 3] |= inv << (7 - (pos & 7))
                    pos += 1
                pending = 0
                low = (low << 1) & _FULL
                high = ((high << 1) & _FULL) | 1
            elif low & ~high & _QUARTER != 0:
                pending += 1
                low = (low << 1) ^ _HALF
                high = ((high ^ _HALF) << 1) | _HALF | 1
            else:
                break
    # one closing bit pins the final interval; decoder assumes trailing zeros.
    # pending underflow bits are flushed as explicit zeros so that a correct
    # decode never reads more than STATE_BITS - 1 bits past the payload,
    # which is what makes truncation detectable.
    out[pos >> 3] |= 1 << (7 - (pos & 7))
    pos += 1
    pos += pending
    return pos


@numba.njit(cache=True)
def _ac_decode_kernel(payload, n_bits_avail, n_symbols, cum, out):  # pragma: no cover
    total = cum[-1]
    low = numba.int64(0)
    high = numba.int64(_FULL)
    code = numba.int64(0)
    pos = 0
    overrun = 0
    for _ in range(_STATE_BITS):
        bit = 0
        if pos < n_bits_avail:
            bit = (payload[pos >> 3] >> (7 - (pos & 7))) & 1
        else:
            overrun += 1
        code = (code << 1) | bit
        pos += 1
    for k in range(n_symbols):
        rng = high - low + 1
        offset = code - low
        value = ((offset + 1) * total - 1) // rng
        # binary search: largest s with cum[s] <= value
        lo_s, hi_s = 0, cum.size - 1
        while hi_s - lo_s > 1:
            mid = (lo_s + hi_s) >> 1
            if cum[mid] <= value:
                lo_s = mid
            else:
                hi_s = mid
        s = lo_s
        out[k] = s
        high = low + cum[s + 1] * rng // total - 1
        low = low + cum[s] * rng // total
        while True:
            if (low ^ high) & _HALF == 0:
                bit = 0
                if pos < n_bits_avail:
                    bit = (payload[pos >> 3] >> (7 - (pos & 7))) & 1
                else:
                    overrun += 1
                pos += 1
                code = ((code << 1) & _FULL) | bit
                low = (low << 1) & _FULL
                high = ((high << 1) & _FULL) | 1
            elif low & ~high & _QUARTER != 0:
                bit = 0
                if pos < n_bits_avail:
                    bit = (payload[pos >> 3] >> (7 - (pos & 7))) & 1
                else:
                    overrun += 1
                pos += 1
                code = (code & _HALF) | ((code << 1) & (_FULL >> 1)) | bit
                low = (low << 1) ^ _HALF
                high = ((high ^ _HALF) << 1) | _HALF | 1
            else:
                break
        if overrun > _STATE_BITS - 1:
            return -1  # consumed more virtual zeros than finish() can cover
    return 0


def _cumulative(table: ProbTable) -> np.ndarray:
    cum = np.zeros(table.size + 1, dtype=np.int64)
    np.cumsum(table.freq, out=cum[1:])
    return cum


def ac_encode(symbols: np.ndarray, table: ProbTable) -> CodedBlob:
    """Arithmetic-code a symbol stream against a table.

    Args:
        symbols: Integer indices in [0, table.size).
        table: Probability table (its integer frequencies are used).

    Returns:
        A CodedBlob; payload_bits counts the code bits actually written,
        before byte padding.
    """
    arr = np.ascontiguousarray(np.asarray(symbols, dtype=np.int64).reshape(-1))
    if arr.size and (arr.min() < 0 or arr.max() >= table.size):
        raise ValueError("symbol out of range for table")
    if arr.size == 0:
        return CodedBlob(symbol_count=0, table_id=table.table_id,
                         payload=b"", payload_bits=0)
    capacity = arr.size * 3 + 80  # bytes; worst case is ~17 bits per symbol
    buf = np.zeros(capacity, dtype=np.uint8)
    n_bits = int(_ac_encode_kernel(arr, _cumulative(table), buf))
    if n_bits > capacity * 8:
        raise RuntimeError("encoder overran its buffer")
    payload = buf[: (n_bits + 7) // 8].tobytes()
    return CodedBlob(symbol_count=arr.size, table_id=table.table_id,
                     payload=payload, payload_bits=n_bits)


def ac_decode(blob: CodedBlob, table: ProbTable) -> np.ndarray:
    """Decode a blob back into its symbol stream.

    Raises DecodeError on version or table mismatch, and when the
    payload is too short to account for the declared symbol count.
    """
    if blob.version != BLOB_VERSION:
        raise DecodeError(f"unsupported blob version {blob.version}")
    if blob.table_id != table.table_id:
        raise DecodeError("probability table does not match blob table id")
    if blob.symbol_count == 0:
        return np.empty(0, dtype=np.int64)
    out = np.empty(blob.symbol_count, dtype=np.int64)
    payload = np.frombuffer(blob.payload, dtype=np.uint8)
    status = int(_ac_decode_kernel(payload, 8 * len(blob.payload),
                                   blob.symbol_count, _cumulative(table), out))
    if status != 0:
        raise DecodeError("payload exhausted before all symbols were decoded")
    return out


def ideal_bits(symbols: np.ndarray, table: ProbTable) -> float:
    """Information content of a stream under the table: sum of -log2 p."""
    arr = np.asarray(symbols, dtype=np.int64).reshape(-1)
    return float(-np.log2(table.p[arr]).sum()) if arr.size else 0.0
