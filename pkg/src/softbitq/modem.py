"""Gray-labeled QAM constellations, exact LLRs, and soft-bit transforms.

A soft bit is the tanh-compressed log-likelihood ratio, lambda = tanh(L/2),
so it lives in [-1, 1] and carries both the hard decision (sign) and the
reliability (magnitude). All LLRs in this package are expressed in nats
and clamped to +/- LLR_MAX before leaving this module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import LLR_MAX

SUPPORTED_K = (1, 2, 4, 6, 8)


@dataclass(frozen=True)
class Constellation:
    """A 2^K point constellation with one K-bit label per point.

    Attributes:
        k: Bits per symbol.
        points: Complex array of shape (2^K,), unit average energy.
        labels: uint8 array of shape (2^K, K); labels[i] is the bit
            vector carried by points[i], first bit on the in-phase axis.
    """

    k: int
    points: np.ndarray
    labels: np.ndarray

    @property
    def label_ints(self) -> np.ndarray:
        """Labels packed big-endian into integers (first bit is the MSB)."""
        weights = 1 << np.arange(self.k - 1, -1, -1)
        return (self.labels.astype(np.int64) * weights).sum(axis=1)


def _gray_code(n: np.ndarray) -> np.ndarray:
    return n ^ (n >> 1)


def _gray_pam(bits: int) -> tuple[np.ndarray, np.ndarray]:
    """Gray-labeled PAM axis with the given number of bits.

    Returns:
        amplitudes: 2^bits odd-integer levels in ascending order.
        labels: labels[i] is the integer label of amplitudes[i], chosen so
            adjacent amplitudes differ in exactly one bit.
    """
    m = 1 << bits
    amplitudes = np.linspace(-(m - 1), m - 1, m)
    labels = _gray_code(np.arange(m))
    return amplitudes, labels


def build_constellation(k: int) -> Constellation:
    """Build the Gray-mapped constellation for k bits per symbol.

    k = 1 gives BPSK with bit 1 mapping to +1. Even k gives square QAM
    built as the Cartesian product of two Gray-coded PAM axes, with the
    first k/2 label bits on the in-phase axis. Average symbol energy is
    normalized to 1.

    Args:
        k: Bits per symbol, one of (1, 2, 4, 6, 8).

    Returns:
        The constellation.
    """
    if k not in SUPPORTED_K:
        raise ValueError(f"k must be one of {SUPPORTED_K}, got {k}")

    if k == 1:
        points = np.array([1.0 + 0j, -1.0 + 0j])
        labels = np.array([[1], [0]], dtype=np.uint8)
        return Constellation(k=1, points=points, labels=labels)

    half = k // 2
    amps, axis_labels = _gray_pam(half)
    m = 1 << half

    points = np.empty(m * m, dtype=complex)
    labels = np.empty((m * m, k), dtype=np.uint8)
    bit_weights = 1 << np.arange(half - 1, -1, -1)
    for i_idx in range(m):
        for q_idx in range(m):
            flat = i_idx * m + q_idx
            points[flat] = amps[i_idx] + 1j * amps[q_idx]
            i_bits = (axis_labels[i_idx] // bit_weights) % 2
            q_bits = (axis_labels[q_idx] // bit_weights) % 2
            labels[flat, :half] = i_bits
            labels[flat, half:] = q_bits

    points /= np.sqrt(np.mean(np.abs(points) ** 2))
    return Constellation(k=k, points=points, labels=labels)


def modulate(bits: np.ndarray, constellation: Constellation) -> np.ndarray:
    """Map bits to constellation symbols.

    Args:
        bits: Array of 0/1 with shape (..., K) or flat with length a
            multiple of K; rows are symbol labels, first bit on I.
        constellation: Target constellation.

    Returns:
        Complex symbol array of shape (...,) matching the row count.
    """
    k = constellation.k
    flat = np.asarray(bits).reshape(-1, k)
    weights = 1 << np.arange(k - 1, -1, -1)
    ints = (flat.astype(np.int64) * weights).sum(axis=1)
    # invert the label -> point relation once
    lookup = np.empty(1 << k, dtype=np.int64)
    lookup[constellation.label_ints] = np.arange(1 << k)
    return constellation.points[lookup[ints]]


def compute_llr(
    y: np.ndarray,
    h: np.ndarray,
    sigma_n: float,
    constellation: Constellation,
) -> np.ndarray:
    """Exact per-bit LLRs for observations through a known fading gain.

    Implements the maximum-likelihood ratio

        L_k = log sum_{s: b_k=1} exp(-|y - h s|^2 / sigma_n^2)
            - log sum_{s: b_k=0} exp(-|y - h s|^2 / sigma_n^2)

    with max-subtraction for numerical stability, then clamps to
    +/- LLR_MAX nats. Positive LLR favors bit value 1.

    Args:
        y: Received complex samples, shape (N,).
        h: Per-sample complex channel gains, shape (N,).
        sigma_n: Noise standard deviation; E|n|^2 = sigma_n^2.
        constellation: Constellation the transmitter used.

    Returns:
        Float array of shape (N, K).
    """
    y = np.asarray(y).reshape(-1)
    h = np.asarray(h).reshape(-1)
    diff = y[:, None] - h[:, None] * constellation.points[None, :]
    metric = -(diff.real**2 + diff.imag**2) / (sigma_n * sigma_n)
    peak = metric.max(axis=1, keepdims=True)
    shifted = np.exp(metric - peak)

    k = constellation.k
    llrs = np.empty((y.shape[0], k))
    with np.errstate(divide="ignore"):
        for bit in range(k):
            one = constellation.labels[:, bit] == 1
            num = shifted[:, one].sum(axis=1)
            den = shifted[:, ~one].sum(axis=1)
            # peak cancels in the difference of logs; a fully underflowed
            # side yields -inf which the clamp turns into -LLR_MAX
            llrs[:, bit] = np.log(num) - np.log(den)
    return np.clip(llrs, -LLR_MAX, LLR_MAX)


def to_soft_bits(llrs: np.ndarray) -> np.ndarray:
    """Compress LLRs into soft bits: lambda = tanh(L / 2)."""
    return np.tanh(np.asarray(llrs) / 2.0)


def to_llr(soft_bits: np.ndarray) -> np.ndarray:
    """Expand soft bits back into LLRs: L = 2 atanh(lambda), clamped.

    Values at exactly +/- 1 map to +/- LLR_MAX rather than infinity.
    """
    lam = np.clip(np.asarray(soft_bits), -1.0, 1.0)
    with np.errstate(divide="ignore"):
        llrs = 2.0 * np.arctanh(lam)
    return np.clip(llrs, -LLR_MAX, LLR_MAX)
