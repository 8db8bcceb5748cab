"""Comparison systems: max-mutual-information scalar quantization of raw
LLRs (one codebook per bit position per SNR) and the entropy-unaware deep
autoencoder trained on distortion alone.

The scalar quantizer picks cell boundaries on a fine LLR histogram by
dynamic programming. Mutual information between the transmitted bit and
the cell index is additive over cells, so the DP is exact for the
discretized problem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from . import channel, ldpc, modem, trainer
from .config import LLR_MAX, MaxMiConfig, TrainConfig

MIN_TRAIN_SAMPLES = 10_000


@dataclass(frozen=True)
class ScalarQuantizer:
    """Per-bit-position LLR quantizer: thresholds plus one level per cell."""

    bit_position: int
    snr_db: float
    thresholds: np.ndarray  # (cells - 1,) strictly increasing
    levels: np.ndarray  # (cells,) conditional-mean LLR per cell
    mi_bits: float  # estimated I(bit; cell) of this quantizer

    @property
    def num_levels(self) -> int:
        return self.levels.size


@numba.njit(cache=True)
def _dp_max_mi(c0, c1, n_cells):
    """Best contiguous partition of histogram bins into n_cells cells.

    c0/c1 are cumulative probability masses for bit=0 / bit=1 over the
    bins (length bins+1, c[0] = 0). Returns (mi_bits, cut_indices) where
    cuts are the n_cells-1 interior bin boundaries.
    """
    bins = c0.size - 1
    p0 = c0[bins]
    p1 = c1[bins]
    log2 = np.log(2.0)
    neg_inf = -1e30

    f = np.full((n_cells + 1, bins + 1), neg_inf)
    arg = np.zeros((n_cells + 1, bins + 1), dtype=np.int64)
    f[0, 0] = 0.0
    for m in range(1, n_cells + 1):
        for j in range(m, bins + 1):
            best = neg_inf
            best_i = m - 1
            for i in range(m - 1, j):
                prev = f[m - 1, i]
                if prev <= neg_inf:
                    continue
                a0 = c0[j] - c0[i]
                a1 = c1[j] - c1[i]
                a = a0 + a1
                w = 0.0
                if a0 > 0.0:
                    w += a0 * np.log(a0 / (a * p0)) / log2
                if a1 > 0.0:
                    w += a1 * np.log(a1 / (a * p1)) / log2
                cand = prev + w
                if cand > best:
                    best = cand
                    best_i = i
            f[m, j] = best
            arg[m, j] = best_i
    cuts = np.zeros(n_cells - 1, dtype=np.int64) if n_cells > 1 else np.zeros(0, dtype=np.int64)
    j = bins
    for m in range(n_cells, 1, -1):
        j = arg[m, j]
        cuts[m - 2] = j
    return f[n_cells, bins], cuts


def partition_mi_bits(counts0: np.ndarray, counts1: np.ndarray,
                      cuts: np.ndarray) -> float:
    """I(bit; cell) in bits for the partition given by interior bin cuts."""
    n0 = np.asarray(counts0, dtype=np.float64)
    n1 = np.asarray(counts1, dtype=np.float64)
    total = n0.sum() + n1.sum()
    p0 = n0.sum() / total
    p1 = n1.sum() / total
    edges = np.concatenate(([0], np.asarray(cuts, dtype=np.int64), [n0.size]))
    mi = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        a0 = n0[lo:hi].sum() / total
        a1 = n1[lo:hi].sum() / total
        a = a0 + a1
        if a0 > 0:
            mi += a0 * np.log2(a0 / (a * p0))
        if a1 > 0:
            mi += a1 * np.log2(a1 / (a * p1))
    return float(mi)


def histogram_mi_bits(counts0: np.ndarray, counts1: np.ndarray) -> float:
    """Unquantized MI estimate: every histogram bin is its own cell."""
    return partition_mi_bits(counts0, counts1, np.arange(1, counts0.size))


def train_maxmi(bits: np.ndarray, llrs: np.ndarray, num_levels: int,
                bit_position: int = 0, snr_db: float = 0.0,
                histogram_bins: int = 2048) -> ScalarQuantizer:
    """Fit one max-MI scalar quantizer from (bit, LLR) samples.

    Thresholds maximize the histogram estimate of I(bit; cell index);
    each cell reconstructs to its conditional-mean LLR.
    """
    bits = np.asarray(bits).reshape(-1)
    llrs = np.asarray(llrs, dtype=np.float64).reshape(-1)
    if bits.size != llrs.size:
        raise ValueError("bits and llrs must have equal length")
    if bits.size < MIN_TRAIN_SAMPLES:
        raise ValueError(f"need at least {MIN_TRAIN_SAMPLES} samples, got {bits.size}")
    if num_levels < 1:
        raise ValueError("num_levels must be >= 1")

    clipped = np.clip(llrs, -LLR_MAX, LLR_MAX)
    edges = np.linspace(-LLR_MAX, LLR_MAX, histogram_bins + 1)
    bin_of = np.clip(np.searchsorted(edges, clipped, side="right") - 1,
                     0, histogram_bins - 1)
    counts0 = np.bincount(bin_of[bits == 0], minlength=histogram_bins).astype(np.float64)
    counts1 = np.bincount(bin_of[bits == 1], minlength=histogram_bins).astype(np.float64)
    total = counts0.sum() + counts1.sum()
    c0 = np.concatenate(([0.0], np.cumsum(counts0))) / total
    c1 = np.concatenate(([0.0], np.cumsum(counts1))) / total

    mi, cuts = _dp_max_mi(c0, c1, num_levels)

    sum_llr = np.bincount(bin_of, weights=clipped, minlength=histogram_bins)
    counts = counts0 + counts1
    cell_edges = np.concatenate(([0], cuts, [histogram_bins]))
    levels = np.empty(num_levels)
    for c, (lo, hi) in enumerate(zip(cell_edges[:-1], cell_edges[1:])):
        n = counts[lo:hi].sum()
        # DP never produces an empty cell when every level adds MI, but a
        # degenerate sample set can; fall back to the cell's midpoint
        levels[c] = sum_llr[lo:hi].sum() / n if n > 0 else 0.5 * (edges[lo] + edges[hi])
    return ScalarQuantizer(
        bit_position=bit_position, snr_db=snr_db,
        thresholds=edges[cuts], levels=levels, mi_bits=float(mi))


def apply_scalar(q: ScalarQuantizer, llr) -> np.ndarray:
    """Map LLRs to their cell's reconstruction level. Monotone in llr."""
    cells = np.searchsorted(q.thresholds, np.asarray(llr, dtype=np.float64),
                            side="right")
    return q.levels[cells]


def collect_llr_samples(k: int, snr_db: float, num_symbols: int,
                        rng: np.random.Generator, chunk: int = 1 << 16):
    """(bit, LLR) pairs per position from i.i.d. Rayleigh transmissions.

    Returns (bits (num_symbols, K) uint8, llrs (num_symbols, K) float64).
    """
    const = modem.build_constellation(k)
    sigma = channel.snr_db_to_sigma_n(snr_db)
    bits = rng.integers(0, 2, (num_symbols, k), dtype=np.int8)
    llrs = np.empty((num_symbols, k))
    for start in range(0, num_symbols, chunk):
        b = bits[start:start + chunk]
        x = modem.modulate(b, const)
        h = channel.sample_iid_rayleigh(rng, x.shape)
        y = channel.transmit(x, h, sigma, rng)
        llrs[start:start + chunk] = modem.compute_llr(y, h, sigma, const)
    return bits.astype(np.uint8), llrs


@dataclass
class MaxMiBank:
    """One trained scalar quantizer per (bit position, SNR)."""

    k: int
    snr_db: np.ndarray  # (S,)
    num_levels: int
    thresholds: np.ndarray  # (S, K, levels-1)
    levels: np.ndarray  # (S, K, levels)
    mi_bits: np.ndarray  # (S, K)

    def quantizer(self, bit_position: int, snr_db: float) -> ScalarQuantizer:
        s = int(np.argmin(np.abs(self.snr_db - snr_db)))
        if abs(self.snr_db[s] - snr_db) > 1e-6:
            raise KeyError(f"no quantizer trained at {snr_db} dB")
        return ScalarQuantizer(
            bit_position=bit_position, snr_db=float(self.snr_db[s]),
            thresholds=self.thresholds[s, bit_position],
            levels=self.levels[s, bit_position],
            mi_bits=float(self.mi_bits[s, bit_position]))

    @property
    def bits_per_soft_bit(self) -> float:
        return float(np.log2(self.num_levels))


def build_maxmi_bank(k: int, snr_list, cfg: MaxMiConfig,
                     seed: int) -> MaxMiBank:
    """Train the full per-(position, SNR) quantizer bank on Rayleigh data."""
    snr_arr = np.asarray(sorted(snr_list), dtype=np.float64)
    thresholds = np.empty((snr_arr.size, k, cfg.levels - 1))
    levels = np.empty((snr_arr.size, k, cfg.levels))
    mi = np.empty((snr_arr.size, k))
    for s, snr in enumerate(snr_arr):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0xB5, s]))
        bits, llrs = collect_llr_samples(k, float(snr), cfg.samples, rng)
        for pos in range(k):
            q = train_maxmi(bits[:, pos], llrs[:, pos], cfg.levels,
                            bit_position=pos, snr_db=float(snr),
                            histogram_bins=cfg.histogram_bins)
            thresholds[s, pos] = q.thresholds
            levels[s, pos] = q.levels
            mi[s, pos] = q.mi_bits
    return MaxMiBank(k=k, snr_db=snr_arr, num_levels=cfg.levels,
                     thresholds=thresholds, levels=levels, mi_bits=mi)


def apply_maxmi_bank(bank: MaxMiBank, llrs: np.ndarray,
                     snr_db: float) -> np.ndarray:
    """Quantize-reconstruct a (..., K) LLR array with the bank at one SNR."""
    s = int(np.argmin(np.abs(bank.snr_db - snr_db)))
    if abs(bank.snr_db[s] - snr_db) > 1e-6:
        raise KeyError(f"no quantizer trained at {snr_db} dB")
    out = np.empty_like(np.asarray(llrs, dtype=np.float64))
    for pos in range(bank.k):
        cells = np.searchsorted(bank.thresholds[s, pos], llrs[..., pos],
                                side="right")
        out[..., pos] = bank.levels[s, pos][cells]
    return out


def maxmi_cell_indices(bank: MaxMiBank, llrs: np.ndarray,
                       snr_db: float) -> np.ndarray:
    """Cell indices per position, same shape as llrs, for entropy reporting."""
    s = int(np.argmin(np.abs(bank.snr_db - snr_db)))
    out = np.empty(np.asarray(llrs).shape, dtype=np.int64)
    for pos in range(bank.k):
        out[..., pos] = np.searchsorted(bank.thresholds[s, pos],
                                        llrs[..., pos], side="right")
    return out


def save_maxmi_bank(bank: MaxMiBank, path) -> None:
    np.savez(path, k=bank.k, snr_db=bank.snr_db, num_levels=bank.num_levels,
             thresholds=bank.thresholds, levels=bank.levels, mi_bits=bank.mi_bits)


def load_maxmi_bank(path) -> MaxMiBank:
    with np.load(path, allow_pickle=False) as d:
        return MaxMiBank(k=int(d["k"]), snr_db=d["snr_db"],
                         num_levels=int(d["num_levels"]),
                         thresholds=d["thresholds"], levels=d["levels"],
                         mi_bits=d["mi_bits"])


def train_deep_baseline(cfg: TrainConfig, code: ldpc.LdpcCode | None = None,
                        dataset: trainer.SoftBitDataset | None = None,
                        curve_path=None, log_every: int = 0) -> trainer.TrainedModel:
    """Distortion-only autoencoder on the same data and architecture.

    No quantizer in the training path and no rate term; quantization with
    the shared fixed codebook happens only at inference.
    """
    return trainer.train(cfg, code=code, dataset=dataset,
                         quantization_aware=False, curve_path=curve_path,
                         log_every=log_every)
