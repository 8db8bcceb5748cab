"""Fading channel models: i.i.d. Rayleigh and a wideband tapped delay line.

The wideband model draws one complex gain per tap from the configured
power-delay profile and evaluates the frequency response on the OFDM
subcarrier grid, so nearby subcarriers are correlated the way a real
multipath channel correlates them. Profiles are normalized so that the
average per-subcarrier power is exactly 1, which keeps the SNR
definition snr = 1 / sigma_n^2 valid for both channel families.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import EpaProfile


@dataclass
class ChannelRealization:
    gains: np.ndarray  # complex, one per subcarrier
    sigma_n: float


def snr_db_to_sigma_n(snr_db: float) -> float:
    """Noise standard deviation for unit symbol energy: sigma_n^2 = 10^(-snr/10)."""
    return float(10.0 ** (-snr_db / 20.0))


def sample_iid_rayleigh(rng: np.random.Generator, size) -> np.ndarray:
    """Independent CN(0, 1) gains of the requested shape."""
    re = rng.standard_normal(size)
    im = rng.standard_normal(size)
    return (re + 1j * im) / np.sqrt(2.0)


def tap_linear_powers(profile: EpaProfile) -> np.ndarray:
    """Per-tap linear powers, normalized to sum to one."""
    p = 10.0 ** (np.asarray(profile.tap_powers) / 10.0)
    return p / p.sum()


def subcarrier_frequencies(profile: EpaProfile) -> np.ndarray:
    """Frequencies (Hz) of the centered contiguous block of subcarriers."""
    spacing = profile.sample_rate / profile.fft_size
    n = profile.num_subcarriers
    offsets = np.arange(n) - n // 2
    return offsets * spacing


def frequency_response(
    tap_gains: np.ndarray, tap_delays: np.ndarray, freqs: np.ndarray
) -> np.ndarray:
    """Frequency response of a tapped delay line by direct evaluation.

    H(f) = sum_l g_l * exp(-2j pi f d_l). tap_gains may be batched with
    shape (..., L); the result then has shape (..., len(freqs)).
    """
    tap_delays = np.asarray(tap_delays, dtype=float)
    phase = np.exp(-2j * np.pi * np.outer(tap_delays, np.asarray(freqs, dtype=float)))
    return np.asarray(tap_gains) @ phase


def sample_epa_wideband(profile: EpaProfile, rng: np.random.Generator, size=None) -> np.ndarray:
    """Draw wideband channel gains across the subcarrier block.

    Each tap gain is CN(0, p_l) with the normalized profile powers, so
    E|H(f)|^2 = 1 at every subcarrier.

    Args:
        profile: Delay/power profile and grid geometry.
        rng: Source of randomness.
        size: None for a single draw of shape (num_subcarriers,), or an
            int n for shape (n, num_subcarriers).

    Returns:
        Complex gain array.
    """
    powers = tap_linear_powers(profile)
    shape = (len(powers),) if size is None else (size, len(powers))
    g = sample_iid_rayleigh(rng, shape) * np.sqrt(powers)
    return frequency_response(g, np.asarray(profile.tap_delays), subcarrier_frequencies(profile))


def transmit(x: np.ndarray, gains: np.ndarray, sigma_n: float, rng: np.random.Generator) -> np.ndarray:
    """y = h * x + n with n ~ CN(0, sigma_n^2), elementwise over the grid."""
    x = np.asarray(x)
    noise = sigma_n * sample_iid_rayleigh(rng, x.shape)
    return np.asarray(gains) * x + noise
