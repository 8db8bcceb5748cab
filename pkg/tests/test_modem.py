import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softbitq import modem
from softbitq.config import LLR_MAX

SEED = 101
ORDERS = [1, 2, 4, 6, 8]


class TestConstellation:
    @pytest.mark.parametrize("k", ORDERS)
    def test_unit_average_energy(self, k):
        const = modem.build_constellation(k)
        energy = np.mean(np.abs(const.points) ** 2)
        np.testing.assert_allclose(energy, 1.0, rtol=1e-12)

    @pytest.mark.parametrize("k", ORDERS)
    def test_labels_unique(self, k):
        const = modem.build_constellation(k)
        assert const.labels.shape == (1 << k, k)
        assert len(set(const.label_ints.tolist())) == 1 << k

    @pytest.mark.parametrize("k", [2, 4, 6, 8])
    def test_gray_along_axes(self, k):
        """Nearest neighbors along each axis differ in exactly one bit."""
        const = modem.build_constellation(k)
        pts = const.points
        for i in range(pts.size):
            d = np.abs(pts - pts[i])
            d[i] = np.inf
            step = d.min()
            for j in np.nonzero(np.isclose(d, step))[0]:
                same_row = np.isclose(pts[i].imag, pts[j].imag)
                same_col = np.isclose(pts[i].real, pts[j].real)
                if same_row or same_col:
                    flips = int((const.labels[i] != const.labels[j]).sum())
                    assert flips == 1

    def test_bpsk_polarity(self):
        const = modem.build_constellation(1)
        sym = modem.modulate(np.array([[1], [0]]), const)
        np.testing.assert_allclose(sym, [1.0, -1.0], atol=1e-12)

    def test_modulate_roundtrip(self):
        rng = np.random.default_rng(SEED)
        for k in ORDERS:
            const = modem.build_constellation(k)
            bits = rng.integers(0, 2, (200, k))
            sym = modem.modulate(bits, const)
            # noiseless high-confidence LLRs recover every bit
            llr = modem.compute_llr(sym, np.ones(200), 0.05, const)
            np.testing.assert_array_equal((llr > 0).astype(int), bits)


class TestLlr:
    def test_bpsk_closed_form(self):
        """L = 4 Re(h* y)/sigma_n^2 for BPSK; at y=0.5, h=1, sigma=1 -> 2.0."""
        const = modem.build_constellation(1)
        llr = modem.compute_llr(np.array([0.5 + 0j]), np.array([1.0 + 0j]),
                                1.0, const)
        np.testing.assert_allclose(llr, [[2.0]], rtol=1e-12)

    def test_bpsk_matches_formula_random(self):
        rng = np.random.default_rng(SEED)
        const = modem.build_constellation(1)
        y = rng.normal(size=64) + 1j * rng.normal(size=64)
        h = rng.normal(size=64) + 1j * rng.normal(size=64)
        sigma = 0.8
        llr = modem.compute_llr(y, h, sigma, const)[:, 0]
        expected = np.clip(4 * (np.conj(h) * y).real / sigma**2,
                           -LLR_MAX, LLR_MAX)
        np.testing.assert_allclose(llr, expected, rtol=1e-9, atol=1e-9)

    def test_matches_dense_reference(self):
        """Brute-force log-sum-exp over all points, 16-QAM."""
        rng = np.random.default_rng(SEED + 1)
        k = 4
        const = modem.build_constellation(k)
        n = 128
        y = rng.normal(size=n) + 1j * rng.normal(size=n)
        h = rng.normal(size=n) + 1j * rng.normal(size=n)
        sigma = 0.7

        metric = -np.abs(y[:, None] - h[:, None] * const.points[None, :]) ** 2
        metric /= sigma**2
        ref = np.empty((n, k))
        for b in range(k):
            on = const.labels[:, b] == 1
            m = metric.max(axis=1, keepdims=True)
            num = np.log(np.exp(metric[:, on] - m).sum(axis=1)) + m[:, 0]
            den = np.log(np.exp(metric[:, ~on] - m).sum(axis=1)) + m[:, 0]
            ref[:, b] = num - den
        ref = np.clip(ref, -LLR_MAX, LLR_MAX)
        np.testing.assert_allclose(modem.compute_llr(y, h, sigma, const),
                                   ref, rtol=1e-9, atol=1e-9)

    def test_clamped(self):
        const = modem.build_constellation(2)
        llr = modem.compute_llr(np.array([100 + 100j]), np.array([1.0 + 0j]),
                                0.01, const)
        assert np.all(np.abs(llr) <= LLR_MAX)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1),
           st.sampled_from([2, 4, 6]))
    def test_high_snr_hard_decision(self, seed, k):
        """At 35 dB the LLR signs recover the transmitted bits."""
        rng = np.random.default_rng(seed)
        const = modem.build_constellation(k)
        bits = rng.integers(0, 2, (64, k))
        sym = modem.modulate(bits, const)
        sigma = 10 ** (-35 / 20)
        noise = sigma * (rng.normal(size=64) + 1j * rng.normal(size=64)) / np.sqrt(2)
        llr = modem.compute_llr(sym + noise, np.ones(64), sigma, const)
        np.testing.assert_array_equal((llr > 0).astype(int), bits)


class TestSoftBits:
    def test_roundtrip(self):
        rng = np.random.default_rng(SEED)
        llrs = rng.uniform(-25, 25, 1000)
        lam = modem.to_soft_bits(llrs)
        assert np.all(np.abs(lam) <= 1.0)
        np.testing.assert_allclose(modem.to_llr(lam), llrs, rtol=1e-6, atol=1e-6)

    def test_saturation(self):
        np.testing.assert_allclose(modem.to_llr(np.array([1.0, -1.0])),
                                   [LLR_MAX, -LLR_MAX])
