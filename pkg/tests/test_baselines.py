import itertools

import numpy as np
import pytest

from softbitq import baselines, modem

SEED = 19


def brute_force_best_mi(counts0, counts1, n_cells):
    """Enumerate every contiguous partition of the histogram bins."""
    n_bins = counts0.size
    best = -1.0
    for cuts in itertools.combinations(range(1, n_bins), n_cells - 1):
        mi = baselines.partition_mi_bits(counts0, counts1, np.array(cuts))
        best = max(best, mi)
    return best


def cumulative_masses(counts0, counts1):
    """Convert per-class histograms to the DP's cumulative-mass form."""
    total = counts0.sum() + counts1.sum()
    c0 = np.concatenate([[0.0], np.cumsum(counts0)]) / total
    c1 = np.concatenate([[0.0], np.cumsum(counts1)]) / total
    return c0, c1


def class_histograms(bits, llrs, bins, lim=30.0):
    edges = np.linspace(-lim, lim, bins + 1)
    x = np.clip(llrs, -lim, lim)
    return (np.histogram(x[bits == 0], edges)[0],
            np.histogram(x[bits == 1], edges)[0])


@pytest.fixture(scope="module")
def qpsk_samples():
    rng = np.random.default_rng(SEED)
    return baselines.collect_llr_samples(2, 6.0, 200_000, rng)


class TestDynamicProgram:
    def test_matches_brute_force(self):
        rng = np.random.default_rng(SEED)
        c0 = rng.integers(1, 50, 10).astype(np.float64)
        c1 = rng.integers(1, 50, 10).astype(np.float64)
        cum0, cum1 = cumulative_masses(c0, c1)
        for levels in (2, 3, 4):
            mi_dp, cuts = baselines._dp_max_mi(cum0, cum1, levels)
            assert len(cuts) == levels - 1
            np.testing.assert_allclose(mi_dp, brute_force_best_mi(c0, c1, levels),
                                       rtol=1e-12)

    def test_monotone_in_levels(self, qpsk_samples):
        bits, llrs = qpsk_samples
        last = -1.0
        for levels in (2, 4, 8, 16, 32):
            q = baselines.train_maxmi(bits[:, 0], llrs[:, 0], levels)
            assert q.mi_bits >= last - 1e-12
            last = q.mi_bits

    def test_mi_bounded_by_entropy(self, qpsk_samples):
        bits, llrs = qpsk_samples
        q = baselines.train_maxmi(bits[:, 0], llrs[:, 0], 8)
        assert 0.0 <= q.mi_bits <= 1.0


class TestScalarQuantizer:
    def test_thresholds_sorted_and_levels_inside_cells(self, qpsk_samples):
        bits, llrs = qpsk_samples
        q = baselines.train_maxmi(bits[:, 0], llrs[:, 0], 8)
        assert (np.diff(q.thresholds) > 0).all()
        edges = np.concatenate([[-np.inf], q.thresholds, [np.inf]])
        for i, level in enumerate(q.levels):
            assert edges[i] <= level <= edges[i + 1]

    def test_apply_maps_to_cell_level(self, qpsk_samples):
        bits, llrs = qpsk_samples
        q = baselines.train_maxmi(bits[:, 0], llrs[:, 0], 4)
        x = np.linspace(-20, 20, 101)
        out = baselines.apply_scalar(q, x)
        cells = np.searchsorted(q.thresholds, x, side="right")
        np.testing.assert_array_equal(out, q.levels[cells])

    def test_quantization_preserves_sign_direction(self, qpsk_samples):
        """Reconstruction levels are increasing, so ordering survives."""
        bits, llrs = qpsk_samples
        q = baselines.train_maxmi(bits[:, 0], llrs[:, 0], 8)
        assert (np.diff(q.levels) > 0).all()

    def test_two_level_bpsk_fixed_gain(self):
        """One-bit quantization of BPSK LLRs at 15 dB on a unit gain
        keeps nearly all the mutual information: the hard decision is
        already close to sufficient at high SNR."""
        rng = np.random.default_rng(SEED + 1)
        const = modem.build_constellation(1)
        bits = rng.integers(0, 2, 400_000)
        sym = modem.modulate(bits[:, None], const)
        sigma = 10 ** (-15 / 20)
        noise = sigma * (rng.normal(size=bits.size)
                         + 1j * rng.normal(size=bits.size)) / np.sqrt(2)
        llrs = modem.compute_llr(sym + noise, np.ones(bits.size), sigma,
                                 const)[:, 0]
        full = baselines.histogram_mi_bits(*class_histograms(bits, llrs, 2048))
        q = baselines.train_maxmi(bits, llrs, 2)
        assert q.mi_bits >= 0.98 * full

    def test_insufficient_samples_rejected(self):
        bits = np.zeros(100, dtype=np.uint8)
        with pytest.raises(ValueError):
            baselines.train_maxmi(bits, np.zeros(100), 4)


class TestHistogramMi:
    def test_independent_variables_near_zero(self):
        rng = np.random.default_rng(SEED)
        bits = rng.integers(0, 2, 100_000)
        noise = rng.normal(size=100_000)
        assert baselines.histogram_mi_bits(*class_histograms(bits, noise, 256)) < 0.01

    def test_deterministic_relation_near_one_bit(self):
        rng = np.random.default_rng(SEED)
        bits = rng.integers(0, 2, 100_000)
        llr = (2.0 * bits - 1.0) * 5.0
        assert baselines.histogram_mi_bits(*class_histograms(bits, llr, 256)) > 0.999


class TestBank:
    def test_build_apply_roundtrip(self, tmp_path):
        from softbitq.config import MaxMiConfig
        mcfg = MaxMiConfig(levels=4, samples=60_000)
        bank = baselines.build_maxmi_bank(2, [3.0, 9.0], mcfg, seed=5)
        assert bank.thresholds.shape == (2, 2, 3)
        assert bank.levels.shape == (2, 2, 4)
        assert bank.bits_per_soft_bit == 2.0

        rng = np.random.default_rng(SEED)
        llrs = rng.normal(0, 4, (10, 7, 2))
        out = baselines.apply_maxmi_bank(bank, llrs, 9.0)
        assert out.shape == llrs.shape
        cells = baselines.maxmi_cell_indices(bank, llrs, 9.0)
        assert cells.min() >= 0 and cells.max() < 4

        path = tmp_path / "bank.npz"
        baselines.save_maxmi_bank(bank, path)
        loaded = baselines.load_maxmi_bank(path)
        np.testing.assert_array_equal(loaded.thresholds, bank.thresholds)
        np.testing.assert_array_equal(loaded.levels, bank.levels)
        np.testing.assert_array_equal(loaded.mi_bits, bank.mi_bits)
        np.testing.assert_array_equal(
            baselines.apply_maxmi_bank(loaded, llrs, 3.0),
            baselines.apply_maxmi_bank(bank, llrs, 3.0))

    def test_unknown_snr_rejected(self):
        from softbitq.config import MaxMiConfig
        bank = baselines.build_maxmi_bank(
            2, [3.0], MaxMiConfig(levels=2, samples=40_000), seed=5)
        rng = np.random.default_rng(SEED)
        with pytest.raises(KeyError):
            baselines.apply_maxmi_bank(bank, rng.normal(size=(1, 1, 2)), 12.0)

    def test_collect_llr_samples_deterministic(self):
        a = baselines.collect_llr_samples(2, 6.0, 5000,
                                          np.random.default_rng(3))
        b = baselines.collect_llr_samples(2, 6.0, 5000,
                                          np.random.default_rng(3))
        np.testing.assert_array_equal(a[1], b[1])
        assert a[0].shape == (5000, 2)
        assert set(np.unique(a[0])) <= {0, 1}
