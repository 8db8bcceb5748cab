"""Mutual-information-maximizing scalar quantization of LLR samples.

Fits the dynamic-programming quantizer at several level counts and
shows the diminishing returns: a handful of cells already captures
almost all of the information carried by the unquantized values.
"""

import numpy as np

from softbitq import baselines


def main():
    rng = np.random.default_rng(5)
    bits, llrs = baselines.collect_llr_samples(2, 8.0, 200_000, rng)

    edges = np.linspace(-30, 30, 2049)
    x = np.clip(llrs[:, 0], -30, 30)
    c0 = np.histogram(x[bits[:, 0] == 0], edges)[0]
    c1 = np.histogram(x[bits[:, 0] == 1], edges)[0]
    full = baselines.histogram_mi_bits(c0, c1)
    print(f"QPSK at 8 dB, first bit position, 200k samples")
    print(f"unquantized histogram MI: {full:.4f} bits")

    for levels in (2, 4, 8, 16):
        q = baselines.train_maxmi(bits[:, 0], llrs[:, 0], levels, snr_db=8.0)
        print(f"  {levels:2d} levels: MI {q.mi_bits:.4f} bits "
              f"({q.mi_bits / full:.1%} of full), "
              f"thresholds {np.round(q.thresholds, 2).tolist()}")

    q = baselines.train_maxmi(bits[:, 0], llrs[:, 0], 4, snr_db=8.0)
    sample = llrs[:6, 0]
    print(f"example LLRs {np.round(sample, 2).tolist()}")
    print(f"  -> reconstruction levels "
          f"{np.round(baselines.apply_scalar(q, sample), 2).tolist()}")


if __name__ == "__main__":
    main()
