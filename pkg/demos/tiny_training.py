"""Train a miniature quantization-aware autoencoder.

Uses a deliberately small dataset and epoch count so it finishes in a
few seconds; the loss falls and the annealing temperature climbs, but
the compression numbers are far from what a full run reaches.
"""

import dataclasses

import numpy as np

from softbitq import ldpc, trainer
from softbitq.config import default_config


def main():
    cfg = dataclasses.replace(default_config(4).train,
                              num_codewords=200, epochs=30, seed=9)
    code = ldpc.build_wlan_code()
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xD0]))
    dataset = trainer.generate_training_set(cfg, code, rng)
    print(f"training on {dataset.soft_bits.shape[0]} soft-bit vectors, "
          f"K={cfg.k}, {cfg.epochs} epochs")

    model = trainer.train(cfg, code, dataset=dataset, log_every=10)
    first, last = model.curve[0], model.curve[-1]
    print(f"loss {first['loss']:.4f} -> {last['loss']:.4f}, "
          f"hard entropy {last['hard_entropy_bits']:.3f} bits/latent, "
          f"tau {first['tau']:.0f} -> {last['tau']:.1f}")

    lam = dataset.soft_bits[:8]
    idx = trainer.encode_soft_bits(model, lam)
    lam_hat = trainer.decode_indices(model, idx)
    err = np.abs(lam - lam_hat).mean()
    print(f"codebook indices for two vectors: {idx[:2].tolist()}")
    print(f"mean |reconstruction error| on training rows: {err:.4f}")


if __name__ == "__main__":
    main()
