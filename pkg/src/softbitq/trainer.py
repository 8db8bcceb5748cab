"""Dataset synthesis and quantization-aware autoencoder training.

The training distribution follows the deployment story: random payloads
are LDPC-encoded, modulated, pushed through an i.i.d. Rayleigh channel
at SNRs drawn from a grid, and demapped to exact soft bits. Each
subcarrier contributes one K-dimensional soft-bit row.

Training minimizes weighted reconstruction distortion plus an annealed
soft-entropy rate term. The quantizer sits in the forward pass from the
first step; its gradient is the straight-through identity.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass

import numpy as np

from . import channel, entropycoder, ldpc, modem, neuralnet, quantcore
from .config import TrainConfig
from .quantcore import Codebook

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class SoftBitDataset:
    soft_bits: np.ndarray  # (rows, K) float32 in [-1, 1]
    snr_db: np.ndarray  # (rows,) originating SNR of each row
    k: int


@dataclass
class TrainedModel:
    encoder: neuralnet.Mlp
    decoder: neuralnet.Mlp
    codebook: Codebook
    table: entropycoder.ProbTable
    cfg: TrainConfig
    quantization_aware: bool
    curve: list


def generate_training_set(cfg: TrainConfig, code: ldpc.LdpcCode,
                          rng: np.random.Generator) -> SoftBitDataset:
    """Synthesize soft-bit rows for training.

    Codewords are spread round-robin across the SNR grid. The channel is
    i.i.d. Rayleigh per subcarrier; evaluation channels may differ, the
    model is trained channel-agnostic on purpose.
    """
    const = modem.build_constellation(cfg.k)
    n_sub = code.n // cfg.k
    payloads = rng.integers(0, 2, (cfg.num_codewords, code.k), dtype=np.int8)
    codewords = ldpc.encode(payloads, code)
    snr_grid = np.asarray(cfg.snr_grid_db, dtype=float)
    snr_of_cw = snr_grid[np.arange(cfg.num_codewords) % snr_grid.size]

    rows = np.empty((cfg.num_codewords * n_sub, cfg.k), dtype=np.float32)
    row_snr = np.empty(cfg.num_codewords * n_sub, dtype=np.float32)
    for snr in snr_grid:
        sel = np.nonzero(snr_of_cw == snr)[0]
        if sel.size == 0:
            continue
        symbols = modem.modulate(codewords[sel].reshape(-1, cfg.k), const)
        gains = channel.sample_iid_rayleigh(rng, symbols.shape)
        sigma = channel.snr_db_to_sigma_n(snr)
        y = channel.transmit(symbols, gains, sigma, rng)
        llrs = modem.compute_llr(y, gains, sigma, const)
        lam = modem.to_soft_bits(llrs).astype(np.float32)
        dest = (sel[:, None] * n_sub + np.arange(n_sub)[None, :]).reshape(-1)
        rows[dest] = lam
        row_snr[dest] = snr
    return SoftBitDataset(soft_bits=rows, snr_db=row_snr, k=cfg.k)


def distortion(lam: np.ndarray, lam_hat: np.ndarray, epsilon: float = 1e-3) -> float:
    """Magnitude-weighted reconstruction error.

    D = mean over entries of |lam - lam_hat|^2 / (|lam| + epsilon), so
    low-confidence soft bits (the ones that decide decoding outcomes)
    are weighted up.
    """
    lam = np.asarray(lam, dtype=np.float64)
    err = lam - np.asarray(lam_hat, dtype=np.float64)
    return float(np.mean(err * err / (np.abs(lam) + epsilon)))


def _distortion_and_grad(lam, lam_hat, epsilon):
    # float32 fast path used inside the training loop
    w = 1.0 / (np.abs(lam) + epsilon)
    err = lam_hat - lam
    d = float(np.mean(err * err * w))
    grad = (2.0 / err.size) * (err * w)
    return d, grad


def train(cfg: TrainConfig, code: ldpc.LdpcCode | None = None,
          dataset: SoftBitDataset | None = None, quantization_aware: bool = True,
          curve_path=None, log_every: int = 0) -> TrainedModel:
    """Train the soft-bit autoencoder.

    Args:
        cfg: Training configuration; cfg.seed fixes everything.
        code: LDPC code used to synthesize the dataset (built if None).
        dataset: Pre-generated dataset; generated from cfg if None.
        quantization_aware: True trains through the quantizer with the
            entropy term (the full objective); False trains a plain
            autoencoder on distortion alone, quantized only at inference.
        curve_path: Optional CSV path for per-epoch training metrics.
        log_every: Log an epoch summary every this many epochs (0 = off).

    Returns:
        TrainedModel with the deployment probability table estimated on
        the training latents.
    """
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xD0]))
    if dataset is None:
        if code is None:
            code = ldpc.build_wlan_code()
        dataset = generate_training_set(cfg, code, rng)
    if dataset.k != cfg.k:
        raise ValueError("dataset modulation order does not match config")

    enc = neuralnet.build_encoder(cfg.k, rng)
    dec = neuralnet.build_decoder(cfg.k, rng)
    adam_enc = neuralnet.AdamState(enc.theta.size, lr=cfg.learning_rate)
    adam_dec = neuralnet.AdamState(dec.theta.size, lr=cfg.learning_rate)
    cb = quantcore.build_codebook()
    centers32 = cb.centers.astype(np.float32)

    rows = dataset.soft_bits
    n_rows = rows.shape[0]
    batch = min(cfg.batch_size, n_rows)
    curve = []

    for epoch in range(cfg.epochs):
        tau = cfg.schedule.at_epoch(epoch)
        perm = rng.permutation(n_rows)
        sums = np.zeros(4)  # loss, distortion, soft entropy, hard entropy
        n_batches = 0
        for start in range(0, n_rows - batch + 1, batch):
            x = rows[perm[start:start + batch]]
            z, enc_cache = enc.forward(x)
            if quantization_aware:
                idx = quantcore.quantize(z, cb)
                z_dec = centers32[idx]
            else:
                z_dec = z
            lam_hat, dec_cache = dec.forward(z_dec)

            if not np.isfinite(z).all():
                raise TrainingDiverged(
                    f"non-finite latents at epoch {epoch}; "
                    f"check learning rate and data ranges")
            d_val, d_grad = _distortion_and_grad(x, lam_hat, cfg.epsilon)
            grad_dec, d_zdec = dec.backward(dec_cache, d_grad)

            if quantization_aware:
                counts = np.bincount(idx.reshape(-1), minlength=cb.size)
                p = (counts + 1.0) / (counts.sum() + cb.size)
                h_soft, dh_dz = quantcore.soft_entropy_value_and_grad(
                    z.reshape(-1), cb, tau, p)
                # quantizer backward is the straight-through identity
                d_z = quantcore.ste_backward(d_zdec)
                d_z = d_z + cfg.alpha * dh_dz.reshape(z.shape)
                h_hard_bits = quantcore.hard_entropy(counts / counts.sum())
                loss = d_val + cfg.alpha * h_soft
            else:
                d_z = d_zdec
                h_soft = 0.0
                h_hard_bits = 0.0
                loss = d_val
            grad_enc, _ = enc.backward(enc_cache, d_z)

            neuralnet.adam_step(enc.theta, grad_enc, adam_enc)
            neuralnet.adam_step(dec.theta, grad_dec, adam_dec)
            sums += (loss, d_val, h_soft, h_hard_bits)
            n_batches += 1

        means = sums / max(n_batches, 1)
        if not np.isfinite(means).all():
            raise TrainingDiverged(
                f"non-finite training metrics at epoch {epoch}: loss={means[0]}, "
                f"distortion={means[1]}; check learning rate and data ranges")
        curve.append({
            "epoch": epoch,
            "loss": means[0],
            "distortion": means[1],
            "soft_entropy_bits": means[2] * quantcore.LOG2E,
            "hard_entropy_bits": means[3],
            "tau": tau,
        })
        if log_every and (epoch % log_every == 0 or epoch == cfg.epochs - 1):
            logger.info("epoch %d loss %.5f distortion %.5f H_soft %.3f bits tau %.1f",
                        epoch, means[0], means[1], means[2] * quantcore.LOG2E, tau)

    if curve_path is not None:
        write_curve_csv(curve, curve_path)

    table = _deployment_table(enc, cb, rows)
    return TrainedModel(encoder=enc, decoder=dec, codebook=cb, table=table,
                        cfg=cfg, quantization_aware=quantization_aware, curve=curve)


def _deployment_table(enc: neuralnet.Mlp, cb: Codebook, rows: np.ndarray,
                      chunk: int = 65536) -> entropycoder.ProbTable:
    """Probability table estimated on the training-set latents."""
    counts = np.zeros(cb.size, dtype=np.int64)
    for start in range(0, rows.shape[0], chunk):
        z, _ = enc.forward(rows[start:start + chunk])
        counts += np.bincount(quantcore.quantize(z, cb).reshape(-1), minlength=cb.size)
    p = (counts + 1.0) / (counts.sum() + cb.size)
    return entropycoder.ProbTable(p=p, freq=entropycoder._rescale_to_total(p))


def write_curve_csv(curve: list, path) -> None:
    fields = ["epoch", "loss", "distortion", "soft_entropy_bits",
              "hard_entropy_bits", "tau"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(curve)


def encode_soft_bits(model: TrainedModel, lam: np.ndarray) -> np.ndarray:
    """Soft-bit rows -> quantized latent indices, shape (rows, 3)."""
    z, _ = model.encoder.forward(np.asarray(lam, dtype=np.float32))
    return quantcore.quantize(z, model.codebook)


def decode_indices(model: TrainedModel, indices: np.ndarray) -> np.ndarray:
    """Quantized latent indices -> reconstructed soft-bit rows."""
    z_q = model.codebook.centers[np.asarray(indices)].astype(np.float32)
    lam_hat, _ = model.decoder.forward(z_q)
    return lam_hat


def reconstruct_soft_bits(model: TrainedModel, lam: np.ndarray) -> np.ndarray:
    """Full analysis-quantize-synthesis round trip on soft-bit rows."""
    return decode_indices(model, encode_soft_bits(model, lam))


def save_checkpoint(model: TrainedModel, path) -> None:
    """Serialize a model to .npz (documented in the README)."""
    curve_arr = np.array(
        [[c["epoch"], c["loss"], c["distortion"], c["soft_entropy_bits"],
          c["hard_entropy_bits"], c["tau"]] for c in model.curve],
        dtype=np.float64) if model.curve else np.empty((0, 6))
    cfg_json = json.dumps({
        "k": model.cfg.k, "alpha": model.cfg.alpha, "epochs": model.cfg.epochs,
        "batch_size": model.cfg.batch_size, "learning_rate": model.cfg.learning_rate,
        "snr_grid_db": list(model.cfg.snr_grid_db),
        "num_codewords": model.cfg.num_codewords, "seed": model.cfg.seed,
        "epsilon": model.cfg.epsilon,
        "tau0": model.cfg.schedule.tau0, "tau_growth": model.cfg.schedule.growth,
    })
    np.savez(
        path,
        version=CHECKPOINT_VERSION,
        k=model.cfg.k,
        quantization_aware=model.quantization_aware,
        enc_sizes=np.array(model.encoder.sizes),
        dec_sizes=np.array(model.decoder.sizes),
        enc_theta=model.encoder.theta,
        dec_theta=model.decoder.theta,
        centers=model.codebook.centers,
        table_p=model.table.p,
        table_freq=model.table.freq,
        config_json=cfg_json,
        curve=curve_arr,
    )


def load_checkpoint(path) -> TrainedModel:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        raw = json.loads(str(data["config_json"]))
        from .config import TemperatureSchedule
        cfg = TrainConfig(
            k=raw["k"], alpha=raw["alpha"], epochs=raw["epochs"],
            batch_size=raw["batch_size"], learning_rate=raw["learning_rate"],
            snr_grid_db=tuple(raw["snr_grid_db"]), num_codewords=raw["num_codewords"],
            seed=raw["seed"], epsilon=raw["epsilon"],
            schedule=TemperatureSchedule(tau0=raw["tau0"], growth=raw["tau_growth"]),
        )
        k = int(data["k"])
        enc = neuralnet.build_encoder(k, rng=None)
        dec = neuralnet.build_decoder(k, rng=None)
        if list(data["enc_sizes"]) != enc.sizes or list(data["dec_sizes"]) != dec.sizes:
            raise ValueError("checkpoint layer sizes do not match this build")
        enc.theta[...] = data["enc_theta"]
        dec.theta[...] = data["dec_theta"]
        cb = Codebook(centers=data["centers"])
        table = entropycoder.ProbTable(p=data["table_p"], freq=data["table_freq"])
        curve = [
            {"epoch": int(r[0]), "loss": r[1], "distortion": r[2],
             "soft_entropy_bits": r[3], "hard_entropy_bits": r[4], "tau": r[5]}
            for r in data["curve"]
        ]
        return TrainedModel(encoder=enc, decoder=dec, codebook=cb, table=table,
                            cfg=cfg, quantization_aware=bool(data["quantization_aware"]),
                            curve=curve)
