"""End-to-end evaluation: initialization statistics of the latent map,
paired block-error-rate simulation over fading channels with storage-cost
accounting, and the rate-distortion sweep over the entropy weight.

All experiments emit versioned CSVs. BLER rows always carry both the
unquantized (float) outcome and the method outcome measured on the same
payloads, channel gains and noise, so method-vs-float deltas are paired
comparisons, not differences of independent runs.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
import os
from dataclasses import dataclass

import numpy as np

from . import baselines, channel, entropycoder, ldpc, modem, neuralnet, quantcore, trainer
from .config import (EpaProfile, EvalConfig, MaxMiConfig, TrainConfig,
                     config_fingerprint)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
METHODS = ("float", "proposed", "deep_baseline", "maxmi")

BLER_FIELDS = ["schema_version", "method", "channel", "k", "snr_db",
               "bler_float", "bler_method", "avg_bits_per_soft_bit",
               "hard_entropy_bits", "codewords_simulated", "seed"]
RD_FIELDS = ["schema_version", "alpha", "k", "snr_db", "avg_bits_per_soft_bit",
             "bler_float", "bler_method", "additive_bler",
             "codewords_simulated", "seed"]
THEOREM_FIELDS = ["schema_version", "k", "depth", "samples", "sigma_hat",
                  "sigma_se", "sigma_theory", "p999_hat", "p999_se"]


# ---------------------------------------------------------------- theorem

@dataclass
class TheoremReport:
    k: int
    depth: int
    samples: int
    sigma_hat: float
    sigma_se: float
    p999_hat: float
    p999_se: float
    sigma_theory: float | None  # analytic value, depth 1 only


def latent_sigma_theory(k: int) -> float:
    """Analytic latent std at depth 1: sqrt(8K / (5(4K+1)))."""
    return math.sqrt(8.0 * k / (5.0 * (4.0 * k + 1.0)))


def verify_theorem1(k: int, depth: int, samples: int,
                    rng: np.random.Generator, chunk_inputs: int = 64,
                    percentile_nets: int = 32) -> TheoremReport:
    """Empirical latent std and 99.9th |z| percentile at initialization.

    The analytic setting is bias-free with a linear scalar output and
    Rademacher inputs. The two statistics average over the weight
    ensemble differently, so each gets its own sampling plan:

    - sigma_hat is the std over the ensemble. A single weight draw has
      O(1/sqrt(K)) conditional-variance spread that a percent-level
      tolerance cannot absorb, so weights are redrawn every
      `chunk_inputs` inputs and variances averaged across draws.
    - p999_hat is the typical single network's 99.9th percentile of
      |z| over inputs (the quantity that decides whether an
      initialized encoder stays inside the codebook range). It is the
      mean of per-network percentiles over `percentile_nets` draws;
      pooling |z| across draws would instead measure the tail of a
      scale mixture, which is a different and much larger number.
    """
    n_chunks = max(1, samples // chunk_inputs)
    chunk_var = np.empty(n_chunks)
    for c in range(n_chunks):
        net = neuralnet.build_variance_probe(k, depth, rng)
        x = rng.integers(0, 2, (chunk_inputs, k)).astype(np.float64) * 2.0 - 1.0
        z = net.forward(x)[0][:, 0]
        chunk_var[c] = np.mean(z * z)
    var_hat = float(chunk_var.mean())
    sigma_hat = math.sqrt(var_hat)
    var_se = float(chunk_var.std(ddof=1)) / math.sqrt(n_chunks)
    sigma_se = var_se / (2.0 * sigma_hat)

    inputs_per_net = max(1000, samples // percentile_nets)
    p999_per_net = np.empty(percentile_nets)
    for w in range(percentile_nets):
        net = neuralnet.build_variance_probe(k, depth, rng)
        x = rng.integers(0, 2, (inputs_per_net, k)).astype(np.float64) * 2.0 - 1.0
        z = net.forward(x)[0][:, 0]
        p999_per_net[w] = np.quantile(np.abs(z), 0.999)
    p999 = float(p999_per_net.mean())
    p999_se = float(p999_per_net.std(ddof=1)) / math.sqrt(percentile_nets)
    return TheoremReport(
        k=k, depth=depth, samples=n_chunks * chunk_inputs,
        sigma_hat=sigma_hat, sigma_se=sigma_se, p999_hat=p999, p999_se=p999_se,
        sigma_theory=latent_sigma_theory(k) if depth == 1 else None)


def verify_lemma2(sigma: float, samples: int, rng: np.random.Generator):
    """Monte-Carlo mean and variance of relu of a centered Gaussian.

    Analytic values at sigma: mean sigma/sqrt(2 pi), variance
    sigma^2 (1/2 - 1/(2 pi)).
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    x = np.maximum(rng.normal(0.0, sigma, samples), 0.0)
    return float(x.mean()), float(x.var())


def write_theorem_csv(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=THEOREM_FIELDS)
        w.writeheader()
        for r in reports:
            w.writerow({
                "schema_version": SCHEMA_VERSION, "k": r.k, "depth": r.depth,
              "samples": r.samples, "sigma_hat": f"{r.sigma_hat:.6f}",
                "sigma_se": f"{r.sigma_se:.6g}",
                "sigma_theory": "" if r.sigma_theory is None else f"{r.sigma_theory:.6f}",
                "p999_hat": f"{r.p999_hat:.6f}", "p999_se": f"{r.p999_se:.6g}"})


# ---------------------------------------------------------------- BLER

@dataclass
class ExperimentRow:
    method: str
    channel: str
    k: int
    snr_db: float
    bler_float: float
    bler_method: float
    avg_bits_per_soft_bit: float  # nan for the float method
    hard_entropy_bits: float  # nan for the float method
    codewords_simulated: int
    seed: int


def _snr_seed_key(snr_db: float) -> int:
    # stable across different --snr-list subsets; offset keeps it positive
    return int(round(snr_db * 1000.0)) + 1_000_000


def _decode_ok(llrs_decoder, payloads, code, max_iter):
    bits, _, _ = ldpc.decode_bp_batch(llrs_decoder.astype(np.float32), code, max_iter)
    return np.all(bits[:, :code.k] == payloads, axis=1)


def _float_ok_cached(cache_dir, channel_kind, k, snr_db, seed, chunk_idx, n,
                     max_iter, compute):
    if cache_dir is None:
        return compute()
    name = (f"float_{channel_kind}_k{k}_s{_snr_seed_key(snr_db)}"
            f"_seed{seed}_c{chunk_idx}_n{n}_i{max_iter}.npy")
    path = os.path.join(cache_dir, name)
    if os.path.exists(path):
        return np.load(path)
    ok = compute()
    os.makedirs(cache_dir, exist_ok=True)
    # np.save appends .npy when missing, so the temp name must carry it
    tmp = path + f".{os.getpid()}.tmp.npy"
    np.save(tmp, ok)
    os.replace(tmp, path)
    return ok


def _simulate_snr(method: str, channel_kind: str, k: int, snr_db: float,
                  ecfg: EvalConfig, code, const, *, seed: int, model=None,
                  bank=None, profile: EpaProfile | None = None,
                  cache_dir=None) -> ExperimentRow:
    n_sub = code.n // k
    sigma = channel.snr_db_to_sigma_n(snr_db)
    snr_key = _snr_seed_key(snr_db)
    centers32 = model.codebook.centers.astype(np.float32) if model is not None else None

    cw_done = 0
    err_float = 0
    err_method = 0
    total_bits = 0.0
    sym_counts = np.zeros(64 if model is not None else (bank.num_levels if bank else 1),
                          dtype=np.int64)
    chunk_idx = 0
    while cw_done < ecfg.max_codewords and err_method < ecfg.target_block_errors:
        n = min(ecfg.chunk_codewords, ecfg.max_codewords - cw_done)
        rng = np.random.default_rng(np.random.SeedSequence([seed, snr_key, chunk_idx]))
        payloads = rng.integers(0, 2, (n, code.k), dtype=np.int8)
        cws = ldpc.encode(payloads, code)
        symbols = modem.modulate(cws.reshape(-1, k), const).reshape(n, n_sub)
        if channel_kind == "epa":
            gains = channel.sample_epa_wideband(profile, rng, size=n)
        elif channel_kind == "rayleigh":
            gains = channel.sample_iid_rayleigh(rng, (n, n_sub))
        else:
            raise ValueError(f"unknown channel kind {channel_kind!r}")
        y = channel.transmit(symbols, gains, sigma, rng)
        llrs = modem.compute_llr(y.reshape(-1), gains.reshape(-1), sigma, const)

        # demapper convention: positive favors bit 1; decoder wants the opposite
        ok_f = _float_ok_cached(
            cache_dir, channel_kind, k, snr_db, seed, chunk_idx, n,
            ecfg.bp_iterations,
            lambda: _decode_ok(-llrs.reshape(n, code.n), payloads, code,
                               ecfg.bp_iterations))

        if method == "float":
            ok_m = ok_f
        elif method in ("proposed", "deep_baseline"):
            lam = modem.to_soft_bits(llrs).astype(np.float32)
            z, _ = model.encoder.forward(lam)
            idx = quantcore.quantize(z, model.codebook)
            lam_hat, _ = model.decoder.forward(centers32[idx])
            llr_hat = modem.to_llr(lam_hat.astype(np.float64))
            ok_m = _decode_ok(-llr_hat.reshape(n, code.n), payloads, code,
                              ecfg.bp_iterations)
            per_cw = idx.reshape(n, n_sub * 3)
            for i in range(n):
                blob = entropycoder.ac_encode(per_cw[i], model.table)
                total_bits += blob.payload_bits
            sym_counts += np.bincount(idx.reshape(-1), minlength=64)
        elif method == "maxmi":
            llr_hat = baselines.apply_maxmi_bank(bank, llrs.reshape(n, n_sub, k),
                                                 snr_db)
            ok_m = _decode_ok(-llr_hat.reshape(n, code.n), payloads, code,
                              ecfg.bp_iterations)
            cells = baselines.maxmi_cell_indices(bank, llrs.reshape(n, n_sub, k),
                                                 snr_db)
            sym_counts += np.bincount(cells.reshape(-1), minlength=bank.num_levels)
        else:
            raise ValueError(f"unknown method {method!r}")

        err_float += int(n - ok_f.sum())
        err_method += int(n - ok_m.sum())
        cw_done += n
        chunk_idx += 1

    if method == "float":
        avg_bits = float("nan")
        hard_h = float("nan")
    elif method == "maxmi":
        avg_bits = bank.bits_per_soft_bit
        hard_h = quantcore.hard_entropy(sym_counts / sym_counts.sum())
    else:
        avg_bits = total_bits / (cw_done * n_sub * k)
        hard_h = quantcore.hard_entropy(sym_counts / sym_counts.sum())
    return ExperimentRow(
        method=method, channel=channel_kind, k=k, snr_db=float(snr_db),
        bler_float=err_float / cw_done, bler_method=err_method / cw_done,
        avg_bits_per_soft_bit=avg_bits, hard_entropy_bits=hard_h,
        codewords_simulated=cw_done, seed=seed)


def run_bler(method: str, channel_kind: str, k: int, snr_list, ecfg: EvalConfig,
             *, seed: int, model: trainer.TrainedModel | None = None,
             bank: baselines.MaxMiBank | None = None,
             profile: EpaProfile | None = None, cache_dir=None,
             workers: int = 1) -> list:
    """Paired BLER/cost measurement for one method over an SNR list.

    Every codeword is simulated end to end: payload, LDPC encode, QAM,
    channel, exact LLR, the method's quantize/reconstruct if any, BP
    decode. A block error is any payload-bit mismatch. Randomness is
    keyed by (seed, SNR, chunk) only, never by method, so rows from
    different methods at the same seed are directly comparable.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    if method in ("proposed", "deep_baseline") and model is None:
        raise ValueError(f"method {method!r} needs a trained model checkpoint")
    if method == "maxmi" and bank is None:
        raise ValueError("method 'maxmi' needs a trained quantizer bank")
    if channel_kind == "epa" and profile is None:
        raise ValueError("EPA evaluation needs a channel profile")
    code = ldpc.build_wlan_code()
    const = modem.build_constellation(k)

    def one(snr):
        row = _simulate_snr(method, channel_kind, k, float(snr), ecfg, code,
                            const, seed=seed, model=model, bank=bank,
                            profile=profile, cache_dir=cache_dir)
        logger.info("%s %s K=%d %.1f dB: bler_float %.4g bler_method %.4g "
                    "bits/softbit %.3f (%d cw)", method, channel_kind, k,
                    row.snr_db, row.bler_float, row.bler_method,
                    row.avg_bits_per_soft_bit, row.codewords_simulated)
        return row

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, snr_list))
    return [one(s) for s in snr_list]


def avg_cost(rows) -> float:
    """Mean bits/soft-bit over rows with 0.001 < bler_method < 1.

    Returns nan when no row qualifies.
    """
    if not rows:
        raise ValueError("rows must be nonempty")
    costs = [r.avg_bits_per_soft_bit for r in rows
             if 0.001 < r.bler_method < 1.0]
    return float(np.mean(costs)) if costs else float("nan")


def write_bler_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BLER_FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow({
                "schema_version": SCHEMA_VERSION, "method": r.method,
                "channel": r.channel, "k": r.k, "snr_db": r.snr_db,
                "bler_float": f"{r.bler_float:.8g}",
                "bler_method": f"{r.bler_method:.8g}",
                "avg_bits_per_soft_bit": f"{r.avg_bits_per_soft_bit:.6f}",
                "hard_entropy_bits": f"{r.hard_entropy_bits:.6f}",
                "codewords_simulated": r.codewords_simulated, "seed": r.seed})


def read_bler_csv(path) -> list:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            if int(rec["schema_version"]) != SCHEMA_VERSION:
                raise ValueError(f"unsupported schema version {rec['schema_version']}")
            rows.append(ExperimentRow(
                method=rec["method"], channel=rec["channel"], k=int(rec["k"]),
                snr_db=float(rec["snr_db"]), bler_float=float(rec["bler_float"]),
                bler_method=float(rec["bler_method"]),
                avg_bits_per_soft_bit=float(rec["avg_bits_per_soft_bit"]),
                hard_entropy_bits=float(rec["hard_entropy_bits"]),
                codewords_simulated=int(rec["codewords_simulated"]),
                seed=int(rec["seed"])))
    return rows


def snr_at_bler(rows, target: float) -> float:
    """SNR where the method BLER curve crosses `target`, by log-linear
    interpolation between the bracketing grid points. nan if no crossing."""
    pts = sorted(((r.snr_db, r.bler_method) for r in rows), key=lambda t: t[0])
    for (s0, b0), (s1, b1) in zip(pts[:-1], pts[1:]):
        if (b0 - target) * (b1 - target) <= 0 and b0 != b1:
            lb0, lb1, lt = math.log(max(b0, 1e-12)), math.log(max(b1, 1e-12)), math.log(target)
            return s0 + (s1 - s0) * (lt - lb0) / (lb1 - lb0)
    return float("nan")


# ---------------------------------------------------------------- training artifacts

def train_or_load(cfg: TrainConfig, quantization_aware: bool, artifacts_dir,
                  code=None, dataset=None, log_every: int = 0) -> trainer.TrainedModel:
    """Train a model or load the checkpoint a previous identical run saved.

    The checkpoint name embeds a fingerprint of every config field, so a
    stale artifact can never be picked up for a different configuration.
    """
    tag = "qa" if quantization_aware else "plain"
    fp = config_fingerprint(cfg)
    path = os.path.join(artifacts_dir, f"model_k{cfg.k}_{tag}_{fp}.npz")
    if os.path.exists(path):
        logger.info("loading cached model %s", path)
        return trainer.load_checkpoint(path)
    os.makedirs(artifacts_dir, exist_ok=True)
    model = trainer.train(cfg, code=code, dataset=dataset,
                          quantization_aware=quantization_aware,
                          log_every=log_every)
    trainer.save_checkpoint(model, path)
    return model


def bank_or_load(k: int, snr_list, mcfg: MaxMiConfig, seed: int,
                 artifacts_dir) -> baselines.MaxMiBank:
    key = config_fingerprint(mcfg) + f"_{_snr_list_key(snr_list)}_{seed}"
    path = os.path.join(artifacts_dir, f"maxmi_k{k}_{key}.npz")
    if os.path.exists(path):
        return baselines.load_maxmi_bank(path)
    os.makedirs(artifacts_dir, exist_ok=True)
    bank = baselines.build_maxmi_bank(k, snr_list, mcfg, seed)
    baselines.save_maxmi_bank(bank, path)
    return bank


def _snr_list_key(snr_list) -> str:
    import hashlib
    raw = ",".join(f"{s:.3f}" for s in sorted(float(s) for s in snr_list))
    return hashlib.sha256(raw.encode()).hexdigest()[:10]


# ---------------------------------------------------------------- RD sweep

def rd_sweep(alphas, train_cfg: TrainConfig, ecfg: EvalConfig, snr_list,
             channel_kind: str, *, seed: int, profile: EpaProfile | None = None,
             artifacts_dir="artifacts", cache_dir=None, log_every: int = 0) -> list:
    """Train one model per entropy weight and measure (rate, added BLER).

    All alphas share the seed, so dataset, initialization and evaluation
    randomness are identical across the sweep; the only variable is the
    rate-distortion weight.
    """
    if not alphas:
        raise ValueError("alphas must be nonempty")
    code = ldpc.build_wlan_code()
    rng = np.random.default_rng(np.random.SeedSequence([train_cfg.seed, 0xD0]))
    dataset = trainer.generate_training_set(train_cfg, code, rng)
    out = []
    for alpha in alphas:
        cfg = dataclasses.replace(train_cfg, alpha=float(alpha))
        model = train_or_load(cfg, True, artifacts_dir, code=code,
                              dataset=dataset, log_every=log_every)
        rows = run_bler("proposed", channel_kind, cfg.k, snr_list, ecfg,
                        seed=seed, model=model, profile=profile,
                        cache_dir=cache_dir)
        for r in rows:
            out.append({
                "alpha": float(alpha), "k": cfg.k, "snr_db": r.snr_db,
                "avg_bits_per_soft_bit": r.avg_bits_per_soft_bit,
                "bler_float": r.bler_float, "bler_method": r.bler_method,
                "additive_bler": r.bler_method - r.bler_float,
                "codewords_simulated": r.codewords_simulated, "seed": r.seed})
    return out


def write_rd_csv(rd_rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=RD_FIELDS)
        w.writeheader()
        for r in rd_rows:
            rec = dict(r)
            rec["schema_version"] = SCHEMA_VERSION
            rec["avg_bits_per_soft_bit"] = f"{rec['avg_bits_per_soft_bit']:.6f}"
            for key in ("bler_float", "bler_method", "additive_bler"):
                rec[key] = f"{rec[key]:.8g}"
            w.writerow(rec)
