"""Command-line interface.

Subcommands:
    train           fit a model (or max-MI quantizer bank) and save it
    eval-bler       paired BLER/cost simulation for one method
    rd-sweep        train per entropy weight, measure rate vs added BLER
    verify-theorem  latent initialization statistics vs the analytic value
    verify-lemma    relu moment check
    encode-latents  soft-bit file -> compressed latent blob
    decode-latents  compressed latent blob -> reconstructed soft bits

Checkpoints and quantizer banks live under --artifacts, named by a
fingerprint of the full training configuration, so retraining with the
same config reuses the saved model. SOFTBITQ_WORKERS sets the number of
concurrent SNR points in eval-bler (default 1).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

import numpy as np

from . import baselines, entropycoder, harness, trainer
from .config import default_config, load_config

logger = logging.getLogger(__name__)


def _parse_float_list(text: str):
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _parse_int_list(text: str):
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _load_experiment(args):
    cfg = load_config(args.config) if args.config else default_config()
    if getattr(args, "preset", None):
        cfg.train = cfg.train.with_preset(args.preset)
    if getattr(args, "seed", None) is not None:
        cfg.train = dataclasses.replace(cfg.train, seed=args.seed)
        cfg.eval.seed = args.seed
    return cfg


def _workers() -> int:
    return max(1, int(os.environ.get("SOFTBITQ_WORKERS", "1")))


def _require_model(cfg, quantization_aware: bool, artifacts: str):
    from .config import config_fingerprint
    tag = "qa" if quantization_aware else "plain"
    fp = config_fingerprint(cfg.train)
    path = os.path.join(artifacts, f"model_k{cfg.train.k}_{tag}_{fp}.npz")
    if not os.path.exists(path):
        sys.exit(f"no checkpoint at {path}; run `softbitq train` with the "
                 f"same config/preset/seed first")
    return trainer.load_checkpoint(path)


def _cmd_train(args) -> int:
    cfg = _load_experiment(args)
    if args.method == "maxmi":
        bank = harness.bank_or_load(cfg.train.k, list(cfg.eval.snr_db),
                                    cfg.maxmi, cfg.maxmi.seed, args.artifacts)
        logger.info("max-MI bank ready: %d SNRs x %d positions, %d levels",
                    bank.snr_db.size, bank.k, bank.num_levels)
        return 0
    qa = args.method == "proposed"
    model = harness.train_or_load(cfg.train, qa, args.artifacts, log_every=25)
    curve_out = args.out or os.path.join(
        args.artifacts, f"curve_k{cfg.train.k}_{args.method}.csv")
    trainer.write_curve_csv(model.curve, curve_out)
    logger.info("final epoch: %s", model.curve[-1])
    logger.info("training curve written to %s", curve_out)
    return 0


def _cmd_eval_bler(args) -> int:
    cfg = _load_experiment(args)
    channel_kind = args.channel or cfg.eval.channel
    snr_list = _parse_float_list(args.snr_list) if args.snr_list else list(cfg.eval.snr_db)
    seed = cfg.eval.seed
    model = bank = None
    if args.method in ("proposed", "deep_baseline"):
        model = _require_model(cfg, args.method == "proposed", args.artifacts)
    elif args.method == "maxmi":
        bank = harness.bank_or_load(cfg.train.k, snr_list, cfg.maxmi,
                                    cfg.maxmi.seed, args.artifacts)
    rows = harness.run_bler(
        args.method, channel_kind, cfg.train.k, snr_list, cfg.eval, seed=seed,
        model=model, bank=bank, profile=cfg.epa,
        cache_dir=os.path.join(args.artifacts, "cache"), workers=_workers())
    harness.write_bler_csv(rows, args.out)
    qualified = harness.avg_cost(rows)
    logger.info("wrote %d rows to %s; avg cost over qualifying band: %s",
                len(rows), args.out,
                "undefined" if np.isnan(qualified) else f"{qualified:.3f} bits/soft bit")
    return 0


def _cmd_rd_sweep(args) -> int:
    cfg = _load_experiment(args)
    alphas = _parse_float_list(args.alphas)
    snr_list = _parse_float_list(args.snr_list) if args.snr_list else list(cfg.eval.snr_db)
    rows = harness.rd_sweep(
        alphas, cfg.train, cfg.eval, snr_list,
        args.channel or cfg.eval.channel, seed=cfg.eval.seed, profile=cfg.epa,
        artifacts_dir=args.artifacts,
        cache_dir=os.path.join(args.artifacts, "cache"), log_every=50)
    harness.write_rd_csv(rows, args.out)
    logger.info("wrote %d rows to %s", len(rows), args.out)
    return 0


def _cmd_verify_theorem(args) -> int:
    reports = []
    for k in _parse_int_list(args.k_list):
        for depth in _parse_int_list(args.depths):
            rng = np.random.default_rng(np.random.SeedSequence([args.seed, k, depth]))
            r = harness.verify_theorem1(k, depth, args.samples, rng)
            reports.append(r)
            theory = "" if r.sigma_theory is None else f" theory {r.sigma_theory:.5f}"
            print(f"K={k} depth={depth}: sigma {r.sigma_hat:.5f} "
                  f"(se {r.sigma_se:.5f}){theory}  p99.9 {r.p999_hat:.4f}")
    if args.out:
        harness.write_theorem_csv(reports, args.out)
        logger.info("wrote %s", args.out)
    return 0


def _cmd_verify_lemma(args) -> int:
    rng = np.random.default_rng(args.seed)
    mean_hat, var_hat = harness.verify_lemma2(args.sigma, args.samples, rng)
    mean_ref = args.sigma / np.sqrt(2 * np.pi)
    var_ref = args.sigma ** 2 * (0.5 - 1 / (2 * np.pi))
    print(f"relu moments at sigma={args.sigma}: mean {mean_hat:.5f} "
          f"(analytic {mean_ref:.5f}), var {var_hat:.5f} (analytic {var_ref:.5f})")
    return 0


def _cmd_encode_latents(args) -> int:
    model = trainer.load_checkpoint(args.model)
    lam = np.load(args.infile)
    if lam.ndim != 2 or lam.shape[1] != model.cfg.k:
        sys.exit(f"expected a (rows, {model.cfg.k}) soft-bit array, "
                 f"got shape {lam.shape}")
    indices = trainer.encode_soft_bits(model, lam)
    blob = entropycoder.ac_encode(indices.reshape(-1), model.table)
    with open(args.out, "wb") as fh:
        fh.write(blob.to_bytes())
    raw_bits = indices.size * 6
    print(f"{lam.shape[0]} rows -> {blob.payload_bits} coded bits "
          f"({blob.payload_bits / raw_bits:.1%} of the raw 6 bits/latent)")
    return 0


def _cmd_decode_latents(args) -> int:
    model = trainer.load_checkpoint(args.model)
    with open(args.infile, "rb") as fh:
        blob = entropycoder.CodedBlob.from_bytes(fh.read())
    symbols = entropycoder.ac_decode(blob, model.table)
    if symbols.size % 3:
        sys.exit(f"blob holds {symbols.size} symbols, not a multiple of 3")
    lam_hat = trainer.decode_indices(model, symbols.reshape(-1, 3))
    np.save(args.out, lam_hat)
    print(f"wrote {lam_hat.shape[0]} reconstructed rows to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="softbitq", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="experiment YAML")
            sp.add_argument("--preset", choices=["desk", "paper"],
                            help="training-scale preset override")
            sp.add_argument("--seed", type=int, help="override config seeds")
            sp.add_argument("--artifacts", default="artifacts",
                            help="checkpoint/cache directory")

    sp = sub.add_parser("train", help="train a model or quantizer bank")
    common(sp)
    sp.add_argument("--method", default="proposed",
                    choices=["proposed", "deep_baseline", "maxmi"])
    sp.add_argument("--out", help="training-curve CSV path")
    sp.set_defaults(fn=_cmd_train)

    sp = sub.add_parser("eval-bler", help="paired BLER/cost simulation")
    common(sp)
    sp.add_argument("--method", required=True, choices=list(harness.METHODS))
    sp.add_argument("--channel", choices=["epa", "rayleigh"])
    sp.add_argument("--snr-list", help="comma-separated dB values")
    sp.add_argument("--out", required=True, help="output CSV")
    sp.set_defaults(fn=_cmd_eval_bler)

    sp = sub.add_parser("rd-sweep", help="rate vs added BLER across entropy weights")
    common(sp)
    sp.add_argument("--alphas", default="0.01,0.02,0.03")
    sp.add_argument("--channel", choices=["epa", "rayleigh"])
    sp.add_argument("--snr-list", help="comma-separated dB values")
    sp.add_argument("--out", required=True, help="output CSV")
    sp.set_defaults(fn=_cmd_rd_sweep)

    sp = sub.add_parser("verify-theorem", help="latent init statistics")
    sp.add_argument("--k-list", default="2,4,6,8")
    sp.add_argument("--depths", default="1")
    sp.add_argument("--samples", type=int, default=1_000_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="optional CSV")
    sp.set_defaults(fn=_cmd_verify_theorem)

    sp = sub.add_parser("verify-lemma", help="relu moment check")
    sp.add_argument("--sigma", type=float, default=1.0)
    sp.add_argument("--samples", type=int, default=1_000_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(fn=_cmd_verify_lemma)

    sp = sub.add_parser("encode-latents", help="compress soft-bit rows")
    sp.add_argument("--model", required=True, help="checkpoint .npz")
    sp.add_argument("--in", dest="infile", required=True, help="soft-bit .npy")
    sp.add_argument("--out", required=True, help="blob file")
    sp.set_defaults(fn=_cmd_encode_latents)

    sp = sub.add_parser("decode-latents", help="decompress a latent blob")
    sp.add_argument("--model", required=True, help="checkpoint .npz")
    sp.add_argument("--in", dest="infile", required=True, help="blob file")
    sp.add_argument("--out", required=True, help="output .npy")
    sp.set_defaults(fn=_cmd_decode_latents)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(asctime)s %(name)s %(message)s")
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
