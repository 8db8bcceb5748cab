"""Experiment configuration: dataclasses plus YAML loading.

Everything the command line touches is collected here so that a single
config file fully determines a run. Field defaults reproduce the
full-scale training protocol; the ``desk`` preset shrinks it to a size
that finishes on a laptop while keeping every qualitative behavior.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

# 3GPP Extended Pedestrian A power-delay profile.
EPA_TAP_DELAYS_NS = (0.0, 30.0, 70.0, 90.0, 110.0, 190.0, 410.0)
EPA_TAP_POWERS_DB = (0.0, -1.0, -2.0, -3.0, -8.0, -17.2, -20.8)

# 15 kHz subcarrier spacing on a 1024-point grid.
DEFAULT_SAMPLE_RATE_HZ = 15.36e6
DEFAULT_FFT_SIZE = 1024

CODEBOOK_SIZE = 64
CODEBOOK_LO = -0.8
CODEBOOK_HI = 0.8

LLR_MAX = 30.0

TAU_0 = 40.0
TAU_GROWTH = 1.001


@dataclass
class EpaProfile:
    """Tapped-delay-line profile evaluated on an OFDM frequency grid."""

    tap_delays: tuple = tuple(d * 1e-9 for d in EPA_TAP_DELAYS_NS)  # seconds
    tap_powers: tuple = EPA_TAP_POWERS_DB  # dB, relative
    sample_rate: float = DEFAULT_SAMPLE_RATE_HZ
    fft_size: int = DEFAULT_FFT_SIZE
    num_subcarriers: int = 108


@dataclass
class TemperatureSchedule:
    tau0: float = TAU_0
    growth: float = TAU_GROWTH
    # "multiplicative" puts tau inside the exponent as -tau*d^2;
    # "divisive" uses the literal -d^2/tau form.
    convention: str = "multiplicative"

    def at_epoch(self, t: int) -> float:
        return self.tau0 * self.growth**t


@dataclass
class TrainConfig:
    k: int = 6
    alpha: float = 0.01
    epochs: int = 2000
    batch_size: int = 1024
    learning_rate: float = 1e-3
    snr_grid_db: tuple = tuple(range(0, 25, 2))
    num_codewords: int = 100_000
    seed: int = 0
    epsilon: float = 1e-3
    schedule: TemperatureSchedule = field(default_factory=TemperatureSchedule)

    def with_preset(self, preset: str) -> "TrainConfig":
        """Return a copy resized to the named preset (desk or paper)."""
        if preset == "paper":
            return dataclasses.replace(self, num_codewords=100_000, epochs=2000)
        if preset == "desk":
            return dataclasses.replace(self, num_codewords=10_000, epochs=300)
        raise ValueError(f"unknown preset {preset!r}")


@dataclass
class EvalConfig:
    k: int = 6
    channel: str = "epa"  # or "rayleigh"
    snr_db: tuple = (10.0, 12.0, 14.0, 16.0, 18.0, 20.0)
    seed: int = 1
    target_block_errors: int = 100
    max_codewords: int = 100_000
    chunk_codewords: int = 2000
    bp_iterations: int = 50


@dataclass
class MaxMiConfig:
    levels: int = 8
    histogram_bins: int = 2048
    samples: int = 1_000_000
    seed: int = 7


@dataclass
class ExperimentConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    epa: EpaProfile = field(default_factory=EpaProfile)
    maxmi: MaxMiConfig = field(default_factory=MaxMiConfig)

    def __post_init__(self):
        if 648 % self.train.k != 0:
            raise ValueError("k must divide the codeword length 648")

    @property
    def num_subcarriers(self) -> int:
        return 648 // self.train.k


def default_config(k: int = 6) -> ExperimentConfig:
    """Baseline configuration for a given modulation order.

    The evaluation SNR grids span the measured EPA waterfall for each
    constellation: block error rate above 0.5 at the lowest point and
    below 0.01 at the highest.
    """
    if k == 8:
        train = TrainConfig(k=8, snr_grid_db=tuple(range(4, 29, 2)))
        ev = EvalConfig(k=8, snr_db=(14.0, 20.0, 26.0, 32.0))
    else:
        train = TrainConfig(k=k)
        ev = EvalConfig(k=k, snr_db=(10.0, 13.0, 16.0, 19.0, 22.0, 25.0, 28.0, 31.0))
    cfg = ExperimentConfig(train=train, eval=ev)
    cfg.epa.num_subcarriers = 648 // k
    return cfg


def _update_dataclass(obj, data: dict):
    for key, value in data.items():
        if not hasattr(obj, key):
            raise KeyError(f"unknown config field {key!r} for {type(obj).__name__}")
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current) and isinstance(value, dict):
            _update_dataclass(current, value)
        elif isinstance(current, tuple) and isinstance(value, list):
            setattr(obj, key, tuple(value))
        else:
            setattr(obj, key, value)
    return obj


def load_config(path) -> ExperimentConfig:
    """Load an ExperimentConfig from a YAML file.

    The file may specify any subset of fields; unspecified ones keep
    their defaults for the configured k. Unknown keys raise.
    """
    raw = yaml.safe_load(Path(path).read_text()) or {}
    k = int(raw.get("train", {}).get("k", 6))
    cfg = default_config(k)
    _update_dataclass(cfg, raw)
    if cfg.epa.num_subcarriers != 648 // cfg.train.k:
        raise ValueError("epa.num_subcarriers inconsistent with train.k")
    return cfg


def _as_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _as_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return [_as_plain(v) for v in obj]
    return obj


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(_as_plain(cfg), sort_keys=False))


def config_fingerprint(cfg) -> str:
    """Stable short hash of a config, used to key cached artifacts."""
    import hashlib

    blob = json.dumps(_as_plain(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
