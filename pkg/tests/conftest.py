import dataclasses
import os

import numpy as np
import pytest

from softbitq import ldpc, trainer
from softbitq.config import default_config

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

# Heavy artifacts (trained checkpoints, decode caches) persist here across
# runs; tests only retrain when the fingerprint-named file is missing.
ARTIFACTS = os.environ.get("SOFTBITQ_ARTIFACTS",
                           os.path.join(REPO_ROOT, ".artifacts"))


@pytest.fixture(scope="session")
def code():
    return ldpc.build_wlan_code()


@pytest.fixture(scope="session")
def artifacts_dir():
    os.makedirs(ARTIFACTS, exist_ok=True)
    return ARTIFACTS


@pytest.fixture(scope="session")
def cache_dir(artifacts_dir):
    d = os.path.join(artifacts_dir, "cache")
    os.makedirs(d, exist_ok=True)
    return d


@pytest.fixture(scope="session")
def tiny_cfg():
    """Small K=2 training config for fast unit tests."""
    cfg = default_config(2).train
    return dataclasses.replace(cfg, num_codewords=60, epochs=8, seed=4)


@pytest.fixture(scope="session")
def tiny_dataset(tiny_cfg, code):
    rng = np.random.default_rng(np.random.SeedSequence([tiny_cfg.seed, 0xD0]))
    return trainer.generate_training_set(tiny_cfg, code, rng)


@pytest.fixture(scope="session")
def tiny_model(tiny_cfg, code, tiny_dataset):
    return trainer.train(tiny_cfg, code=code, dataset=tiny_dataset)
