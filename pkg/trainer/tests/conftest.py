"""Session fixtures: small corpora plus one short real training run.

The corpora are written by the installed roomgeo package, which is the
reference producer of the shard format this package consumes.  Tests
may also use roomgeo as a reference reader to cross-check values; the
library code itself never imports it.
"""

import pytest
import roomgeo

from roomgeo_trainer import CRNNConfig, train

GRID = roomgeo.RadonGrid(rho_max=4.0, fs=16000, c=343.0, theta_step=2.0)
PARAMS = roomgeo.SimParams(fs=16000, max_order=3, lpf_cutoff=6000.0,
                           duration_samples=256)
COUNTS = {"train": 20, "val": 5, "test": 4}

# keeps test-time training runs in the seconds range
COMPACT = dict(conv_channels=(8, 16, 32), gru_hidden=64, fc_hidden=128)


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    roomgeo.generate(COUNTS, root, base_seed=42, params=PARAMS, grid=GRID)
    return root


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("tiny")
    roomgeo.generate({"train": 8}, root, base_seed=7,
                     params=PARAMS, grid=GRID)
    return root


@pytest.fixture(scope="session")
def trained(corpus, tmp_path_factory):
    """One short training run shared by the checkpoint-consuming tests."""
    out = tmp_path_factory.mktemp("run")
    cfg = CRNNConfig(learning_rate=3e-3, max_epochs=8, patience=8, **COMPACT)
    log = train(corpus, out, config=cfg, seed=1)
    return out, cfg, log
