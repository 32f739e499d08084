import numpy as np
import pytest

from neurosem.embedder import EMBED_DIM, default_embedder, hash64, token_features
from neurosem.synthdata import SynthConfig


def _check_hash_balance():
    # occupancy of the distinct features of the default lexicon: a fair hash
    # leaves about 64 * exp(-4.3) ~ 1 bucket empty and no bucket overloaded
    emb = default_embedder()
    feats = {f for w in SynthConfig().lexicon() for f in token_features(w)}
    hashes = [hash64(f, emb.seed) for f in feats]
    load = np.bincount([h % EMBED_DIM for h in hashes], minlength=EMBED_DIM)
    positive = np.mean([(h >> 63) == 0 for h in hashes])
    mean_mag = np.abs(emb.token_matrix(SynthConfig().lexicon())).mean()
    if not np.isfinite(mean_mag) or mean_mag == 0:
        raise RuntimeError("hash embedder produced degenerate magnitudes")
    if np.sum(load == 0) > 3 or load.max() > 3 * load.mean():
        raise RuntimeError(f"hash bucket occupancy looks degenerate: {load.tolist()}")
    if not 0.4 <= positive <= 0.6:
        raise RuntimeError(f"hash signs unbalanced ({positive:.2f} positive)")


def pytest_configure(config):
    _check_hash_balance()


@pytest.fixture(scope="session")
def small_synth():
    return SynthConfig(num_stories=3, sentences_per_story=8, channels=12)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def dim():
    return EMBED_DIM
