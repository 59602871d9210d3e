import numpy as np
import pytest
import torch

from wlac.corpus import CORE_CONTEXT_TYPES, build_vocabulary, simulate_dataset
from wlac.model import BaselineWpm, EnergyModel, ModelConfig
from wlac.synthetic import build_language, generate_pairs

UNIFORM_MIX = {t: 0.25 for t in CORE_CONTEXT_TYPES}


@pytest.fixture(scope="session")
def lang():
    return build_language()


@pytest.fixture(scope="session")
def small_pairs(lang):
    return generate_pairs(lang, 300, seed=51)


@pytest.fixture(scope="session")
def small_vocabs(small_pairs):
    src = build_vocabulary(small_pairs, "source", max_size=500)
    tgt = build_vocabulary(small_pairs, "target", max_size=500)
    return src, tgt


@pytest.fixture(scope="session")
def small_dataset(small_pairs, small_vocabs):
    _, tgt = small_vocabs
    return simulate_dataset(small_pairs, UNIFORM_MIX, seed=7, vocab=tgt)


@pytest.fixture(scope="session")
def tiny_models(small_vocabs):
    """Random-parameter models over the small vocabularies, for contract tests."""
    src, tgt = small_vocabs
    torch.manual_seed(1234)
    config = ModelConfig(
        src_vocab_size=len(src),
        tgt_vocab_size=len(tgt),
        d_model=32,
        d_ffn=64,
        n_heads=4,
        n_src_layers=1,
        n_tgt_layers=1,
        dropout=0.1,
        max_len=64,
    )
    baseline = BaselineWpm(config).eval()
    energy = EnergyModel(config).eval()
    return baseline, energy


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
