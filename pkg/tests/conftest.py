import numpy as np
import pytest

from syntf.corpus import Utterance, build_label_spaces, build_vocab, encode_batch, load_word_vectors
from syntf.model import JointModel, ModelConfig
from syntf.synthetic import ToySpec, generate_utterances

# "list flights arriving in Toronto on March first", "flights" as root
FIG4_TOKENS = "list flights arriving in Toronto on March first".split()
FIG4_HEADS = [2, 0, 2, 5, 3, 7, 3, 7]


@pytest.fixture
def two_utts():
    return [
        Utterance("show flights to boston".split(), "O O O B-city".split(), "flight",
                  "VERB NOUN ADP PROPN".split(), [0, 1, 4, 2]),
        Utterance("fare to denver".split(), "O O B-city".split(), "airfare#flight",
                  "NOUN ADP PROPN".split(), [0, 3, 1]),
    ]


def tiny_model(utts, dtype="float64", seed=0, **overrides):
    cfg = ModelConfig(d_model=16, heads=4, d_ff=32, d_biaffine=8, word_dim=6, char_dim=4,
                      dropout=0.0, dtype=dtype)
    for k, v in overrides.items():
        setattr(cfg, k, v)
    vocab = build_vocab(utts)
    spaces = build_label_spaces(utts)
    wv = load_word_vectors(None, vocab, cfg.word_dim, seed, np.dtype(dtype))
    model = JointModel(cfg, vocab, spaces, wv, seed)
    return model, encode_batch(utts, vocab, spaces)


@pytest.fixture
def toy_train():
    return generate_utterances(ToySpec(count=32, seed=0))
