import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import build_separable_corpus  # noqa: E402

from empath.checkpoint import save_checkpoint
from empath.encoder import EncoderConfig
from empath.model import init_model
from empath.text import MECHANISMS, Vocabulary, save_corpus
from empath.training import TrainConfig, train

TRIO_MAX_LEN = 24


@pytest.fixture(scope="session")
def separable_corpus():
    return build_separable_corpus(32)


@pytest.fixture(scope="session")
def trained_trio(tmp_path_factory, separable_corpus):
    """Three small mechanism models trained to memorize the separable corpus,
    with vocab and checkpoints on disk. Returned as a dict of artifacts."""
    root = tmp_path_factory.mktemp("trio")
    pairs = separable_corpus
    vocab = Vocabulary.build([p.seeker_text for p in pairs] + [p.response_text for p in pairs])
    vocab_path = root / "vocab.txt"
    vocab.save(vocab_path)
    corpus_path = root / "corpus.tsv"
    save_corpus(pairs, corpus_path)

    config = EncoderConfig(
        num_layers=1,
        num_heads=2,
        model_dim=32,
        ff_dim=64,
        max_len=TRIO_MAX_LEN,
        vocab_size=len(vocab),
        dropout_prob=0.0,
    )
    tcfg = TrainConfig(learning_rate=1.5e-3, batch_size=8, epochs=80, seed=12, max_len=TRIO_MAX_LEN)
    models = {}
    ckpt_paths = {}
    for offset, mech in enumerate(MECHANISMS):
        model = init_model(mech, config, seed=12 + offset)
        model, _ = train(pairs, [], model, tcfg, vocab)
        model._vocab_hash = vocab.sha256()
        models[mech] = model
        path = root / f"{mech}.ckpt"
        save_checkpoint(model, path, vocab.sha256(), metadata={"fixture": True})
        ckpt_paths[mech] = str(path)

    return {
        "root": root,
        "pairs": pairs,
        "vocab": vocab,
        "vocab_path": str(vocab_path),
        "corpus_path": str(corpus_path),
        "config": config,
        "models": models,
        "checkpoints": ckpt_paths,
        "max_len": TRIO_MAX_LEN,
    }
