import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from longfin.labels import encode_document
from longfin.model import ModelConfig, init_params
from longfin.pretrain import pretrain
from longfin.rng import derive, make_rng
from longfin.synthetic import toy_forms
from longfin.tokenizer import build_vocab
from longfin.training import Schedule

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def small_config(vocab_size, **over):
    base = dict(vocab_size=vocab_size, max_len=64, d_text=16, d_layout=8, layers=2, heads=2,
                window=4, global_interval=5, coord_emb_dim=2, ffn_multiplier=2, dropout_rate=0.0)
    base.update(over)
    return ModelConfig(**base)


@pytest.fixture(scope="session")
def toy_corpus():
    docs = toy_forms(32, make_rng(11))
    vocab = build_vocab([w.text for d in docs for w in d.words])
    return docs, vocab


@pytest.fixture(scope="session")
def toy_pretrain_run(toy_corpus):
    """The desk toy pretraining run shared by the learnability and trend checks."""
    docs, vocab = toy_corpus
    cfg = ModelConfig(vocab_size=len(vocab), max_len=64, d_text=64, d_layout=32, layers=2, heads=4,
                      window=16, global_interval=16, coord_emb_dim=8, dropout_rate=0.0)
    params = init_params(cfg, derive(0, 1))
    corpus = [encode_document(d, vocab) for d in docs]
    schedule = Schedule(steps=2000, lr=1e-3, warmup=50, batch_size=8)
    start = time.perf_counter()
    records = pretrain(params, cfg, corpus, schedule, seed=0, vocab_size=len(vocab))
    return cfg, params, records, schedule, time.perf_counter() - start


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# (criterion id, line) pairs; ids sort as "1", "2", ..., "5a", "5b", ...
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        key = lambda item: (int(item[0].rstrip("ab")), item[0])  # noqa: E731
        for _, line in sorted(ACCEPTANCE_LINES, key=key):
            terminalreporter.write_line(line)
