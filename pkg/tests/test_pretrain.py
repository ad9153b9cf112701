import math

import numpy as np
import pytest

from longfin import autograd as ag
from longfin.autograd import Tensor
from longfin.labels import IGNORE, TokenizedExample, encode_document
from longfin.model import init_params
from longfin.pretrain import mvlm_loss, mvlm_mask, pretrain
from longfin.tokenizer import CLS_ID, MASK_ID, N_SPECIAL, SEP_ID
from longfin.training import Schedule
from conftest import small_config


def _example(n, vocab_size=50, seed=0):
    rng = np.random.default_rng(seed)
    ids = np.concatenate([[CLS_ID], rng.integers(N_SPECIAL, vocab_size, n - 2), [SEP_ID]])
    boxes = rng.integers(0, 1000, (n, 4))
    return TokenizedExample(ids, boxes, np.arange(n), np.zeros(n))


def test_zero_select_changes_nothing(rng):
    ex = _example(30)
    b = mvlm_mask(ex, rng, 50, select=0.0)
    assert np.array_equal(b.token_ids, ex.token_ids) and np.all(b.mlm_targets == IGNORE)


def test_full_select_full_mask(rng):
    ex = _example(30)
    b = mvlm_mask(ex, rng, 50, select=1.0, mask=1.0, random=0.0, keep=0.0)
    assert np.all(b.token_ids[1:-1] == MASK_ID)
    assert b.token_ids[0] == CLS_ID and b.token_ids[-1] == SEP_ID
    assert np.array_equal(b.mlm_targets[1:-1], ex.token_ids[1:-1])
    assert b.mlm_targets[0] == IGNORE == b.mlm_targets[-1]


def test_masking_statistics():
    ex = _example(100_002, vocab_size=500, seed=3)
    b = mvlm_mask(ex, np.random.default_rng(9), 500)
    sel = b.mlm_targets != IGNORE
    eligible = ex.token_ids >= N_SPECIAL
    assert abs(sel.sum() / eligible.sum() - 0.15) < 0.01
    masked = (b.token_ids == MASK_ID) & sel
    same = (b.token_ids == ex.token_ids) & sel
    random = sel & ~masked & ~same
    k = sel.sum()
    # a random draw may hit the original id; those count as unchanged here
    assert abs(masked.sum() / k - 0.8) < 0.02
    assert abs(random.sum() / k - 0.1) < 0.02 and abs(same.sum() / k - 0.1) < 0.02
    assert np.array_equal(b.token_bboxes, ex.token_bboxes)
    assert np.all(b.token_ids[random] >= N_SPECIAL)


@pytest.mark.parametrize("seed", range(5))
def test_masking_invariants(seed):
    ex = _example(200, seed=seed)
    b = mvlm_mask(ex, np.random.default_rng(seed), 50)
    changed = b.token_ids != ex.token_ids
    assert not np.any(changed & (b.mlm_targets == IGNORE))
    special = ex.token_ids < N_SPECIAL
    assert np.array_equal(b.token_ids[special], ex.token_ids[special]) and np.all(b.mlm_targets[special] == IGNORE)
    sel = b.mlm_targets != IGNORE
    assert np.array_equal(b.mlm_targets[sel], ex.token_ids[sel])
    assert np.array_equal(b.token_bboxes, ex.token_bboxes)


@pytest.mark.parametrize("rates", [dict(select=1.5), dict(select=-0.1), dict(mask=0.5, random=0.1, keep=0.1),
                                   dict(mask=1.2, random=-0.1, keep=-0.1)])
def test_rate_validation(rng, rates):
    with pytest.raises(ValueError):
        mvlm_mask(_example(10), rng, 50, **rates)


def test_mask_is_seeded():
    ex = _example(100)
    a = mvlm_mask(ex, np.random.default_rng(4), 50)
    b = mvlm_mask(ex, np.random.default_rng(4), 50)
    assert np.array_equal(a.token_ids, b.token_ids) and np.array_equal(a.mlm_targets, b.mlm_targets)


def test_loss_examples():
    with ag.precision(64):
        assert math.isclose(mvlm_loss(Tensor(np.zeros((3, 7))), np.array([1, 2, IGNORE])).item(), math.log(7), rel_tol=1e-12)
        hand = mvlm_loss(Tensor(np.array([[0.0, math.log(2)], [0.0, 0.0]])), np.array([1, 0])).item()
        assert math.isclose(hand, (-math.log(2 / 3) - math.log(1 / 2)) / 2, rel_tol=1e-12)
        sharp = mvlm_loss(Tensor(np.array([[50.0, -50.0]])), np.array([0])).item()
        assert 0 < sharp < 1e-30 or sharp == 0.0
    with pytest.raises(ValueError):
        mvlm_loss(Tensor(np.zeros((2, 3))), np.array([IGNORE, IGNORE]))


@pytest.fixture(scope="module")
def tiny(toy_corpus):
    docs, vocab = toy_corpus
    cfg = small_config(len(vocab))
    corpus = [encode_document(d, vocab) for d in docs[:6]]
    return cfg, corpus


def test_zero_lr_leaves_params_and_loss_constant(tiny):
    cfg, corpus = tiny
    params = init_params(cfg, np.random.default_rng(0))
    before = {k: p.data.copy() for k, p in params.items()}
    recs = pretrain(params, cfg, corpus, Schedule(3, 0.0, 0, 2), seed=1)
    assert all(np.array_equal(before[k], params[k].data) for k in params)
    assert len(recs) == 3 and all(r[2] == 0.0 for r in recs)
    # identical batches under identical masks would give identical losses; batches differ, so only check finiteness
    assert all(np.isfinite(r[1]) and r[1] > 0 for r in recs)


def test_one_step_changes_params(tiny):
    cfg, corpus = tiny
    params = init_params(cfg, np.random.default_rng(0))
    before = {k: p.data.copy() for k, p in params.items()}
    pretrain(params, cfg, corpus, Schedule(1, 1e-3, 0, 2), seed=1)
    assert any(not np.array_equal(before[k], params[k].data) for k in params)


def test_runs_are_deterministic(tiny, tmp_path):
    cfg, corpus = tiny
    out = []
    for k in range(2):
        params = init_params(cfg, np.random.default_rng(0))
        recs = pretrain(params, cfg, corpus, Schedule(4, 1e-3, 2, 2), seed=5, log_path=tmp_path / f"{k}.csv")
        out.append((recs, params))
    assert out[0][0] == out[1][0]
    assert all(np.array_equal(out[0][1][k].data, out[1][1][k].data) for k in out[0][1])
    text = (tmp_path / "0.csv").read_text()
    assert text == (tmp_path / "1.csv").read_text() and text.startswith("step,loss,lr\n")
    assert len(text.splitlines()) == 5


def test_empty_corpus_rejected(tiny):
    cfg, _ = tiny
    with pytest.raises(ValueError):
        pretrain(init_params(cfg, np.random.default_rng(0)), cfg, [], Schedule(1, 1e-3, 0, 1))


def test_schedule_validation():
    with pytest.raises(ValueError):
        Schedule(steps=-1)
    with pytest.raises(ValueError):
        Schedule(optimizer="sgd")


@pytest.mark.slow
def test_loss_moving_average_trends_down(toy_pretrain_run):
    """Consecutive 100-step windows after warmup should not rise, with 5% slack."""
    _, _, records, schedule, _ = toy_pretrain_run
    losses = np.array([r[1] for r in records[schedule.warmup:]])
    means = losses[: len(losses) // 100 * 100].reshape(-1, 100).mean(axis=1)
    rises = int((np.diff(means) > 0).sum())
    print(f"window means: {np.round(means, 4).tolist()}; rises {rises}/{len(means) - 1}")
    assert rises <= 0.05 * (len(means) - 1)
