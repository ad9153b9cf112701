"""Masked visual-language modelling: corruption, loss and the pretraining loop.

Only the text stream is corrupted; boxes always pass through unchanged.
"""

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .labels import IGNORE, TokenizedExample
from .model import forward, mlm_logits
from .tokenizer import MASK_ID, N_SPECIAL
from .training import PRETRAIN_DESK, pooled_ce, run


@dataclass
class MvlmBatch:
    token_ids: np.ndarray
    token_bboxes: np.ndarray
    mlm_targets: np.ndarray


def mvlm_mask(example, rng, vocab_size, select=0.15, mask=0.8, random=0.1, keep=0.1):
    """Select each non-special token with probability ``select``; of those,
    ``mask`` become [MASK], ``random`` a uniform non-special id, the rest stay."""
    if not 0.0 <= select <= 1.0:
        raise ValueError("select rate must be in [0, 1]")
    if min(mask, random, keep) < 0 or abs(mask + random + keep - 1.0) > 1e-9:
        raise ValueError("mask + random + keep must equal 1 with non-negative parts")
    if vocab_size <= N_SPECIAL:
        raise ValueError("vocabulary has no non-special tokens to sample")
    ids = np.asarray(example.token_ids, dtype=np.int64)
    n = len(ids)
    u_select = rng.random(n)
    u_branch = rng.random(n)
    replacement = rng.integers(N_SPECIAL, vocab_size, size=n)

    chosen = (ids >= N_SPECIAL) & (u_select < select)
    out = ids.copy()
    to_mask = chosen & (u_branch < mask)
    to_random = chosen & (u_branch >= mask) & (u_branch < mask + random)
    out[to_mask] = MASK_ID
    out[to_random] = replacement[to_random]
    targets = np.where(chosen, ids, IGNORE)
    return MvlmBatch(out, np.array(example.token_bboxes, copy=True), targets)


def mvlm_loss(logits, targets):
    return ag.cross_entropy(logits, targets, ignore_index=IGNORE)


def _as_example(batch):
    n = len(batch.token_ids)
    return TokenizedExample(batch.token_ids, batch.token_bboxes, np.full(n, -1), np.full(n, IGNORE))


def mvlm_batch_loss(params, cfg, batches, rng=None):
    pairs = []
    for b in batches:
        text_h, _ = forward(params, cfg, _as_example(b), rng)
        pairs.append((mlm_logits(text_h, params), b.mlm_targets))
    return pooled_ce(pairs)


def pretrain(params, cfg, corpus, schedule=PRETRAIN_DESK, seed=0, vocab_size=None, log_path=None, rates=None):
    """MVLM pretraining over ``corpus`` (TokenizedExamples), in place.

    Sequences longer than ``cfg.max_len`` are truncated. ``vocab_size`` bounds
    the random-replacement draw (defaults to ``cfg.vocab_size``). Returns the
    ``(step, loss, lr)`` records.
    """
    if not corpus:
        raise ValueError("empty pretraining corpus")
    examples = [ex.slice(0, cfg.max_len) for ex in corpus]
    vsize = vocab_size or cfg.vocab_size
    rates = rates or {}

    def batch_loss(indices, rngs):
        for _ in range(100):
            batches = [mvlm_mask(examples[i], rngs["mask"], vsize, **rates) for i in indices]
            if any((b.mlm_targets != IGNORE).any() for b in batches):
                break
        else:
            raise ValueError("could not draw a masked token; are all tokens special?")
        return mvlm_batch_loss(params, cfg, batches, rngs["dropout"] if cfg.dropout_rate > 0 else None)

    return run(params, cfg, len(examples), schedule, seed, batch_loss, log_path)
