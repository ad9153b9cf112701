"""NER fine-tuning and entity prediction in long or chunked mode."""

import logging

import numpy as np

from .labels import IGNORE, NUM_LABELS, bio_decode, chunk_document, encode_document
from .metrics import corpus_f1
from .model import forward, ner_logits
from .training import FINETUNE_DESK, pooled_ce, run

log = logging.getLogger(__name__)


def _check_label_space(params, cfg):
    if cfg.label_count != NUM_LABELS or params["ner.w"].shape[1] != NUM_LABELS:
        raise ValueError(
            f"label space mismatch: config has {cfg.label_count}, head has {params['ner.w'].shape[1]}, "
            f"BIO scheme needs {NUM_LABELS}"
        )


def ner_batch_loss(params, cfg, examples, rng=None):
    pairs = []
    for ex in examples:
        text_h, _ = forward(params, cfg, ex, rng)
        pairs.append((ner_logits(text_h, params), ex.labels))
    return pooled_ce(pairs)


def finetune(params, cfg, train_set, schedule=FINETUNE_DESK, seed=0, log_path=None):
    """Token cross-entropy over BIO labels, in place. ``train_set`` holds
    TokenizedExamples; longer ones are truncated to ``cfg.max_len``."""
    _check_label_space(params, cfg)
    examples = [ex.slice(0, cfg.max_len) for ex in train_set]
    examples = [ex for ex in examples if (ex.labels != IGNORE).any()]
    if not examples and schedule.steps:
        raise ValueError("no labelled tokens in the training set")

    def batch_loss(indices, rngs):
        drop = rngs["dropout"] if cfg.dropout_rate > 0 else None
        return ner_batch_loss(params, cfg, [examples[i] for i in indices], drop)

    return run(params, cfg, max(1, len(examples)), schedule, seed, batch_loss, log_path)


def predict_labels(params, cfg, example):
    text_h, _ = forward(params, cfg, example)
    return np.argmax(ner_logits(text_h, params).data, axis=1)


def predict_example(params, cfg, example, mode="long", max_len=512, stride=0):
    """Per-token label predictions for one example plus the truncated-token count.

    Long mode runs one forward pass over the first ``cfg.max_len`` tokens.
    Chunked mode predicts each window independently; where windows overlap,
    the earlier window's label is kept. Unpredicted tokens get ``IGNORE``.
    """
    n = len(example)
    labels = np.full(n, IGNORE, dtype=np.int64)
    if n == 0:
        return labels, 0
    if mode == "long":
        keep = min(n, cfg.max_len)
        labels[:keep] = predict_labels(params, cfg, example.slice(0, keep))
        return labels, n - keep
    if mode != "chunked":
        raise ValueError(f"mode must be 'long' or 'chunked', got {mode!r}")
    if max_len > cfg.max_len:
        raise ValueError(f"chunk length {max_len} exceeds model max_len {cfg.max_len}")
    start = 0
    step = max_len - stride
    for k, chunk in enumerate(chunk_document(example, max_len, stride)):
        pred = predict_labels(params, cfg, chunk)
        lo = start if k == 0 else start + stride
        labels[lo:start + len(chunk)] = pred[lo - start:]
        start += step
    return labels, 0


def predict_entities(params, cfg, document, vocab, mode="long", max_len=512, stride=0):
    """Decode entity spans for a Document. Returns ``(spans, truncated_tokens)``."""
    if not document.words:
        return [], 0
    example = encode_document(document, vocab)
    labels, truncated = predict_example(params, cfg, example, mode, max_len, stride)
    if truncated:
        log.warning("document %s: %d tokens beyond max_len %d ignored", document.id, truncated, cfg.max_len)
    return bio_decode(labels, example.word_of_token), truncated


def evaluate(params, cfg, documents, vocab, mode="long", max_len=512, stride=0):
    pairs, truncated = [], 0
    for doc in documents:
        spans, t = predict_entities(params, cfg, doc, vocab, mode, max_len, stride)
        truncated += t
        pairs.append((spans, doc.entities))
    return corpus_f1(pairs, truncated)
