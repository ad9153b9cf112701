"""Token-level examples: BIO labels, document encoding and chunking."""

from dataclasses import dataclass

import numpy as np

from .document import ENTITY_TYPES, EntitySpan, check_spans, normalize_bbox
from .tokenizer import CLS_ID, SEP_ID, tokenize

IGNORE = -100
LABELS = ("O",) + tuple(f"{p}-{t}" for t in ENTITY_TYPES for p in ("B", "I"))
NUM_LABELS = len(LABELS)  # 13
_TYPE_INDEX = {t: k for k, t in enumerate(ENTITY_TYPES)}


def b_label(etype):
    return 1 + 2 * _TYPE_INDEX[etype]


def i_label(etype):
    return 2 + 2 * _TYPE_INDEX[etype]


@dataclass
class TokenizedExample:
    token_ids: np.ndarray  # (n,) int64
    token_bboxes: np.ndarray  # (n, 4) int64 in [0, 1000]
    word_of_token: np.ndarray  # (n,) int64, -1 for special tokens
    labels: np.ndarray  # (n,) int64, IGNORE where unlabeled

    def __post_init__(self):
        self.token_ids = np.asarray(self.token_ids, dtype=np.int64).reshape(-1)
        self.token_bboxes = np.asarray(self.token_bboxes, dtype=np.int64).reshape(-1, 4)
        self.word_of_token = np.asarray(self.word_of_token, dtype=np.int64).reshape(-1)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        n = len(self.token_ids)
        if not (len(self.token_bboxes) == len(self.word_of_token) == len(self.labels) == n):
            raise ValueError("TokenizedExample fields must have equal length")
        if n and (self.token_bboxes.min() < 0 or self.token_bboxes.max() > 1000):
            raise ValueError("token bbox coordinates must lie in [0, 1000]")

    def __len__(self):
        return len(self.token_ids)

    def slice(self, start, stop):
        return TokenizedExample(
            self.token_ids[start:stop],
            self.token_bboxes[start:stop],
            self.word_of_token[start:stop],
            self.labels[start:stop],
        )


def bio_encode(entities, word_of_token):
    """Token labels: B on the first token of a span, I on the rest, O elsewhere.

    Tokens aligned to word ``-1`` (special tokens) get ``IGNORE``.
    """
    check_spans(entities)
    wot = np.asarray(word_of_token, dtype=np.int64)
    labels = np.where(wot < 0, IGNORE, 0).astype(np.int64)
    for span in entities:
        inside = np.nonzero((wot >= span.start) & (wot <= span.end))[0]
        if len(inside) == 0:
            continue
        labels[inside] = i_label(span.type)
        labels[inside[0]] = b_label(span.type)
    return labels


def bio_decode(labels, word_of_token):
    """Recover typed word spans from per-token labels.

    Each word is read through the label of its first token. A run is a B
    followed by I's of the same type; an I with no open run of its type starts
    a new span. Words without tokens (e.g. truncated) read as O.
    """
    labels = np.asarray(labels)
    wot = np.asarray(word_of_token)
    word_label = {}
    for lab, w in zip(labels.tolist(), wot.tolist()):
        if w >= 0 and w not in word_label:
            word_label[w] = lab if 0 <= lab < NUM_LABELS else 0
    spans = []
    cur = None  # [type, start, end]
    for w in sorted(word_label):
        lab = word_label[w]
        if lab == 0:
            etype, is_begin = None, False
        else:
            etype, is_begin = ENTITY_TYPES[(lab - 1) // 2], (lab - 1) % 2 == 0
        contiguous = cur is not None and cur[2] == w - 1
        if etype is not None and not is_begin and contiguous and cur[0] == etype:
            cur[2] = w
            continue
        if cur is not None:
            spans.append(EntitySpan(*cur))
            cur = None
        if etype is not None:
            cur = [etype, w, w]
    if cur is not None:
        spans.append(EntitySpan(*cur))
    return spans


def encode_document(doc, vocab, special_tokens=True):
    """Tokenize a Document into a TokenizedExample with per-page-normalized boxes.

    Subword tokens inherit their word's box; CLS/SEP carry ``(0, 0, 0, 0)``.
    """
    ids, align = tokenize([w.text for w in doc.words], vocab)
    boxes = []
    for w in align:
        word = doc.words[w]
        pw, ph = doc.pages[word.page]
        boxes.append(normalize_bbox(word.bbox, pw, ph))
    if special_tokens:
        ids = [CLS_ID] + ids + [SEP_ID]
        align = [-1] + align + [-1]
        boxes = [(0, 0, 0, 0)] + boxes + [(0, 0, 0, 0)]
    labels = bio_encode(doc.entities, align)
    return TokenizedExample(ids, np.array(boxes, dtype=np.int64).reshape(-1, 4), align, labels)


def chunk_starts(n, max_len, stride):
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    if not 0 <= stride < max_len:
        raise ValueError(f"stride must satisfy 0 <= stride < max_len, got {stride} with max_len {max_len}")
    starts, start = [], 0
    while True:
        starts.append(start)
        if start + max_len >= n:
            return starts
        start += max_len - stride


def chunk_document(example, max_len, stride=0):
    """Split into windows of at most ``max_len`` tokens overlapping by ``stride``."""
    return [example.slice(s, min(s + max_len, len(example))) for s in chunk_starts(len(example), max_len, stride)]
