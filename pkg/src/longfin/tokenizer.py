"""Greedy longest-match subword tokenizer with byte fallback.

Vocabulary order is fixed: special tokens, the 256 byte tokens ``<0xNN>``,
every character seen in training (as an initial piece and as a ``##``
continuation), then whole words and multi-character pieces by descending
frequency. Words are never split across whitespace; the input is already a
list of words.
"""

import json
from collections import Counter

PAD, UNK, CLS, SEP, MASK = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"
SPECIALS = (PAD, UNK, CLS, SEP, MASK)
PAD_ID, UNK_ID, CLS_ID, SEP_ID, MASK_ID = range(5)
N_SPECIAL = len(SPECIALS)
CONT = "##"


def byte_piece(b):
    return f"<0x{b:02X}>"


class Vocabulary:
    def __init__(self, pieces, byte_fallback=True):
        if not pieces:
            raise ValueError("empty vocabulary")
        if tuple(pieces[:N_SPECIAL]) != SPECIALS:
            raise ValueError("vocabulary must start with the special tokens")
        self.pieces = list(pieces)
        self.index = {p: i for i, p in enumerate(self.pieces)}
        if len(self.index) != len(self.pieces):
            raise ValueError("duplicate vocabulary pieces")
        self.byte_fallback = byte_fallback
        self.max_piece = max(len(p) for p in self.pieces)

    def __len__(self):
        return len(self.pieces)

    def __contains__(self, piece):
        return piece in self.index

    def to_json(self):
        return json.dumps({"pieces": self.pieces, "byte_fallback": self.byte_fallback}, ensure_ascii=False)

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        return cls(obj["pieces"], obj.get("byte_fallback", True))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def build_vocab(words, max_size=None, min_freq=1, max_piece_len=6, byte_fallback=True):
    """Learn a vocabulary from an iterable of words.

    ``max_size`` caps the total size; specials, bytes and single characters
    are always kept, then whole words win over multi-character pieces.
    """
    counts = Counter(words)
    base = list(SPECIALS)
    if byte_fallback:
        base += [byte_piece(b) for b in range(256)]
    chars = sorted({c for w in counts for c in w})
    base += chars + [CONT + c for c in chars]
    seen = set(base)

    ranked = lambda c: sorted(c.items(), key=lambda kv: (-kv[1], kv[0]))  # noqa: E731
    whole = [w for w, f in ranked(counts) if f >= min_freq and len(w) > 1 and w not in seen]
    seen.update(whole)

    piece_counts = Counter()
    for w, f in counts.items():
        if w in seen and len(w) > 1 and f >= min_freq:
            continue
        for i in range(len(w)):
            for j in range(i + 2, min(len(w), i + max_piece_len) + 1):
                piece_counts[(CONT if i else "") + w[i:j]] += f
    pieces = [p for p, f in ranked(piece_counts) if f >= max(2, min_freq) and p not in seen]

    vocab = base + whole + pieces
    if max_size is not None:
        if max_size < len(base):
            raise ValueError(f"max_size {max_size} smaller than the mandatory {len(base)} pieces")
        vocab = vocab[:max_size]
    return Vocabulary(vocab, byte_fallback)


def _word_pieces(word, vocab):
    if not word:
        return [UNK_ID]
    whole = vocab.index.get(word)
    if whole is not None and whole >= N_SPECIAL:
        return [whole]
    out, pos = [], 0
    while pos < len(word):
        prefix = CONT if pos else ""
        for end in range(min(len(word), pos + vocab.max_piece), pos, -1):
            piece = vocab.index.get(prefix + word[pos:end])
            if piece is not None and piece >= N_SPECIAL:
                out.append(piece)
                pos = end
                break
        else:
            if vocab.byte_fallback:
                out.extend(vocab.index[byte_piece(b)] for b in word[pos].encode("utf-8"))
            else:
                out.append(UNK_ID)
            pos += 1
    return out


def tokenize(words, vocab):
    """Return ``(token_ids, word_of_token)``; every word yields at least one token."""
    if len(vocab) == 0:
        raise ValueError("empty vocabulary")
    ids, align = [], []
    for i, w in enumerate(words):
        pieces = _word_pieces(w, vocab)
        ids.extend(pieces)
        align.extend([i] * len(pieces))
    return ids, align
