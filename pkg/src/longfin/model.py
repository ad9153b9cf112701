"""Dual-stream (text + layout) long-document encoder.

Both streams run the same stack of blocks over a shared attention pattern.
Inside each block the per-stream, already scaled query-key scores are summed
across streams before the softmax (the bidirectional complementation step);
the text-to-layout direction can be gradient-blocked with ``detach_biacm``.
"""

import math
from dataclasses import dataclass, fields

import numpy as np

from . import autograd as ag
from .attention import build_pattern, pattern_mix, pattern_scores, pattern_softmax
from .autograd import Tensor
from .labels import NUM_LABELS

COORD_VOCAB = 1001  # normalized coordinates 0..1000 inclusive
LN_EPS = 1e-5


@dataclass
class ModelConfig:
    vocab_size: int = 8000
    max_len: int = 1024
    d_text: int = 128
    d_layout: int = 64
    layers: int = 4
    heads: int = 4
    window: int = 64
    global_interval: int = 32
    detach_biacm: bool = False
    coord_emb_dim: int = 16
    ffn_multiplier: int = 4
    dropout_rate: float = 0.1
    label_count: int = NUM_LABELS
    separate_global_proj: bool = False

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.type in ("int", int) and isinstance(v, bool):
                raise ValueError(f"{f.name} must be an integer")
        if min(self.vocab_size, self.max_len, self.d_text, self.d_layout, self.layers, self.heads) < 1:
            raise ValueError("sizes must be positive")
        if self.d_text % self.heads or self.d_layout % self.heads:
            raise ValueError("d_text and d_layout must be divisible by heads")
        if self.coord_emb_dim < 1 or self.ffn_multiplier < 1 or self.global_interval < 1 or self.window < 0:
            raise ValueError("coord_emb_dim, ffn_multiplier, global_interval must be >= 1 and window >= 0")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.separate_global_proj:
            raise NotImplementedError("separate global-token projections are reserved but not implemented")

    @classmethod
    def full_size(cls, vocab_size=50265):
        """Full-size settings: 12 layers, 768/384 wide, 4096 positions."""
        return cls(vocab_size=vocab_size, max_len=4096, d_text=768, d_layout=384, layers=12, heads=12,
                   window=512, global_interval=100, coord_emb_dim=96, dropout_rate=0.1)


def param_shapes(cfg):
    dt, dl, c = cfg.d_text, cfg.d_layout, cfg.coord_emb_dim
    shapes = {
        "text.tok_emb": (cfg.vocab_size, dt),
        "text.pos_emb": (cfg.max_len, dt),
        "text.emb_ln.g": (dt,),
        "text.emb_ln.b": (dt,),
        "layout.pos_emb": (cfg.max_len, dl),
    }
    for coord in ("x0", "y0", "x1", "y1"):
        shapes[f"layout.{coord}_emb"] = (COORD_VOCAB, c)
    shapes.update({
        "layout.proj.w": (4 * c, dl),
        "layout.proj.b": (dl,),
        "layout.emb_ln.g": (dl,),
        "layout.emb_ln.b": (dl,),
    })
    for li in range(cfg.layers):
        for stream, d in (("text", dt), ("layout", dl)):
            pre = f"layers.{li}.{stream}"
            for proj in ("q", "k", "v", "o"):
                shapes[f"{pre}.{proj}.w"] = (d, d)
                shapes[f"{pre}.{proj}.b"] = (d,)
            shapes[f"{pre}.ln1.g"] = (d,)
            shapes[f"{pre}.ln1.b"] = (d,)
            shapes[f"{pre}.ffn1.w"] = (d, d * cfg.ffn_multiplier)
            shapes[f"{pre}.ffn1.b"] = (d * cfg.ffn_multiplier,)
            shapes[f"{pre}.ffn2.w"] = (d * cfg.ffn_multiplier, d)
            shapes[f"{pre}.ffn2.b"] = (d,)
            shapes[f"{pre}.ln2.g"] = (d,)
            shapes[f"{pre}.ln2.b"] = (d,)
    shapes.update({
        "mlm.w": (dt, cfg.vocab_size),
        "mlm.b": (cfg.vocab_size,),
        "ner.w": (dt, cfg.label_count),
        "ner.b": (cfg.label_count,),
    })
    return shapes


def _trunc_normal(rng, shape, std=0.02):
    x = rng.standard_normal(shape)
    bad = np.abs(x) > 2.0
    while bad.any():
        x[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(x) > 2.0
    return x * std


def init_params(cfg, rng):
    """Truncated normal (std 0.02) weights and embeddings; unit gains, zero biases."""
    params = {}
    dtype = ag.get_dtype()
    for name, shape in param_shapes(cfg).items():
        if name.endswith(".g"):
            data = np.ones(shape)
        elif name.endswith(".b"):
            data = np.zeros(shape)
        else:
            data = _trunc_normal(rng, shape)
        params[name] = Tensor(data.astype(dtype), requires_grad=True)
    return params


def check_params(params, cfg):
    expected = param_shapes(cfg)
    if set(params) != set(expected):
        missing = sorted(set(expected) - set(params))
        extra = sorted(set(params) - set(expected))
        raise ValueError(f"parameter names do not match config (missing {missing[:3]}, extra {extra[:3]})")
    for name, shape in expected.items():
        if params[name].shape != shape:
            raise ValueError(f"{name}: shape {params[name].shape}, config implies {shape}")


def cast_params(params, dtype):
    return {k: Tensor(p.data.astype(dtype), requires_grad=True, dtype=dtype) for k, p in params.items()}


def extend_positions(base, factor):
    """Tile an ``L x d`` position table to ``(L * factor) x d``; row i is base row i mod L."""
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    base = base.data if isinstance(base, Tensor) else np.asarray(base)
    return np.tile(base, (factor, 1))


# ---------------------------------------------------------------------------
# embeddings


def embed_text(token_ids, params, cfg, rng=None):
    ids = np.asarray(token_ids, dtype=np.int64)
    n = len(ids)
    if n > cfg.max_len:
        raise ValueError(f"sequence of {n} tokens exceeds max_len {cfg.max_len}")
    if n and (ids.min() < 0 or ids.max() >= cfg.vocab_size):
        raise IndexError(f"token id out of range [0, {cfg.vocab_size})")
    x = ag.add(ag.embedding(params["text.tok_emb"], ids), ag.embedding(params["text.pos_emb"], np.arange(n)))
    x = ag.layer_norm(x, params["text.emb_ln.g"], params["text.emb_ln.b"], LN_EPS)
    return ag.dropout(x, cfg.dropout_rate, rng)


def embed_layout(token_bboxes, params, cfg, rng=None):
    boxes = np.asarray(token_bboxes, dtype=np.int64).reshape(-1, 4)
    n = len(boxes)
    if n > cfg.max_len:
        raise ValueError(f"sequence of {n} tokens exceeds max_len {cfg.max_len}")
    if n and (boxes.min() < 0 or boxes.max() > 1000):
        raise ValueError("bbox coordinates must lie in [0, 1000]")
    parts = [ag.embedding(params[f"layout.{c}_emb"], boxes[:, k]) for k, c in enumerate(("x0", "y0", "x1", "y1"))]
    x = ag.linear(ag.concat(parts, axis=-1), params["layout.proj.w"], params["layout.proj.b"])
    x = ag.add(x, ag.embedding(params["layout.pos_emb"], np.arange(n)))
    x = ag.layer_norm(x, params["layout.emb_ln.g"], params["layout.emb_ln.b"], LN_EPS)
    return ag.dropout(x, cfg.dropout_rate, rng)


# ---------------------------------------------------------------------------
# blocks


def biacm_combine(text_scores, layout_scores, detach):
    """Cross-add the two streams' scores; ``detach`` blocks text gradients on the layout side."""
    if text_scores.shape != layout_scores.shape:
        raise ValueError(f"score supports differ: {text_scores.shape} vs {layout_scores.shape}")
    text_total = ag.add(text_scores, layout_scores)
    layout_total = ag.add(layout_scores, ag.detach(text_scores) if detach else text_scores)
    return text_total, layout_total


def _split_heads(x, h):
    n, d = x.shape
    return ag.transpose(ag.reshape(x, (n, h, d // h)), (1, 0, 2))


def _merge_heads(x):
    h, n, dh = x.shape
    return ag.reshape(ag.transpose(x, (1, 0, 2)), (n, h * dh))


def _proj(x, params, name):
    return ag.linear(x, params[name + ".w"], params[name + ".b"])


def _qkv(x, params, pre, h):
    return tuple(_split_heads(_proj(x, params, f"{pre}.{p}"), h) for p in ("q", "k", "v"))


def _finish(x, attn, params, pre):
    x = ag.layer_norm(ag.add(x, _proj(attn, params, pre + ".o")), params[pre + ".ln1.g"], params[pre + ".ln1.b"], LN_EPS)
    ff = _proj(ag.gelu(_proj(x, params, pre + ".ffn1")), params, pre + ".ffn2")
    return ag.layer_norm(ag.add(x, ff), params[pre + ".ln2.g"], params[pre + ".ln2.b"], LN_EPS)


def encoder_block(t, lay, params, cfg, li, pattern, rng=None):
    h = cfg.heads
    tq, tk, tv = _qkv(t, params, f"layers.{li}.text", h)
    lq, lk, lv = _qkv(lay, params, f"layers.{li}.layout", h)
    ts = pattern_scores(tq, tk, pattern, 1.0 / math.sqrt(cfg.d_text // h))
    ls = pattern_scores(lq, lk, pattern, 1.0 / math.sqrt(cfg.d_layout // h))
    t_total, l_total = biacm_combine(ts, ls, cfg.detach_biacm)
    tp = ag.dropout(pattern_softmax(t_total, pattern), cfg.dropout_rate, rng)
    lp = ag.dropout(pattern_softmax(l_total, pattern), cfg.dropout_rate, rng)
    t_attn = _merge_heads(pattern_mix(tp, tv, pattern))
    l_attn = _merge_heads(pattern_mix(lp, lv, pattern))
    return _finish(t, t_attn, params, f"layers.{li}.text"), _finish(lay, l_attn, params, f"layers.{li}.layout")


def forward(params, cfg, example, rng=None):
    """Run both streams; returns ``(text_hidden (n, d_text), layout_hidden (n, d_layout))``.

    ``rng`` enables dropout; pass ``None`` for deterministic evaluation.
    """
    n = len(example.token_ids)
    if n < 1:
        raise ValueError("cannot encode an empty sequence")
    if n > cfg.max_len:
        raise ValueError(f"sequence of {n} tokens exceeds max_len {cfg.max_len}")
    pattern = build_pattern(n, cfg.window, cfg.global_interval)
    t = embed_text(example.token_ids, params, cfg, rng)
    lay = embed_layout(example.token_bboxes, params, cfg, rng)
    for li in range(cfg.layers):
        t, lay = encoder_block(t, lay, params, cfg, li, pattern, rng)
    return t, lay


def mlm_logits(text_hidden, params):
    return ag.linear(text_hidden, params["mlm.w"], params["mlm.b"])


def ner_logits(text_hidden, params):
    return ag.linear(text_hidden, params["ner.w"], params["ner.b"])
