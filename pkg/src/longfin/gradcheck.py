"""Central-difference gradient verification."""

import numpy as np

from .autograd import Tensor
from .rng import make_rng


def _scalar(out):
    if not isinstance(out, Tensor) or out.data.size != 1:
        raise ValueError("grad_check: f must return a scalar Tensor")
    return float(out.data.reshape(()))


def grad_check(f, x, h=1e-3, coords=None):
    """Max over coordinates of ``|analytic - central| / max(1, |analytic|)``.

    ``f`` maps the tensor ``x`` (which must require grad) to a scalar tensor.
    ``coords`` restricts the check to a subset of flat indices.
    """
    worst, _ = grad_check_params(lambda: f(x), {"x": x}, h, coords={"x": coords} if coords is not None else None)
    return worst


def grad_check_params(loss_fn, params, h=1e-3, coords=None, max_per_tensor=None, rng=None):
    """Gradient check of a closure over several named parameter tensors.

    With ``max_per_tensor`` set, each tensor contributes at most that many
    coordinates: half drawn among the largest analytic-gradient entries, the
    rest uniformly at random from ``rng``. Returns ``(max_err, per_tensor)``.
    """
    for p in params.values():
        p.grad = None
    out = loss_fn()
    _scalar(out)
    out.backward()
    analytic = {k: (np.zeros_like(p.data) if p.grad is None else p.grad.copy()) for k, p in params.items()}

    per_tensor = {}
    for name, p in params.items():
        if not p.data.flags.c_contiguous:
            p.data = np.ascontiguousarray(p.data)
        flat = p.data.reshape(-1)
        a = analytic[name].reshape(-1)
        if coords is not None and coords.get(name) is not None:
            idx = np.asarray(coords[name]).reshape(-1)
        elif max_per_tensor is None or flat.size <= max_per_tensor:
            idx = np.arange(flat.size)
        else:
            k = max_per_tensor // 2
            top = np.argsort(-np.abs(a), kind="stable")[:k]
            rest = np.setdiff1d(np.arange(flat.size), top)
            picked = (rng or make_rng(0)).choice(rest, size=max_per_tensor - k, replace=False)
            idx = np.concatenate([top, np.sort(picked)])
        worst = 0.0
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            up = float(flat[i])
            fp = _scalar(loss_fn())
            flat[i] = orig - h
            down = float(flat[i])
            fm = _scalar(loss_fn())
            flat[i] = orig
            # the stored step, not h, after rounding to the tensor dtype
            num = (fp - fm) / (up - down)
            err = abs(float(a[i]) - num) / max(1.0, abs(float(a[i])))
            worst = max(worst, err)
        per_tensor[name] = worst
    for p in params.values():
        p.grad = None
    worst = max(per_tensor.values()) if per_tensor else 0.0
    return worst, per_tensor


def model_grad_check(loss="both", bits=64, seed=0, n=16, weight_scale=20.0, max_per_tensor=6):
    """End-to-end check of the full encoder on a minimal config.

    Two layers, ``d_text=8``, ``d_layout=4``, one ``n``-token synthetic form.
    Weights are scaled up from their init so every path carries a gradient
    well above rounding noise. Returns ``{loss_name: (max_err, per_tensor)}``.
    """
    from . import autograd as ag
    from .finetune import ner_batch_loss
    from .labels import encode_document
    from .model import ModelConfig, cast_params, init_params
    from .pretrain import mvlm_batch_loss, mvlm_mask
    from .rng import derive
    from .synthetic import toy_form
    from .tokenizer import build_vocab

    if loss not in ("mvlm", "ner", "both"):
        raise ValueError(f"loss must be mvlm, ner or both, got {loss!r}")
    doc = toy_form(derive(seed, 5), 0)
    vocab = build_vocab([w.text for w in doc.words])
    example = encode_document(doc, vocab).slice(0, n)
    cfg = ModelConfig(vocab_size=len(vocab), max_len=n, d_text=8, d_layout=4, layers=2, heads=2,
                      window=6, global_interval=5, coord_emb_dim=2, ffn_multiplier=2, dropout_rate=0.0)
    h = 1e-6 if bits == 64 else 1e-2
    results = {}
    with ag.precision(bits):
        dtype = ag.get_dtype()
        params = cast_params(init_params(cfg, derive(seed, 1)), dtype)
        for t in params.values():
            if t.data.ndim == 2:
                t.data *= dtype(weight_scale)
        mask_rng = derive(seed, 3)
        batch = mvlm_mask(example, mask_rng, len(vocab))
        while not (batch.mlm_targets != -100).any():
            batch = mvlm_mask(example, mask_rng, len(vocab))
        closures = {
            "mvlm": lambda: mvlm_batch_loss(params, cfg, [batch]),
            "ner": lambda: ner_batch_loss(params, cfg, [example]),
        }
        for name in ("mvlm", "ner") if loss == "both" else (loss,):
            results[name] = grad_check_params(closures[name], params, h=h, max_per_tensor=max_per_tensor,
                                              rng=derive(seed, 6))
    return results
