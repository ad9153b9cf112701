"""Dense tensors with reverse-mode differentiation.

A deliberately small engine: a ``Tensor`` wraps a numpy array and remembers
the op that produced it. Ops are plain functions returning new tensors; none
mutate their inputs. Broadcasting is limited to a trailing-shape operand
(``b.shape == a.shape[-b.ndim:]``), which covers biases and per-feature gains.

Float32 is the working precision. ``precision(64)`` switches newly created
tensors to float64 for gradient verification.
"""

import contextlib

import numpy as np

_DTYPE = np.float32


def get_dtype():
    return _DTYPE


@contextlib.contextmanager
def precision(bits):
    """Temporarily create tensors at 32 or 64 bit precision."""
    global _DTYPE
    if bits not in (32, 64):
        raise ValueError(f"precision must be 32 or 64, got {bits}")
    old = _DTYPE
    _DTYPE = np.float32 if bits == 32 else np.float64
    try:
        yield
    finally:
        _DTYPE = old


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None, dtype=None):
        arr = np.asarray(data, dtype=dtype or _DTYPE)
        if not np.isfinite(arr).all():
            raise FloatingPointError("non-finite value produced")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def numpy(self):
        return self.data

    def item(self):
        if self.data.size != 1:
            raise ValueError(f"item() needs a single element, shape is {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into ``.grad`` of every leaf that requires it."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed gradient needs a scalar tensor")
            grad = np.ones_like(self.data)
        order = _topo_order(self)
        grads = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    __add__ = lambda self, other: add(self, other)  # noqa: E731
    __mul__ = lambda self, other: mul(self, other)  # noqa: E731
    __matmul__ = lambda self, other: matmul(self, other)  # noqa: E731


def _topo_order(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents, backward):
    needs = any(p.requires_grad for p in parents)
    if not needs:
        return Tensor(data, dtype=data.dtype)
    return Tensor(data, True, tuple(parents), backward, dtype=data.dtype)


def _check_trailing(a, b, op):
    if a.shape == b.shape:
        return
    if b.ndim <= a.ndim and a.shape[a.ndim - b.ndim:] == b.shape:
        return
    raise ValueError(f"{op}: shapes {a.shape} and {b.shape} are incompatible")


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    lead = g.ndim - len(shape)
    return g.sum(axis=tuple(range(lead)))


# ---------------------------------------------------------------------------
# elementwise


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_trailing(a, b, "add")
    return _result(a.data + b.data, (a, b), lambda g: (g, _unbroadcast(g, b.shape)))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_trailing(a, b, "sub")
    return _result(a.data - b.data, (a, b), lambda g: (g, -_unbroadcast(g, b.shape)))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_trailing(a, b, "mul")
    ad, bd = a.data, b.data
    return _result(ad * bd, (a, b), lambda g: (g * bd, _unbroadcast(g * ad, b.shape)))


def scale(a, c):
    """Multiply by a python scalar."""
    c = float(c)
    return _result(a.data * a.data.dtype.type(c), (a,), lambda g: (g * g.dtype.type(c),))


def gelu(x):
    # tanh approximation; smooth everywhere, which keeps finite differences honest
    xd = x.data
    k = xd.dtype.type(np.sqrt(2.0 / np.pi))
    inner = k * (xd + 0.044715 * xd**3)
    t = np.tanh(inner)
    out = 0.5 * xd * (1.0 + t)

    def backward(g):
        dinner = k * (1.0 + 3 * 0.044715 * xd**2)
        return (g * (0.5 * (1.0 + t) + 0.5 * xd * (1.0 - t * t) * dinner),)

    return _result(out.astype(xd.dtype), (x,), backward)


def detach(x):
    """Same values, no gradient path back to ``x``."""
    return Tensor(x.data, dtype=x.data.dtype)


def dropout(x, rate, rng):
    if rate <= 0.0 or rng is None:
        return x
    if rate >= 1.0:
        raise ValueError("dropout rate must be < 1")
    keep = (rng.random(x.shape) >= rate).astype(x.data.dtype) / x.data.dtype.type(1.0 - rate)
    return _result(x.data * keep, (x,), lambda g: (g * keep,))


# ---------------------------------------------------------------------------
# reductions and shape


def sum(x):  # noqa: A001 - mirrors numpy naming
    shape = x.shape
    return _result(np.asarray(x.data.sum(), dtype=x.data.dtype), (x,), lambda g: (np.broadcast_to(g, shape).copy(),))


def mean(x):
    return scale(sum(x), 1.0 / x.data.size)


def reshape(x, shape):
    old = x.shape
    return _result(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),))


def transpose(x, axes):
    inv = np.argsort(axes)
    return _result(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inv),))


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ValueError("concat of nothing")
    ref = tensors[0].shape
    ax = axis % len(ref)
    for t in tensors[1:]:
        if t.ndim != len(ref) or any(s != r for i, (s, r) in enumerate(zip(t.shape, ref)) if i != ax):
            raise ValueError(f"concat: shapes {ref} and {t.shape} disagree off axis {axis}")
    sizes = [t.shape[ax] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    out = np.concatenate([t.data for t in tensors], axis=ax)
    return _result(out, tensors, lambda g: tuple(np.split(g, splits, axis=ax)))


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a, b):
    """``a (..., k) @ b (k, m)``; leading dims of ``a`` are treated as batch."""
    a, b = as_tensor(a), as_tensor(b)
    if b.ndim != 2 or a.ndim < 1 or a.shape[-1] != b.shape[0]:
        raise ValueError(f"matmul: shapes {a.shape} and {b.shape} are incompatible")
    ad, bd = a.data, b.data

    def backward(g):
        ga = g @ bd.T
        gb = ad.reshape(-1, ad.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        return ga, gb

    return _result(ad @ bd, (a, b), backward)


def linear(x, weight, bias=None):
    y = matmul(x, weight)
    return y if bias is None else add(y, bias)


def embedding(table, ids):
    """Row lookup ``table[ids]``; ids is an integer array of any shape."""
    ids = np.asarray(ids)
    if ids.dtype.kind not in "iu":
        raise TypeError("embedding ids must be integers")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f"embedding id out of range [0, {table.shape[0]})")
    shape = table.shape

    def backward(g):
        out = np.zeros(shape, dtype=g.dtype)
        np.add.at(out, ids.reshape(-1), g.reshape(-1, shape[1]))
        return (out,)

    return _result(table.data[ids], (table,), backward)


# ---------------------------------------------------------------------------
# normalisation and losses


def softmax(x, axis=-1):
    xd = x.data
    if xd.shape[axis] == 0:
        raise ValueError("softmax over an empty axis")
    e = np.exp(xd - xd.max(axis=axis, keepdims=True))
    p = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (p * (g - (g * p).sum(axis=axis, keepdims=True)),)

    return _result(p, (x,), backward)


def layer_norm(x, gamma, beta, eps=1e-5):
    """Normalise the last axis, then apply ``gamma * xhat + beta``."""
    if eps < 0:
        raise ValueError("layer_norm eps must be non-negative")
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ValueError(f"layer_norm: gamma/beta must have shape ({d},)")
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / np.sqrt(var + xd.dtype.type(eps))
    xhat = xc * inv
    gd = gamma.data

    def backward(g):
        dxhat = g * gd
        dx = inv / d * (d * dxhat - dxhat.sum(-1, keepdims=True) - xhat * (dxhat * xhat).sum(-1, keepdims=True))
        lead = tuple(range(g.ndim - 1))
        return dx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return _result(xhat * gd + beta.data, (x, gamma, beta), backward)


def cross_entropy(logits, targets, ignore_index=-100, reduction="mean"):
    """Token cross-entropy over ``logits (n, C)``; ``targets == ignore_index`` are skipped.

    ``reduction="sum"`` returns the summed loss so callers can pool several
    sequences before dividing by the total target count.
    """
    targets = np.asarray(targets)
    if logits.ndim != 2 or targets.shape != logits.shape[:1]:
        raise ValueError(f"cross_entropy: logits {logits.shape} vs targets {targets.shape}")
    valid = targets != ignore_index
    count = int(valid.sum())
    if count == 0:
        raise ValueError("cross_entropy: no non-ignored targets")
    idx = np.nonzero(valid)[0]
    tgt = targets[idx]
    if tgt.min() < 0 or tgt.max() >= logits.shape[1]:
        raise IndexError("cross_entropy target out of range")
    z = logits.data[idx]
    m = z.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(z - m).sum(axis=1))
    losses = lse - z[np.arange(len(idx)), tgt]
    norm = 1.0 if reduction == "sum" else 1.0 / count
    total = np.asarray(losses.sum() * norm, dtype=logits.data.dtype)

    def backward(g):
        p = np.exp(z - lse[:, None])
        p[np.arange(len(idx)), tgt] -= 1.0
        out = np.zeros_like(logits.data)
        out[idx] = p * (g * norm)
        return (out,)

    return _result(total, (logits,), backward)
