"""In-place parameter updates and learning-rate schedules."""

import math

import numpy as np


class Adam:
    def __init__(self, params, betas=(0.9, 0.999), eps=1e-8):
        self.params = params
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self, lr):
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m, v = self.m[name], self.v[name]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            upd = (lr / c1) * m / (np.sqrt(v / c2) + self.eps)
            p.data -= upd.astype(p.data.dtype)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None


class AdaFactor:
    """AdaFactor with an explicit learning rate and no first moment.

    Matrices keep factored row/column second-moment estimates; vectors keep a
    full estimate. Updates are RMS-clipped at ``clip_threshold``.
    """

    def __init__(self, params, decay_rate=-0.8, eps=1e-30, clip_threshold=1.0):
        self.params = params
        self.decay_rate = decay_rate
        self.eps = eps
        self.clip = clip_threshold
        self.t = 0
        self.state = {}
        for k, p in params.items():
            if p.data.ndim == 2:
                self.state[k] = (np.zeros(p.shape[0], p.data.dtype), np.zeros(p.shape[1], p.data.dtype))
            else:
                self.state[k] = np.zeros_like(p.data)

    def step(self, lr):
        self.t += 1
        beta2 = 1.0 - self.t**self.decay_rate
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            g2 = g * g + self.eps
            st = self.state[name]
            if isinstance(st, tuple):
                r, c = st
                r *= beta2
                r += (1.0 - beta2) * g2.mean(axis=1)
                c *= beta2
                c += (1.0 - beta2) * g2.mean(axis=0)
                v = np.outer(r / r.mean(), c)
            else:
                st *= beta2
                st += (1.0 - beta2) * g2
                v = st
            u = g / np.sqrt(v)
            rms = math.sqrt(float((u * u).mean()))
            u /= max(1.0, rms / self.clip)
            p.data -= (lr * u).astype(p.data.dtype)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None


def make_optimizer(name, params):
    name = name.lower()
    if name == "adam":
        return Adam(params)
    if name == "adafactor":
        return AdaFactor(params)
    raise ValueError(f"unknown optimizer {name!r} (expected adam or adafactor)")


def lr_at(step, base_lr, warmup, total, decay="constant"):
    """Linear warmup from 0 over ``warmup`` steps, then constant or linear decay to 0.

    ``step`` is 0-based; the first update uses ``lr_at(0, ...)``.
    """
    s = step + 1
    if warmup > 0 and s <= warmup:
        return base_lr * s / warmup
    if decay == "constant":
        return base_lr
    if decay == "linear":
        span = max(1, total - warmup)
        return base_lr * max(0.0, (total - s) / span)
    raise ValueError(f"unknown decay {decay!r} (expected constant or linear)")
