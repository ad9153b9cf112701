"""Shared training loop: batching, schedule, optimizer step and loss logging."""

import logging
from dataclasses import asdict, dataclass

import numpy as np

from . import autograd as ag
from .optim import lr_at, make_optimizer
from .rng import derive

log = logging.getLogger(__name__)

# child stream ids under a run seed
STREAM_INIT, STREAM_BATCH, STREAM_MASK, STREAM_DROPOUT = 1, 2, 3, 4


@dataclass
class Schedule:
    steps: int = 2000
    lr: float = 3e-4
    warmup: int = 50
    batch_size: int = 8
    optimizer: str = "adam"
    decay: str = "constant"

    def __post_init__(self):
        if self.steps < 0 or self.batch_size < 1 or self.warmup < 0 or self.lr < 0:
            raise ValueError(f"invalid schedule {asdict(self)}")
        if self.optimizer not in ("adam", "adafactor"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.decay not in ("constant", "linear"):
            raise ValueError(f"unknown decay {self.decay!r}")


PRETRAIN_DESK = Schedule()
# 65K steps, lr 3e-5, batch 12, 500 warmup steps, AdaFactor
PRETRAIN_FULL = Schedule(steps=65000, lr=3e-5, warmup=500, batch_size=12, optimizer="adafactor")
FINETUNE_DESK = Schedule(steps=500, lr=1e-3, warmup=0, batch_size=4)
FINETUNE_FULL = Schedule(steps=6000, lr=2e-5, warmup=0, batch_size=4)


class BatchSampler:
    """Epoch-wise shuffled indices; deterministic for a given rng."""

    def __init__(self, n, rng):
        if n < 1:
            raise ValueError("empty corpus")
        self.n = n
        self.rng = rng
        self._queue = []

    def take(self, k):
        out = []
        while len(out) < k:
            if not self._queue:
                self._queue = list(self.rng.permutation(self.n))
            out.append(int(self._queue.pop(0)))
        return out


def run(params, cfg, n_examples, schedule, seed, batch_loss, log_path=None):
    """Optimise ``params`` in place.

    ``batch_loss(indices, step_rngs) -> scalar Tensor`` builds the loss for a
    batch; ``step_rngs`` is a dict of per-run generators (``mask``,
    ``dropout``). Returns the list of ``(step, loss, lr)`` records.
    """
    opt = make_optimizer(schedule.optimizer, params)
    sampler = BatchSampler(n_examples, derive(seed, STREAM_BATCH))
    rngs = {"mask": derive(seed, STREAM_MASK), "dropout": derive(seed, STREAM_DROPOUT)}
    records = []
    fh = None
    if log_path is not None:
        fh = open(log_path, "w", encoding="utf-8", newline="\n")
        fh.write("step,loss,lr\n")
    try:
        for step in range(schedule.steps):
            lr = lr_at(step, schedule.lr, schedule.warmup, schedule.steps, schedule.decay)
            loss = batch_loss(sampler.take(schedule.batch_size), rngs)
            opt.zero_grad()
            loss.backward()
            opt.step(lr)
            value = loss.item()
            records.append((step + 1, value, lr))
            if fh is not None:
                fh.write(f"{step + 1},{value:.6f},{lr:.6g}\n")
            if (step + 1) % 100 == 0 or step == 0:
                log.info("step %d loss %.4f lr %.3g", step + 1, value, lr)
    finally:
        if fh is not None:
            fh.close()
    opt.zero_grad()
    return records


def pooled_ce(logit_target_pairs):
    """Mean token cross-entropy over several sequences pooled together."""
    total, count = None, 0
    for logits, targets in logit_target_pairs:
        k = int((np.asarray(targets) != -100).sum())
        if k == 0:
            continue
        part = ag.cross_entropy(logits, targets, reduction="sum")
        total = part if total is None else ag.add(total, part)
        count += k
    if count == 0:
        raise ValueError("batch has no supervised tokens")
    return ag.scale(total, 1.0 / count)
