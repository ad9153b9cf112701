"""Seeded random streams.

All randomness (init, masking, dropout, batching) goes through a numpy
``Generator`` on the Philox-4x64 counter-based bit generator. Philox's raw
stream is fixed by its published algorithm, so a seed names the same stream on
every platform, unlike the platform-default ``default_rng`` choice which numpy
reserves the right to change.
"""

import numpy as np

Rng = np.random.Generator


def make_rng(seed):
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return np.random.Generator(np.random.Philox(seed))


def derive(seed, stream):
    """Independent child stream ``stream`` of ``seed`` (e.g. init vs masking)."""
    return np.random.Generator(np.random.Philox(key=[int(seed), int(stream)]))
