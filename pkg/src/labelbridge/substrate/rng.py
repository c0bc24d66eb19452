"""Seeded random streams.

All randomness in the package goes through :class:`Rng`, a thin wrapper
over numpy's PCG64 bit generator (O'Neill 2014, the numpy default).  The
stream is fully determined by the seed and the sequence of calls, and its
state can be captured into a checkpoint and restored exactly.
"""

import json

import numpy as np


class Rng:
    def __init__(self, seed=0):
        self.seed = int(seed)
        self._bitgen = np.random.PCG64(np.random.SeedSequence(self.seed))
        self._gen = np.random.Generator(self._bitgen)

    def spawn(self, *key):
        """Independent child stream derived from the seed and an integer key path."""
        child = Rng.__new__(Rng)
        child.seed = self.seed
        ss = np.random.SeedSequence(self.seed, spawn_key=tuple(int(k) for k in key))
        child._bitgen = np.random.PCG64(ss)
        child._gen = np.random.Generator(child._bitgen)
        return child

    def random(self, size=None):
        return self._gen.random(size)

    def uniform(self, low, high, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def permutation(self, n):
        return self._gen.permutation(n)

    def choice(self, n, p):
        return int(sample_categorical(np.asarray(p, dtype=np.float64), self))

    # checkpointing -----------------------------------------------------
    def get_state(self):
        return json.dumps({"seed": self.seed, "state": self._bitgen.state})

    @classmethod
    def from_state(cls, text):
        blob = json.loads(text)
        rng = cls(blob["seed"])
        rng._bitgen.state = blob["state"]
        return rng


def sample_categorical(probs, rng):
    """Draw class indices by inverse-CDF sampling along the last axis.

    ``probs`` may be a single distribution (returns an int) or a stack of
    them with shape (..., K) (returns an int array of shape (...)).  One
    uniform is consumed per draw.
    """
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim == 0 or p.shape[-1] == 0:
        raise ValueError("empty distribution")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValueError("probabilities must be finite and nonnegative")
    totals = p.sum(axis=-1)
    if np.any(totals <= 0):
        raise ValueError("degenerate (all-zero) distribution")
    if np.any(np.abs(totals - 1.0) > 1e-4):
        raise ValueError("probabilities must sum to 1 within 1e-4")
    cdf = np.cumsum(p, axis=-1)
    u = rng.random(p.shape[:-1]) * cdf[..., -1]
    idx = (u[..., None] >= cdf).sum(axis=-1)
    # guard the top edge against rounding: fall back to the last nonzero class
    last = p.shape[-1] - 1 - np.argmax((p > 0)[..., ::-1], axis=-1)
    idx = np.minimum(idx, last)
    if np.ndim(idx) == 0:
        return int(idx)
    return idx.astype(np.intp)
