"""Counter-based pseudo-random generator.

Every draw is a pure function of (seed, counter), so streams are
reproducible bit-for-bit across platforms and runs. The mixing function
is splitmix64; uniform doubles take the top 53 bits of each output word.
"""
from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _mix(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; z is a uint64 array, overflow wraps mod 2**64
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


def _fnv1a(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK
    return h


class Rng:
    """Deterministic stream of random numbers addressed by a 64-bit seed.

    The counter advances by the number of words consumed, so interleaving
    differently sized requests never changes later values for a given
    request sequence.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK
        self.counter = 0

    def _words(self, n: int) -> np.ndarray:
        base = (self.seed + _GOLDEN * self.counter) & _MASK
        step = np.uint64(_GOLDEN)
        with np.errstate(over="ignore"):
            states = np.uint64(base) + step * np.arange(n, dtype=np.uint64)
        self.counter += n
        return _mix(states)

    def uniform(self, shape=None) -> np.ndarray | float:
        """Uniform float64 in [0, 1)."""
        if shape is None:
            return float(self._words(1)[0] >> np.uint64(11)) * 2.0**-53
        n = int(np.prod(shape))
        out = (self._words(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return out.reshape(shape)

    def normal(self, shape=None, scale: float = 1.0) -> np.ndarray | float:
        """Standard normal via Box-Muller on paired uniforms."""
        single = shape is None
        n = 1 if single else int(np.prod(shape))
        m = n + (n & 1)
        u = (self._words(2 * m) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        u1 = u[:m] * (1.0 - 2.0**-53) + 2.0**-53  # keep log() finite
        u2 = u[m:]
        r = np.sqrt(-2.0 * np.log(u1))
        out = np.empty(2 * m)
        out[0::2] = r * np.cos(2.0 * np.pi * u2)
        out[1::2] = r * np.sin(2.0 * np.pi * u2)
        out = out[:n] * scale
        if single:
            return float(out[0])
        return out.reshape(shape)

    def bernoulli(self, shape, p: float) -> np.ndarray:
        """Boolean array, True with probability p per entry."""
        return self.uniform(shape) < p

    def integers(self, n: int, high: int) -> np.ndarray:
        """n integers uniform in [0, high)."""
        if high <= 0:
            raise ValueError("high must be positive")
        return np.minimum((self.uniform(n) * high).astype(np.int64), high - 1)

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic random permutation of range(n)."""
        return np.argsort(self.uniform(n), kind="stable")

    def derive(self, label: str) -> "Rng":
        """Independent child stream keyed by a string label."""
        child_seed = int(_mix(np.array([(self.seed ^ _fnv1a(label.encode())) & _MASK], dtype=np.uint64))[0])
        return Rng(child_seed)
