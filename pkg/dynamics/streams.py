"""
Per-chain random streams.

Each chain owns a Philox generator keyed by (seed, chain_id); normals are
drawn in fixed blocks of NOISE_BLOCK_STEPS vectors, so the values a chain
sees depend only on its key and on how many vectors it has consumed,
never on which other chains share a worker.
"""
import numpy as np
from django.conf import settings

from annealab.exceptions import InvalidInputError


def philox(seed: int, chain_id: int) -> np.random.Generator:
    if seed < 0 or chain_id < 0:
        raise InvalidInputError(f"seed and chain id must be nonnegative, got ({seed}, {chain_id})")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(chain_id)])))


class NoiseStream:
    """Standard normal vectors of one chain; `draws` counts vectors consumed."""

    def __init__(self, seed: int, chain_id: int, dim: int, block_steps: int = None, silent: bool = False):
        self.seed = int(seed)
        self.chain_id = int(chain_id)
        self.dim = int(dim)
        self.block_steps = int(block_steps or getattr(settings, 'NOISE_BLOCK_STEPS', 256))
        self.silent = silent
        self.draws = 0
        self._generator = philox(self.seed, self.chain_id)
        self._buffer = np.empty((0, self.dim))
        self._pos = 0

    def __repr__(self):
        return f"NoiseStream(seed={self.seed}, chain_id={self.chain_id}, draws={self.draws})"

    def _refill(self):
        self._buffer = self._generator.standard_normal((self.block_steps, self.dim))
        self._pos = 0

    def normals(self, n: int) -> np.ndarray:
        """Next n vectors, shape (n, dim). A silent stream returns zeros."""
        self.draws += n
        if self.silent:
            return np.zeros((n, self.dim))
        parts = []
        while n > 0:
            if self._pos == len(self._buffer):
                self._refill()
            take = min(n, len(self._buffer) - self._pos)
            parts.append(self._buffer[self._pos:self._pos + take])
            self._pos += take
            n -= take
        return parts[0] if len(parts) == 1 else np.concatenate(parts)

    def normal(self) -> np.ndarray:
        return self.normals(1)[0]


class UniformStream:
    """Uniform [0, 1) draws keyed by (seed, chain_id), for direct Gibbs sampling."""

    def __init__(self, seed: int, chain_id: int = 0):
        self.seed = int(seed)
        self.chain_id = int(chain_id)
        self.draws = 0
        self._generator = philox(self.seed, self.chain_id)

    def uniforms(self, n: int) -> np.ndarray:
        self.draws += n
        return self._generator.random(n)
