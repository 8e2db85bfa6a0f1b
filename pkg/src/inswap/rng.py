"""Counter-based random streams keyed by ``(seed, stream_id)``.

Backed by numpy's Philox generator: the 128-bit key holds the seed and the
stream id, so distinct streams never overlap and a given
``(seed, stream_id, draw index)`` always yields the same variate.  Uniform and
normal variates come from two lanes of the same key (the normal lane starts
at counter offset 2^192), so the values of either sequence do not depend on
how draws of the two kinds interleave or when buffers are refilled.  This
lets the compiled run engine consume the buffers in bulk and still see
exactly the variates the step-by-step samplers would.
"""

from __future__ import annotations

import math
import zlib

import numpy as np

_MASK64 = (1 << 64) - 1
_BLOCK = 8192


def stream_id(replica: int = 0, purpose: str = "main") -> int:
    """Stable 64-bit id from a replica index and a purpose label."""
    return ((int(replica) & 0xFFFFFFFF) << 32) | zlib.crc32(purpose.encode())


class RngStream:
    """Buffered uniform/normal draws from one Philox stream.

    A stream must not be shared between threads.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream) & _MASK64
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))
        self._gen_n = np.random.Generator(np.random.Philox(key=key, counter=np.array([0, 0, 0, 1], dtype=np.uint64)))
        self._u = np.empty(0)
        self._ui = 0
        self._n = np.empty(0)
        self._ni = 0

    @classmethod
    def for_purpose(cls, seed: int, replica: int = 0, purpose: str = "main") -> "RngStream":
        return cls(seed, stream_id(replica, purpose))

    def spawn(self, purpose: str, replica: int = 0) -> "RngStream":
        """Independent stream with the same seed and a derived id."""
        return RngStream(self.seed, self.stream_id ^ stream_id(replica + 1, purpose))

    def ensure_uniforms(self, n: int) -> None:
        """Make at least ``n`` buffered uniforms available."""
        if self._ui + n > self._u.size:
            rest = self._u[self._ui:]
            fresh = self._gen.random(max(_BLOCK, n))
            self._u = np.concatenate([rest, fresh])
            self._ui = 0

    def ensure_normals(self, n: int) -> None:
        """Make at least ``n`` buffered standard normals available."""
        if self._ni + n > self._n.size:
            rest = self._n[self._ni:]
            fresh = self._gen_n.standard_normal(max(_BLOCK, n))
            self._n = np.concatenate([rest, fresh])
            self._ni = 0

    def uniforms(self, n: int) -> np.ndarray:
        self.ensure_uniforms(n)
        out = self._u[self._ui:self._ui + n]
        self._ui += n
        return out

    def uniform(self) -> float:
        if self._ui >= self._u.size:
            self.ensure_uniforms(1)
        v = self._u[self._ui]
        self._ui += 1
        return float(v)

    def normals(self, shape) -> np.ndarray:
        n = math.prod(shape) if isinstance(shape, tuple) else int(shape)
        self.ensure_normals(n)
        out = self._n[self._ni:self._ni + n].reshape(shape)
        self._ni += n
        return out

    def exponential(self, rate: float = 1.0) -> float:
        return -np.log1p(-self.uniform()) / rate

    def categorical_weights(self, p: np.ndarray) -> int:
        """Index drawn with probabilities proportional to ``p``."""
        cdf = np.cumsum(p)
        i = int(np.searchsorted(cdf, self.uniform() * cdf[-1], side="right"))
        return min(i, cdf.size - 1)

    def categorical(self, logp: np.ndarray) -> int:
        """Index drawn with probabilities ``exp(logp)`` (assumed normalised)."""
        cdf = np.cumsum(np.exp(logp))
        i = int(np.searchsorted(cdf, self.uniform() * cdf[-1], side="right"))
        return min(i, cdf.size - 1)
