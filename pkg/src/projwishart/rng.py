"""Reproducible random streams.

A stream is keyed by ``(seed, stream)``; the raw 64-bit words come from the
Philox-4x64 counter-based generator, so distinct stream ids give
independent sequences without any coordination. Gaussian variates are made
here from the raw words (Box-Muller, consecutive pairs), which keeps the
output independent of numpy's own sampling algorithms.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


class RngStream:
    """Stateful random stream; identical ``(seed, stream)`` give identical draws."""

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & MASK64
        self.stream = int(stream) & MASK64
        self._bitgen = np.random.Philox(key=np.array([self.seed, self.stream], dtype=np.uint64))
        self._spare = None

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream={self.stream})"

    def spawn(self, stream: int) -> "RngStream":
        """A fresh stream with the same seed and another stream id."""
        return RngStream(self.seed, stream)

    def raw(self, size: int) -> np.ndarray:
        return self._bitgen.random_raw(size).astype(np.uint64)

    def uniform(self, size) -> np.ndarray:
        """Uniform variates on the open interval (0, 1), 53-bit resolution."""
        shape = (size,) if np.isscalar(size) else tuple(size)
        count = int(np.prod(shape))
        words = self.raw(count)
        return (((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53).reshape(shape)

    def standard_normal(self, size) -> np.ndarray:
        """Standard normal variates via Box-Muller on consecutive uniform pairs."""
        shape = (size,) if np.isscalar(size) else tuple(size)
        count = int(np.prod(shape))
        pairs = (count + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        radius = np.sqrt(-2.0 * np.log(u[:, 0]))
        angle = 2.0 * np.pi * u[:, 1]
        z = np.empty((pairs, 2))
        z[:, 0] = radius * np.cos(angle)
        z[:, 1] = radius * np.sin(angle)
        return z.ravel()[:count].reshape(shape)

    def complex_normal(self, size) -> np.ndarray:
        """Circularly-symmetric complex normals with ``E|z|^2 = 1``."""
        shape = (size,) if np.isscalar(size) else tuple(size)
        z = self.standard_normal(shape + (2,)) * np.sqrt(0.5)
        return z[..., 0] + 1j * z[..., 1]

    def normal(self, size, field: str = "real") -> np.ndarray:
        if field == "real":
            return self.standard_normal(size)
        if field == "complex":
            return self.complex_normal(size)
        raise ValueError(f"unknown field {field!r}")
