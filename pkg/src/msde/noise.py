"""Counter-addressable Gaussian noise for reproducible SDE simulation.

Every Brownian increment consumed anywhere in this package is addressed by
four integers: (seed, stream_id, substream, block).  The same address always
yields the same numbers, on any machine, in any order of evaluation.  That
property is what makes coupled runs (same W^1 driving both the multiscale
system and its averaged limit), refinement studies (coarse increments are
exact sums of fine ones) and byte-identical CLI reruns possible.

Implementation: a Philox counter-based generator keyed on (seed, stream_id),
with the counter's upper words pinned to (substream, block).  Each block may
hold up to 2**64 * 4 draws, far beyond anything requested here.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Substream tags.  W1 drives the slow equation, W2 the fast one; LIMIT is a
# third independent stream used for the deviation-limit process.
SUBSTREAM_W1 = 0
SUBSTREAM_W2 = 1
SUBSTREAM_LIMIT = 2
SUBSTREAM_AUX = 3

_U64 = 2**64


class NoiseError(ValueError):
    """Raised for invalid noise addressing (bad seed, stream collision...)."""


def _as_u64(value: int, name: str) -> int:
    if not isinstance(value, (int, np.integer)):
        raise NoiseError(f"{name} must be an integer, got {type(value).__name__}")
    value = int(value)
    if not 0 <= value < _U64:
        raise NoiseError(f"{name} must lie in [0, 2**64), got {value}")
    return value


@dataclass(frozen=True)
class NoisePath:
    """Addressable Gaussian increments for one realization of the driving noise.

    Parameters
    ----------
    seed:
        Experiment-level seed, shared by every path of a batch.
    stream_id:
        Identifies one realization (typically the path index).  Two
        NoisePath objects with different stream ids are independent.
    """

    seed: int
    stream_id: int

    def __post_init__(self) -> None:
        _as_u64(self.seed, "seed")
        _as_u64(self.stream_id, "stream_id")

    def with_stream(self, stream_id: int) -> "NoisePath":
        return NoisePath(self.seed, stream_id)

    def _generator(self, substream: int, block: int) -> np.random.Generator:
        substream = _as_u64(substream, "substream")
        block = _as_u64(block, "block")
        bg = np.random.Philox(
            counter=[0, 0, substream, block],
            key=[self.seed, self.stream_id],
        )
        return np.random.Generator(bg)

    def normals(self, substream: int, block: int, shape) -> np.ndarray:
        """Standard normal draws for the given (substream, block) address."""
        return self._generator(substream, block).standard_normal(shape)

    def increments(self, substream: int, block: int, shape, dt: float) -> np.ndarray:
        """Brownian increments with variance ``dt`` per component."""
        if dt <= 0.0:
            raise NoiseError(f"increment variance dt must be positive, got {dt}")
        return np.sqrt(dt) * self.normals(substream, block, shape)

    def coarse_increment(
        self, substream: int, step: int, shape, dt: float, base_div: int = 1
    ) -> np.ndarray:
        """Increment over macro step ``step`` assembled from ``base_div`` sub-blocks.

        With ``base_div=1`` this is a single draw at block index ``step``.
        With ``base_div=m`` it is the exact (index-ordered) sum of the m
        sub-increments a run at step size dt/m would consume, so runs at
        different resolutions sharing the same seed see the same Brownian
        path.
        """
        if base_div < 1:
            raise NoiseError(f"base_div must be >= 1, got {base_div}")
        if base_div == 1:
            return self.increments(substream, step, shape, dt)
        total = np.zeros(shape)
        h = dt / base_div
        first = step * base_div
        for j in range(base_div):
            total += self.increments(substream, first + j, shape, h)
        return total
