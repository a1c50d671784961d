"""Parameter-vector primitives: seeded randomness, initialization, distance.

Parameter vectors are plain 1-D ``float64`` NumPy arrays throughout the
library. Randomness flows through :class:`RngHandle`, a value object naming
one independent PCG64 stream; every function that consumes randomness takes
either a handle or an already-opened ``numpy.random.Generator``, and is a
pure function of its inputs — same arguments, same result, on any platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backend


class DimensionError(ValueError):
    """Raised when array shapes or lengths do not line up."""


@dataclass(frozen=True)
class RngHandle:
    """Names one deterministic random stream as (seed, stream).

    Streams derived from the same seed with different stream indices are
    statistically independent (PCG64 seeded via ``SeedSequence(seed,
    spawn_key=(stream,))``), so callers may hand out per-slot or
    per-generation handles with plain integer arithmetic and never worry
    about overlap.
    """

    seed: int
    stream: int = 0

    def __post_init__(self):
        if self.seed < 0 or self.stream < 0:
            raise ValueError("seed and stream must be non-negative")

    def generator(self) -> np.random.Generator:
        """Open a fresh Generator positioned at the start of this stream."""
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.PCG64(seq))

    def offset(self, delta: int) -> "RngHandle":
        """A handle for stream ``stream + delta`` under the same seed."""
        return RngHandle(self.seed, self.stream + delta)


def as_generator(rng) -> np.random.Generator:
    """Accept an RngHandle or a Generator; return a Generator."""
    if isinstance(rng, RngHandle):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngHandle or numpy Generator, got {type(rng).__name__}")


def as_vector(values) -> np.ndarray:
    """Coerce to a contiguous 1-D float64 array (copying only if needed)."""
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {arr.shape}")
    return arr


def canberra_distance(x, y) -> float:
    """Canberra distance: sum_i |x_i - y_i| / (|x_i| + |y_i|).

    Coordinates where both entries are exactly zero contribute 0 (the 0/0
    term is defined away rather than propagated as NaN). Symmetric,
    non-negative, and zero iff the vectors are identical.
    """
    xv = as_vector(x)
    yv = as_vector(y)
    if xv.shape[0] != yv.shape[0]:
        raise DimensionError(
            f"length mismatch: {xv.shape[0]} vs {yv.shape[0]}")
    return backend.canberra(xv, yv)


def xavier_normal_init(fan_in: int, fan_out: int, count: int, rng) -> np.ndarray:
    """Draw ``count`` values from N(0, sqrt(2 / (fan_in + fan_out))^2)."""
    if fan_in < 1 or fan_out < 1:
        raise ValueError(f"fan_in and fan_out must be >= 1, got {fan_in}, {fan_out}")
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    std = math.sqrt(2.0 / (fan_in + fan_out))
    return as_generator(rng).normal(0.0, std, size=count)


def choose_indices(n: int, k: int, rng) -> np.ndarray:
    """k distinct indices drawn uniformly from range(n), without replacement."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if not 0 <= k <= n:
        raise ValueError(f"k must satisfy 0 <= k <= n, got k={k}, n={n}")
    if k == 0:
        return np.empty(0, dtype=np.intp)
    return as_generator(rng).choice(n, size=k, replace=False)
