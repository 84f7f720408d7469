"""Gaussian batch generation from seeded pseudo-random or scrambled
low-discrepancy streams.

Both stream kinds produce batches from N(mean, sigma^2 I_d). The
low-discrepancy kind walks a scrambled Halton sequence (first d primes as
coordinate bases, seed-derived digit permutations) and maps each uniform
coordinate through the inverse normal CDF; a global point counter guarantees
that no underlying sequence index is ever consumed twice within one stream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtri

SAMPLER_KINDS = ("pseudo_random", "scrambled_halton")

# Salt mixed into seed material so the stream is decorrelated from other
# consumers (e.g. the initial-iterate draw) that share the same user seed.
_STREAM_SALT = 0x5A3D


def first_primes(count: int) -> list[int]:
    """The first `count` primes, by sieve (coordinate bases for Halton)."""
    if count < 1:
        raise ValueError("count must be positive")
    # n-th prime < n(ln n + ln ln n) for n >= 6; small cases padded.
    import math

    limit = 15 if count < 6 else int(count * (math.log(count) + math.log(math.log(count)))) + 10
    sieve = np.ones(limit + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, int(limit**0.5) + 1):
        if sieve[p]:
            sieve[p * p :: p] = False
    primes = np.flatnonzero(sieve)
    if len(primes) < count:  # pragma: no cover - bound above prevents this
        return first_primes(count * 2)[:count]
    return [int(p) for p in primes[:count]]


def radical_inverse(index: int, base: int, permutation: Optional[np.ndarray] = None) -> float:
    """Standard base-b radical inverse of a positive integer index.

    Digits of `index` in base `base` are reflected about the radix point;
    an optional digit permutation (fixing 0) is applied to each digit
    before reflection, which is how the scrambled sequence is built.
    """
    if base < 2:
        raise ValueError("base must be at least 2")
    if index < 1:
        raise ValueError("index must be positive")
    inv = 0.0
    scale = 1.0
    i = int(index)
    while i > 0:
        i, digit = divmod(i, base)
        if permutation is not None:
            digit = int(permutation[digit])
        scale /= base
        inv += scale * digit
    return inv


def scramble_permutation(base: int, seed: int) -> np.ndarray:
    """Seed-derived digit permutation of {0, ..., base-1} with perm[0] = 0.

    Fixing 0 keeps the implicit trailing zeros of every digit expansion
    inert, so scrambling never perturbs the sequence's low-discrepancy
    structure. Deterministic in (base, seed).
    """
    if base < 2:
        raise ValueError("base must be at least 2")
    rng = np.random.default_rng([_STREAM_SALT, int(seed), int(base)])
    perm = np.empty(base, dtype=np.int64)
    perm[0] = 0
    perm[1:] = 1 + rng.permutation(base - 1)
    return perm


def _radical_inverse_block(indices: np.ndarray, base: int, permutation: np.ndarray) -> np.ndarray:
    """Vectorized scrambled radical inverse over an int64 index array."""
    inv = np.zeros(indices.shape, dtype=float)
    scale = 1.0
    i = indices.copy()
    while i.any():
        i, digits = np.divmod(i, base)
        scale /= base
        inv += scale * permutation[digits]
    return inv


@dataclass
class SampleBatch:
    """One iteration's worth of Gaussian samples and the moments used."""

    points: np.ndarray  # (n, d)
    mean_used: np.ndarray
    variance_used: float


class SamplerStream:
    """Single-owner sequential source of Gaussian batches.

    kind "pseudo_random" wraps a seeded numpy Generator; kind
    "scrambled_halton" walks the scrambled Halton sequence starting at
    index 1 (index 0 is skipped: the all-zeros point has no finite normal
    preimage). `next_index` counts consumed points in both kinds and
    strictly increases; an index is never reused within one stream.
    """

    def __init__(self, kind: str, seed: int, dim: int):
        if kind not in SAMPLER_KINDS:
            raise ValueError(f"unknown sampler kind {kind!r}")
        if dim < 1:
            raise ValueError("dim must be positive")
        self.kind = kind
        self.seed = int(seed)
        self.dim = int(dim)
        self.next_index = 1
        if kind == "pseudo_random":
            self._rng = np.random.default_rng([_STREAM_SALT, self.seed])
            self._bases = None
            self._perms = None
        else:
            self._rng = None
            self._bases = first_primes(dim)
            self._perms = [scramble_permutation(b, self.seed) for b in self._bases]

    def standard_normal_block(self, n: int) -> np.ndarray:
        """Next n standard-normal points in R^d; advances the stream by n."""
        if n < 1:
            raise ValueError("n must be positive")
        if self.kind == "pseudo_random":
            block = self._rng.standard_normal((n, self.dim))
        else:
            indices = np.arange(self.next_index, self.next_index + n, dtype=np.int64)
            u = np.empty((n, self.dim))
            for j, (base, perm) in enumerate(zip(self._bases, self._perms)):
                u[:, j] = _radical_inverse_block(indices, base, perm)
            block = ndtri(u)
        self.next_index += n
        return block


def inverse_normal_cdf(u: float) -> float:
    """Quantile of the standard normal distribution at u in (0, 1)."""
    if not 0.0 < u < 1.0:
        raise ValueError("u must lie strictly inside (0, 1)")
    return float(ndtri(u))


def gaussian_batch(stream: SamplerStream, mean: np.ndarray, variance: float, n: int) -> SampleBatch:
    """Next n samples from N(mean, variance * I_d) on the given stream."""
    if variance <= 0:
        raise ValueError("variance must be positive")
    if n < 1:
        raise ValueError("n must be positive")
    mean = np.asarray(mean, dtype=float)
    if mean.shape != (stream.dim,):
        raise ValueError("mean dimension does not match the stream")
    z = stream.standard_normal_block(n)
    points = mean + np.sqrt(variance) * z
    return SampleBatch(points=points, mean_used=mean.copy(), variance_used=float(variance))
