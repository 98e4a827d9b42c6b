"""Counter-based deterministic uniform streams keyed on index tuples.

Every random quantity in this package is derived by hashing (seed, key)
with a splitmix64-style finalizer chain.  There is no mutable generator
state: the value attached to an index tuple depends only on the seed and
the tuple itself, so prefixes of larger structures reproduce smaller ones
bit-for-bit and sampling parallelizes without coordination.

The accelerated backends reimplement the same chain on uint64 arrays;
``tests/test_backends.py`` pins exact agreement with this reference.
"""

from __future__ import annotations

from typing import Iterable

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

# domain tags keep tuple-keyed latents and sample substreams disjoint
TAG_TUPLE = 1
TAG_STREAM = 2


def mix64(x: int) -> int:
    """splitmix64 finalizer: a 64-bit bijective mixer."""
    x &= MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & MASK64
    x ^= x >> 31
    return x


def absorb(h: int, v: int) -> int:
    """Fold one 64-bit word into the running hash."""
    return mix64((h + GOLDEN + v) & MASK64)


def tuple_key(seed: int, index: Iterable[int]) -> int:
    """64-bit key for the latent variable attached to a sorted index tuple.

    The empty tuple keys the global latent.  Components are absorbed after
    the tuple length, so tuples of different lengths never collide by
    concatenation.
    """
    idx = tuple(index)
    h = absorb(mix64(seed & MASK64), TAG_TUPLE)
    h = absorb(h, len(idx))
    for c in idx:
        h = absorb(h, c)
    return h


def uniform_from_key(key: int) -> float:
    """Map a 64-bit key to a uniform float in [0, 1) with 53-bit resolution."""
    return (key >> 11) * 2.0**-53


def latent_uniform(seed: int, index: Iterable[int]) -> float:
    """The uniform latent value U_index for the given seed."""
    return uniform_from_key(tuple_key(seed, index))


def substream(seed: int, counter: int) -> int:
    """Derive an independent 64-bit sub-seed (e.g. one per Monte Carlo sample)."""
    h = absorb(mix64(seed & MASK64), TAG_STREAM)
    return absorb(h, counter)
