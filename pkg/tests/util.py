"""Shared test fixtures: seeded random worlds and distributions."""

from __future__ import annotations

import itertools
from fractions import Fraction

from projrel.core import Signature, World, unpack_world, world_bits, world_from_pair_mask
from projrel.rng import mix64, substream
from projrel.stats import WorldletDistribution, undirected_k3_worlds

SIG = Signature.single_binary()
SIG_UC = Signature((("c", 1), ("e", 2)))


def rand_below(seed: int, i: int, bound: int) -> int:
    return mix64(substream(seed, i)) % bound


def random_world(signature: Signature, n: int, seed: int, i: int = 0) -> World:
    nbits = world_bits(signature, n)
    packed = mix64(substream(seed, i)) & ((1 << nbits) - 1)
    return unpack_world(signature, n, packed)


def random_undirected_world(n: int, seed: int, i: int = 0) -> World:
    nbits = n * (n - 1) // 2
    mask = mix64(substream(seed, i)) & ((1 << nbits) - 1)
    return world_from_pair_mask(SIG, n, mask)


def random_exchangeable_k3(seed: int, i: int = 0) -> WorldletDistribution:
    """Random exchangeable distribution on undirected 3-worlds (per-class
    weights drawn as small random integers)."""
    groups = undirected_k3_worlds(SIG)
    weights = [1 + rand_below(seed, 4 * i + j, 20) for j in range(4)]
    total = sum(
        w * len(groups[name])
        for w, name in zip(weights, ("empty", "single_edge", "two_edge", "triangle"))
    )
    entries = {}
    for w, name in zip(weights, ("empty", "single_edge", "two_edge", "triangle")):
        for world in groups[name]:
            entries[world] = Fraction(w, total)
    return WorldletDistribution(SIG, 3, entries, "undirected")


def column_mixture_k3(polytope, seed: int, i: int = 0) -> WorldletDistribution:
    """Random convex combination of polytope columns (feasible by design)."""
    k_cols = min(4, len(polytope.columns))
    picks = []
    weights = []
    for j in range(k_cols):
        picks.append(rand_below(seed, 100 * i + 2 * j, len(polytope.columns)))
        weights.append(1 + rand_below(seed, 100 * i + 2 * j + 1, 9))
    total = sum(weights)
    entries: dict = {}
    for col_idx, w in zip(picks, weights):
        col = polytope.columns[col_idx]
        for world, p in col.vector.entries.items():
            entries[world] = entries.get(world, Fraction(0)) + Fraction(w, total) * p
    return WorldletDistribution(SIG, polytope.k, entries, "undirected")


def chain_world(n: int) -> World:
    return World.build(SIG, n, {"e": [(i, i + 1) for i in range(1, n)]})


def star_world(n: int) -> World:
    return World.build(SIG, n, {"e": [(1, l) for l in range(2, n + 1)]})


def cycle3() -> World:
    return World.build(SIG, 3, {"e": [(1, 2), (2, 3), (3, 1)]})


def undirected_edges(n: int, pairs) -> World:
    edges = []
    for i, j in pairs:
        edges.append((i, j))
        edges.append((j, i))
    return World.build(SIG, n, {"e": edges})


def complete_bipartite(a: int, b: int) -> World:
    pairs = list(itertools.product(range(1, a + 1), range(a + 1, a + b + 1)))
    return undirected_edges(a + b, pairs)
