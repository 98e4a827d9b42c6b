"""Exact worldlet frequency statistics.

Frequencies of induced size-k substructures ("worldlets") under the ordered
and unordered sampling models, two-step sampling through a world
distribution, marginalization, and exchangeability checking.  Everything in
this module is exact rational arithmetic; floating point appears only in
the Monte Carlo modules.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from types import MappingProxyType
from typing import Iterable, Mapping

from .core import (
    InvalidArgumentError,
    IsoClassId,
    Signature,
    World,
    all_permutations,
    apply_permutation,
    canonical_form,
    induce_subset,
    iso_members,
    pack_world,
)


class WorldletDistribution:
    """A probability assignment over the worlds of a fixed size k.

    Stored sparsely: worlds absent from ``entries`` have probability zero.
    Probabilities are exact rationals and must sum to exactly 1.  The
    ``convention`` tag ("directed" or "undirected") records which world
    space the distribution is meant to live in; it is serialization
    metadata and does not enter equality.
    """

    def __init__(
        self,
        signature: Signature,
        k: int,
        entries: Mapping[World, Fraction] | Iterable[tuple[World, Fraction]],
        convention: str = "directed",
    ):
        if k < 1:
            raise InvalidArgumentError(f"k={k} < 1")
        if convention not in ("directed", "undirected"):
            raise InvalidArgumentError(f"unknown convention {convention!r}")
        items = entries.items() if isinstance(entries, Mapping) else entries
        clean: dict[World, Fraction] = {}
        total = Fraction(0)
        for world, prob in items:
            prob = Fraction(prob)
            if prob < 0:
                raise InvalidArgumentError(f"negative probability {prob} for {world}")
            if world.signature != signature:
                raise InvalidArgumentError("entry signature mismatch")
            if world.n != k:
                raise InvalidArgumentError(f"entry world has size {world.n} != k={k}")
            if prob == 0:
                continue
            if world in clean:
                raise InvalidArgumentError(f"duplicate entry for {world}")
            clean[world] = prob
            total += prob
        if total != 1:
            raise InvalidArgumentError(f"probabilities sum to {total}, not 1")
        self.signature = signature
        self.k = k
        self.convention = convention
        self.entries = MappingProxyType(clean)

    def prob(self, world: World) -> Fraction:
        return self.entries.get(world, Fraction(0))

    def support(self) -> list[World]:
        return sorted(self.entries, key=pack_world)

    def items(self):
        return [(w, self.entries[w]) for w in self.support()]

    def __eq__(self, other):
        return (
            isinstance(other, WorldletDistribution)
            and self.signature == other.signature
            and self.k == other.k
            and dict(self.entries) == dict(other.entries)
        )

    def __repr__(self):
        return f"WorldletDistribution(k={self.k}, {len(self.entries)} worlds)"

    def to_json(self) -> dict:
        return {
            "signature": self.signature.to_json(),
            "k": self.k,
            "convention": self.convention,
            "entries": [
                {"world": w.to_json(), "prob": str(p)} for w, p in self.items()
            ],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "WorldletDistribution":
        signature = Signature.from_json(obj["signature"])
        entries = [
            (World.from_json(e["world"], signature), Fraction(e["prob"]))
            for e in obj["entries"]
        ]
        dist = cls(signature, int(obj["k"]), entries, obj.get("convention", "directed"))
        if dist.convention == "undirected":
            bad = undirected_violations(dist)
            if bad:
                world, reason = bad[0]
                raise InvalidArgumentError(
                    f"distribution tagged undirected but {world} violates the convention: {reason}"
                )
        return dist


def point_mass(world: World, convention: str = "directed") -> WorldletDistribution:
    return WorldletDistribution(
        world.signature, world.n, {world: Fraction(1)}, convention
    )


class FrequencyVector(WorldletDistribution):
    """The worldlet frequency point of one source world, as a distribution."""

    def __init__(
        self,
        signature: Signature,
        k: int,
        entries,
        convention: str,
        source_n: int,
        sampling: str,
        source_class: IsoClassId | None = None,
    ):
        super().__init__(signature, k, entries, convention)
        if sampling not in ("ordered", "unordered"):
            raise InvalidArgumentError(f"unknown sampling model {sampling!r}")
        self.source_n = source_n
        self.sampling = sampling
        self.source_class = source_class
        if sampling == "ordered":
            denom = math.factorial(source_n) // math.factorial(source_n - k)
        else:
            denom = math.comb(source_n, k)
        for world, prob in self.entries.items():
            if denom % prob.denominator != 0:
                raise InvalidArgumentError(
                    f"probability {prob} has denominator incompatible with {denom}"
                )


def _is_undirected_convention(w: World) -> bool:
    return not undirected_world_violations(w)


def undirected_world_violations(w: World) -> list[str]:
    """Reasons why w is not a loop-free symmetric (undirected) world."""
    out = []
    for name, arity in w.signature.relations:
        if arity != 2:
            continue
        tuples = w.tuples(name)
        for i, j in sorted(tuples):
            if i == j:
                out.append(f"self-loop {name}({i},{i})")
            elif (j, i) not in tuples:
                out.append(f"uni-directional edge {name}({i},{j})")
    return out


def undirected_violations(dist: WorldletDistribution) -> list[tuple[World, str]]:
    """Positive-probability worlds of dist violating the undirected convention."""
    out = []
    for w in dist.support():
        for reason in undirected_world_violations(w):
            out.append((w, reason))
    return out


def frequency_ordered(
    w: World, k: int, source_class: IsoClassId | None = None
) -> FrequencyVector:
    """Frequencies of ordered k-samples without replacement from w.

    A sample is a tuple of k distinct elements; the observed worldlet is the
    induced world relabeled by draw order.  Computed by iterating k-subsets
    and spreading each induced world over all k! relabelings, which
    enumerates exactly the tuples with that underlying set.
    """
    if not 1 <= k <= w.n:
        raise InvalidArgumentError(f"k={k} not in [1, {w.n}]")
    perms = list(all_permutations(k))
    counts: dict[World, int] = {}
    for I in itertools.combinations(range(1, w.n + 1), k):
        base = induce_subset(w, I)
        for p in perms:
            img = apply_permutation(base, p)
            counts[img] = counts.get(img, 0) + 1
    denom = math.comb(w.n, k) * math.factorial(k)
    entries = {world: Fraction(c, denom) for world, c in counts.items()}
    if source_class is None and math.factorial(w.n) <= 5040:
        source_class = canonical_form(w)
    convention = "undirected" if _is_undirected_convention(w) else "directed"
    return FrequencyVector(
        w.signature, k, entries, convention, w.n, "ordered", source_class
    )


def frequency_unordered(
    w: World, k: int, source_class: IsoClassId | None = None
) -> FrequencyVector:
    """Frequencies of unordered k-subsets of w, relabeled by original order."""
    if not 1 <= k <= w.n:
        raise InvalidArgumentError(f"k={k} not in [1, {w.n}]")
    counts: dict[World, int] = {}
    for I in itertools.combinations(range(1, w.n + 1), k):
        img = induce_subset(w, I)
        counts[img] = counts.get(img, 0) + 1
    denom = math.comb(w.n, k)
    entries = {world: Fraction(c, denom) for world, c in counts.items()}
    if source_class is None and math.factorial(w.n) <= 5040:
        source_class = canonical_form(w)
    convention = "undirected" if _is_undirected_convention(w) else "directed"
    return FrequencyVector(
        w.signature, k, entries, convention, w.n, "unordered", source_class
    )


def iso_average(v: WorldletDistribution) -> WorldletDistribution:
    """Average each probability uniformly over its isomorphism class.

    Applied to an unordered frequency vector this recovers the ordered one.
    Exchangeable inputs are fixed points.
    """
    acc: dict[World, Fraction] = {}
    for w, p in v.entries.items():
        members = iso_members(w)
        share = p / len(members)
        for img in members:
            acc[img] = acc.get(img, Fraction(0)) + share
    if isinstance(v, FrequencyVector):
        return FrequencyVector(
            v.signature,
            v.k,
            acc,
            v.convention,
            v.source_n,
            "ordered",
            v.source_class,
        )
    return WorldletDistribution(v.signature, v.k, acc, v.convention)


def fenstad(Q: WorldletDistribution, k: int) -> WorldletDistribution:
    """Two-step sampling: draw a world from Q, then an ordered k-sample from it."""
    if k > Q.k:
        raise InvalidArgumentError(f"k={k} exceeds the size {Q.k} of Q's worlds")
    acc: dict[World, Fraction] = {}
    for w, q in Q.entries.items():
        fv = frequency_ordered(w, k)
        for wk, p in fv.entries.items():
            acc[wk] = acc.get(wk, Fraction(0)) + q * p
    return WorldletDistribution(Q.signature, k, acc, Q.convention)


def marginalize(Q: WorldletDistribution, m: int) -> WorldletDistribution:
    """Restrict Q to the first m elements: sum over worlds agreeing on [m]."""
    if not 1 <= m <= Q.k:
        raise InvalidArgumentError(f"m={m} not in [1, {Q.k}]")
    prefix = tuple(range(1, m + 1))
    acc: dict[World, Fraction] = {}
    for w, q in Q.entries.items():
        sub = induce_subset(w, prefix)
        acc[sub] = acc.get(sub, Fraction(0)) + q
    return WorldletDistribution(Q.signature, m, acc, Q.convention)


@dataclass(frozen=True)
class ExchangeabilityResult:
    exchangeable: bool
    witness: tuple[World, World] | None

    def __bool__(self):
        return self.exchangeable


def is_exchangeable(
    Q: WorldletDistribution, budget: int | None = None
) -> ExchangeabilityResult:
    """Whether Q is constant on isomorphism classes; a violating pair if not."""
    from . import core

    budget = core.DEFAULT_PERM_BUDGET if budget is None else budget
    if math.factorial(Q.k) > budget:
        raise InvalidArgumentError(f"exchangeability check at k={Q.k} exceeds budget")
    seen: set[World] = set()
    for w in Q.support():
        if w in seen:
            continue
        members = iso_members(w)
        seen.update(members)
        p = Q.prob(w)
        for other in members:
            if Q.prob(other) != p:
                return ExchangeabilityResult(False, (w, other))
    return ExchangeabilityResult(True, None)


def eq7_exhaustive_check(
    signature: Signature, n: int, k: int, budget: int | None = None
) -> int:
    """Verify, over every world of size n, that iso-averaging the unordered
    census reproduces the ordered census (the identity relating the two
    sampling models), in cleared-denominator integer arithmetic.

    Returns -1 when the identity holds everywhere, else the first violating
    packed world.  Runs on the accelerated backends; ``tests`` additionally
    cross-check a sample of worlds against the rational-arithmetic path.
    """
    import itertools as _it

    import numpy as np

    from . import backends
    from .core import DEFAULT_WORLD_BUDGET, BudgetExceededError, slot_table, world_bits

    budget = DEFAULT_WORLD_BUDGET if budget is None else budget
    nbits_world = world_bits(signature, n)
    total = 1 << nbits_world
    if total > budget:
        raise BudgetExceededError(f"identity scan over size-{n} worlds", total, budget)
    nbits_k = world_bits(signature, k)
    n_ids = 1 << nbits_k
    slots_k, _ = slot_table(signature, k)
    _, index_n = slot_table(signature, n)

    def bits_for(index_tuple):
        row = np.empty(nbits_k, dtype=np.int64)
        for s_k, (r, tloc) in enumerate(slots_k):
            glob = tuple(index_tuple[c - 1] for c in tloc)
            row[nbits_k - 1 - s_k] = nbits_world - 1 - index_n[(r, glob)]
        return row

    tuple_bits = np.stack(
        [bits_for(t) for t in _it.permutations(range(1, n + 1), k)]
    )
    subset_bits = np.stack(
        [bits_for(t) for t in _it.combinations(range(1, n + 1), k)]
    )
    from .extend import _directed_bitperms

    canon = backends.canonicalize_masks(
        np.arange(n_ids, dtype=np.uint64), _directed_bitperms(signature, k)
    )
    values, canon_idx, counts = np.unique(canon, return_inverse=True, return_counts=True)
    iso_size = counts[canon_idx].astype(np.int64)
    order = np.argsort(canon_idx, kind="stable")
    class_members = order.astype(np.int64)
    class_offsets = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
    return backends.eq7_scan(
        total,
        tuple_bits,
        subset_bits,
        canon_idx.astype(np.int64),
        iso_size,
        class_members,
        class_offsets,
        math.factorial(k),
    )


# ---------------------------------------------------------------------------
# worldlet distributions over undirected 3-worlds (running examples)

UNDIRECTED_K3_CLASS_NAMES = ("empty", "single_edge", "two_edge", "triangle")


def undirected_k3_worlds(signature: Signature | None = None) -> dict[str, list[World]]:
    """The 8 loop-free symmetric 3-worlds grouped into their 4 classes."""
    from .core import world_from_pair_mask

    signature = signature or Signature.single_binary()
    groups: dict[str, list[World]] = {name: [] for name in UNDIRECTED_K3_CLASS_NAMES}
    for mask in range(8):
        w = world_from_pair_mask(signature, 3, mask)
        groups[UNDIRECTED_K3_CLASS_NAMES[bin(mask).count("1")]].append(w)
    return groups


def table1_rows(signature: Signature | None = None) -> dict[str, WorldletDistribution]:
    """The four running-example distributions on undirected 3-worlds.

    Per-world probabilities within each class: point mass on the empty
    graph, point mass on the triangle, 1/3 on each single-edge world, and
    1/4 on the empty graph plus 1/4 on each two-edge world.
    """
    signature = signature or Signature.single_binary()
    groups = undirected_k3_worlds(signature)
    rows: dict[str, WorldletDistribution] = {}
    rows["delta_E3"] = WorldletDistribution(
        signature, 3, {groups["empty"][0]: Fraction(1)}, "undirected"
    )
    rows["delta_K3"] = WorldletDistribution(
        signature, 3, {groups["triangle"][0]: Fraction(1)}, "undirected"
    )
    rows["plus"] = WorldletDistribution(
        signature,
        3,
        {w: Fraction(1, 3) for w in groups["single_edge"]},
        "undirected",
    )
    bipart = {groups["empty"][0]: Fraction(1, 4)}
    bipart.update({w: Fraction(1, 4) for w in groups["two_edge"]})
    rows["bipart"] = WorldletDistribution(signature, 3, bipart, "undirected")
    return rows
