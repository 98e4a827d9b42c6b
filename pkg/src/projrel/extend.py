"""Extendability: membership of a worldlet distribution in the convex set of
frequency distributions induced by size-n worlds.

Membership is decided by exact-rational LP feasibility over one frequency
column per isomorphism class of the size-n space (valid because frequency
vectors are isomorphism-invariant).  Certificates are verified by exact
re-substitution before they are returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import backends
from .core import (
    DEFAULT_WORLD_BUDGET,
    BudgetExceededError,
    InvalidArgumentError,
    IsoClassId,
    Signature,
    World,
    all_permutations,
    induce_subset,
    induce_tuple,
    pack_world,
    pair_slots,
    unpack_world,
    world_bits,
    world_from_pair_mask,
    pair_mask_of_world,
)
from .lp import solve_feasibility, verify_farkas, verify_feasible
from .stats import (
    UNDIRECTED_K3_CLASS_NAMES,
    FrequencyVector,
    WorldletDistribution,
    frequency_ordered,
    is_exchangeable,
    iso_average,
    marginalize,
    undirected_k3_worlds,
)


# ---------------------------------------------------------------------------
# isomorphism classes of whole world spaces


def _undirected_bitperms(n: int) -> np.ndarray:
    pairs = pair_slots(n)
    nbits = len(pairs)
    index = {pq: q for q, pq in enumerate(pairs)}
    out = np.empty((math.factorial(n), nbits), dtype=np.int64)
    for pi, p in enumerate(all_permutations(n)):
        for q, (i, j) in enumerate(pairs):
            a, b = p(i), p(j)
            dest = index[(a, b) if a < b else (b, a)]
            out[pi, nbits - 1 - q] = nbits - 1 - dest
    return out


def _directed_bitperms(signature: Signature, n: int) -> np.ndarray:
    from .core import perm_slot_maps

    maps = perm_slot_maps(signature, n)
    nbits = world_bits(signature, n)
    out = np.empty((len(maps), nbits), dtype=np.int64)
    for pi, (_, dest) in enumerate(maps):
        for s in range(nbits):
            out[pi, nbits - 1 - s] = nbits - 1 - dest[s]
    return out


def space_iso_classes(
    signature: Signature,
    n: int,
    convention: str = "directed",
    budget: int | None = None,
) -> list[IsoClassId]:
    """All isomorphism classes of the size-n world space, ascending by
    canonical packed value, with class sizes."""
    budget = DEFAULT_WORLD_BUDGET if budget is None else budget
    if convention == "undirected":
        nbits = n * (n - 1) // 2
    elif convention == "directed":
        nbits = world_bits(signature, n)
    else:
        raise InvalidArgumentError(f"unknown convention {convention!r}")
    count = 1 << nbits
    if count > budget:
        raise BudgetExceededError(f"iso classes of the size-{n} space", count, budget)
    masks = np.arange(count, dtype=np.uint64)
    if convention == "undirected":
        bitperms = _undirected_bitperms(n)
    else:
        bitperms = _directed_bitperms(signature, n)
    canon = backends.canonicalize_masks(masks, bitperms)
    values, counts = np.unique(canon, return_counts=True)
    out = []
    for v, c in zip(values.tolist(), counts.tolist()):
        if convention == "undirected":
            rep = world_from_pair_mask(signature, n, v)
        else:
            rep = unpack_world(signature, n, v)
        out.append(IsoClassId(rep, int(c)))
    return out


# ---------------------------------------------------------------------------
# the polytope of induced frequency distributions


@dataclass(frozen=True)
class PolytopeColumn:
    class_id: IsoClassId
    multiplicity: int
    vector: FrequencyVector


@dataclass(frozen=True)
class PolytopeInstance:
    signature: Signature
    k: int
    n: int
    convention: str
    columns: tuple[PolytopeColumn, ...]


def _triple_bits(n: int) -> np.ndarray:
    """For each 3-subset of [n], the edge-mask bit positions of its 3 pairs."""
    pairs = pair_slots(n)
    nbits = len(pairs)
    index = {pq: q for q, pq in enumerate(pairs)}
    import itertools

    triples = list(itertools.combinations(range(1, n + 1), 3))
    out = np.empty((len(triples), 3), dtype=np.int64)
    for t, (a, b, c) in enumerate(triples):
        out[t, 0] = nbits - 1 - index[(a, b)]
        out[t, 1] = nbits - 1 - index[(a, c)]
        out[t, 2] = nbits - 1 - index[(b, c)]
    return out


def undirected_k3_census(masks: Sequence[int] | np.ndarray, n: int) -> np.ndarray:
    """Per world (edge mask), the number of 3-subsets inducing each of the
    4 undirected 3-world classes (by edge count)."""
    arr = np.asarray(masks, dtype=np.uint64)
    return backends.triangle_census(arr, _triple_bits(n))


def _column_from_census(
    signature: Signature, n: int, counts: Sequence[int], class_id: IsoClassId
) -> FrequencyVector:
    groups = undirected_k3_worlds(signature)
    total = math.comb(n, 3)
    entries = {}
    for c, name in enumerate(UNDIRECTED_K3_CLASS_NAMES):
        members = groups[name]
        if counts[c]:
            per_world = Fraction(int(counts[c]), total * len(members))
            for w in members:
                entries[w] = per_world
    return FrequencyVector(signature, 3, entries, "undirected", n, "ordered", class_id)


def build_polytope(
    signature: Signature,
    k: int,
    n: int,
    convention: str = "undirected",
    budget: int | None = None,
) -> PolytopeInstance:
    """One frequency column per isomorphism class of the size-n space."""
    if k > n:
        raise InvalidArgumentError(f"k={k} > n={n}")
    classes = space_iso_classes(signature, n, convention, budget)
    fast = convention == "undirected" and k == 3
    columns = []
    if fast:
        masks = [pair_mask_of_world(c.canonical) for c in classes]
        census = undirected_k3_census(masks, n)
        for c, cls in enumerate(classes):
            columns.append(
                PolytopeColumn(cls, cls.class_size, _column_from_census(signature, n, census[c], cls))
            )
    else:
        for cls in classes:
            vec = frequency_ordered(cls.canonical, k, source_class=cls)
            columns.append(PolytopeColumn(cls, cls.class_size, vec))
    return PolytopeInstance(signature, k, n, convention, tuple(columns))


# ---------------------------------------------------------------------------
# membership certificates


@dataclass
class MembershipCertificate:
    status: str  # "feasible" | "infeasible"
    k: int
    n: int
    weights: list[tuple[IsoClassId, Fraction]] | None
    functional: list[tuple[World, Fraction]] | None
    margin: Fraction | None
    pivots: int

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"

    def to_json(self) -> dict:
        obj: dict = {"status": self.status, "k": self.k, "n": self.n}
        if self.weights is not None:
            obj["weights"] = [
                {"class": cid.canonical.to_json(), "class_size": cid.class_size, "weight": str(w)}
                for cid, w in self.weights
            ]
        if self.functional is not None:
            obj["separating_functional"] = [
                {"world": w.to_json(), "coef": str(c)} for w, c in self.functional
            ]
            obj["margin"] = str(self.margin)
        return obj


def _membership_rows(polytope: PolytopeInstance, target: WorldletDistribution):
    worlds = set(target.entries)
    for col in polytope.columns:
        worlds.update(col.vector.entries)
    row_worlds = sorted(worlds, key=pack_world)
    rows = []
    for w in row_worlds:
        rows.append([col.vector.prob(w) for col in polytope.columns])
    rows.append([Fraction(1)] * len(polytope.columns))
    rhs = [target.prob(w) for w in row_worlds] + [Fraction(1)]
    return row_worlds, rows, rhs


def check_extendable(
    Q: WorldletDistribution,
    n: int,
    polytope: PolytopeInstance | None = None,
    iso_average_first: bool = False,
    budget: int | None = None,
) -> MembershipCertificate:
    """Decide whether Q is the induced worldlet distribution of some size-n
    world distribution; certificates are exact and re-verified."""
    if Q.k > n:
        raise InvalidArgumentError(f"k={Q.k} > n={n}")
    exch = is_exchangeable(Q)
    if not exch:
        if iso_average_first:
            Q = iso_average(Q)
        else:
            w1, w2 = exch.witness
            raise InvalidArgumentError(
                "target is not exchangeable; isomorphic worlds "
                f"{w1} and {w2} have probabilities {Q.prob(w1)} != {Q.prob(w2)} "
                "(pass iso_average_first=True to average first)"
            )
    if polytope is None:
        polytope = build_polytope(Q.signature, Q.k, n, Q.convention, budget)
    row_worlds, rows, rhs = _membership_rows(polytope, Q)
    res = solve_feasibility(rows, rhs)
    if res.feasible:
        if not verify_feasible(rows, rhs, res.solution):
            raise RuntimeError("feasible certificate failed re-substitution")
        weights = [
            (col.class_id, x)
            for col, x in zip(polytope.columns, res.solution)
            if x != 0
        ]
        return MembershipCertificate("feasible", Q.k, n, weights, None, None, res.pivots)
    if not verify_farkas(rows, rhs, res.farkas):
        raise RuntimeError("Farkas certificate failed verification")
    coeffs = res.farkas[:-1]
    functional = [(w, c) for w, c in zip(row_worlds, coeffs)]
    value_target = sum(c * Q.prob(w) for w, c in functional)
    best_col = max(
        sum(c * col.vector.prob(w) for w, c in functional) for col in polytope.columns
    )
    margin = value_target - best_col
    if margin <= 0:
        raise RuntimeError("separating functional does not strictly separate")
    return MembershipCertificate(
        "infeasible", Q.k, n, None, functional, margin, res.pivots
    )


# ---------------------------------------------------------------------------
# the two-overlap necessary condition


@dataclass(frozen=True)
class ModularityItem:
    n: int
    world: World
    p: Fraction
    q: Fraction

    @property
    def p_squared(self) -> Fraction:
        return self.p * self.p

    @property
    def violated(self) -> bool:
        return self.q == 0

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "world": self.world.to_json(),
            "p": str(self.p),
            "q": str(self.q),
            "p_squared": str(self.p_squared),
            "violated": self.violated,
        }


@dataclass
class ModularityReport:
    checked: list[ModularityItem]

    @property
    def violations(self) -> list[ModularityItem]:
        return [it for it in self.checked if it.violated]

    def to_json(self) -> dict:
        return {
            "violations": [it.to_json() for it in self.violations],
            "checked": [it.to_json() for it in self.checked],
        }


def modularity_check(Q: WorldletDistribution) -> ModularityReport:
    """Necessary condition for Q to extend to any latent-variable model: every
    positive-probability n-world must admit positive probability on the set
    of (n+1)-worlds that restrict to it on both [n] and (1..n-1, n+1)."""
    if Q.k < 2:
        raise InvalidArgumentError("modularity check needs k >= 2")
    exch = is_exchangeable(Q)
    if not exch:
        w1, w2 = exch.witness
        raise InvalidArgumentError(
            f"modularity check requires an exchangeable target; witness {w1} vs {w2}"
        )
    checked = []
    for n in range(1, Q.k):
        Qn = marginalize(Q, n) if n < Q.k else Q
        Qn1 = marginalize(Q, n + 1) if n + 1 < Q.k else Q
        overlap = tuple(range(1, n)) + (n + 1,)
        for w in Qn.support():
            p = Qn.prob(w)
            q = Fraction(0)
            for w1, pr in Qn1.entries.items():
                if induce_subset(w1, tuple(range(1, n + 1))) == w and induce_tuple(w1, overlap) == w:
                    q += pr
            checked.append(ModularityItem(n, w, p, q))
    return ModularityReport(checked)


# ---------------------------------------------------------------------------
# scatter data for hull plots


@dataclass(frozen=True)
class ScatterRow:
    class_id: IsoClassId
    multiplicity: int
    x: Fraction
    y: Fraction
    vector: FrequencyVector


def _axis_worlds(
    signature: Signature, k: int, convention: str, axis: str
) -> list[World]:
    if convention == "undirected" and k == 3:
        groups = undirected_k3_worlds(signature)
        if axis in groups:
            return groups[axis]
    if axis.startswith("class:"):
        idx = int(axis.split(":", 1)[1])
        classes = space_iso_classes(signature, k, convention)
        if not 0 <= idx < len(classes):
            raise InvalidArgumentError(f"axis class index {idx} out of range")
        from .stats import iso_members  # local import to avoid a cycle

        return iso_members(classes[idx].canonical)
    raise InvalidArgumentError(
        f"unknown axis {axis!r}; use a class name or 'class:<index>'"
    )


def scatter_data(
    signature: Signature,
    k: int,
    n: int,
    axes: tuple[str, str] = ("single_edge", "two_edge"),
    convention: str = "undirected",
    polytope: PolytopeInstance | None = None,
) -> list[ScatterRow]:
    """Full frequency vectors of all size-n classes plus a 2-coordinate
    projection (total probability of two chosen worldlet classes).  No
    jitter is applied here; plotting concerns stay with consumers."""
    if polytope is None:
        polytope = build_polytope(signature, k, n, convention)
    ax_x = _axis_worlds(signature, k, convention, axes[0])
    ax_y = _axis_worlds(signature, k, convention, axes[1])
    rows = []
    for col in polytope.columns:
        x = sum((col.vector.prob(w) for w in ax_x), Fraction(0))
        y = sum((col.vector.prob(w) for w in ax_y), Fraction(0))
        rows.append(ScatterRow(col.class_id, col.multiplicity, x, y, col.vector))
    return rows
