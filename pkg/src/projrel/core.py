"""Finite relational structures: signatures, labeled worlds, substructures,
arity-level data cells, and the permutation calculus that acts on all of them.

Conventions used throughout the package:

* Domain elements are 1-indexed: a world of size n lives on {1, ..., n}.
* A world stores, per relation, the set of argument tuples that hold.
* "Slots" enumerate all possible argument tuples of all relations, in
  (relation order, tuple lexicographic order).  A world packs into an
  integer whose bit for slot s carries weight 2**(S-1-s), so comparing
  packed integers compares presence strings slot-by-slot.  The canonical
  form of a world is the permuted image with the minimal packed integer;
  this is a fixed total order chosen for bit-reproducibility.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Sequence


class ProjrelError(Exception):
    """Base class for package errors."""


class InvalidArgumentError(ProjrelError, ValueError):
    """A caller violated an operation's precondition."""


class BudgetExceededError(ProjrelError, RuntimeError):
    """An enumeration would exceed the configured resource budget."""

    def __init__(self, what: str, count: int, budget: int):
        self.what = what
        self.count = count
        self.budget = budget
        super().__init__(
            f"{what} requires {count} items, exceeding the budget of {budget}"
        )


DEFAULT_WORLD_BUDGET = 1 << 22
DEFAULT_PERM_BUDGET = math.factorial(9)


@dataclass(frozen=True)
class Signature:
    """Named relations with arities; fixes the space of possible worlds."""

    relations: tuple[tuple[str, int], ...]

    def __post_init__(self):
        names = [name for name, _ in self.relations]
        if len(set(names)) != len(names):
            raise InvalidArgumentError(f"duplicate relation names in {names}")
        for name, arity in self.relations:
            if arity < 1:
                raise InvalidArgumentError(f"relation {name!r} has arity {arity} < 1")
        if not self.relations:
            raise InvalidArgumentError("signature must contain at least one relation")

    @property
    def arity(self) -> int:
        return max(a for _, a in self.relations)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.relations)

    def arity_of(self, name: str) -> int:
        for rel, a in self.relations:
            if rel == name:
                return a
        raise InvalidArgumentError(f"unknown relation {name!r}")

    def to_json(self) -> dict:
        return {"relations": [{"name": n, "arity": a} for n, a in self.relations]}

    @classmethod
    def from_json(cls, obj: Mapping) -> "Signature":
        rels = tuple((r["name"], int(r["arity"])) for r in obj["relations"])
        return cls(rels)

    @classmethod
    def single_binary(cls, name: str = "e") -> "Signature":
        return cls(((name, 2),))


@dataclass(frozen=True)
class World:
    """A finite labeled relational structure over the domain [n]."""

    signature: Signature
    n: int
    adjacency: tuple[frozenset[tuple[int, ...]], ...]

    def __post_init__(self):
        if self.n < 1:
            raise InvalidArgumentError(f"world size {self.n} < 1")
        if len(self.adjacency) != len(self.signature.relations):
            raise InvalidArgumentError("adjacency does not align with signature")
        for (name, arity), tuples in zip(self.signature.relations, self.adjacency):
            for t in tuples:
                if len(t) != arity:
                    raise InvalidArgumentError(f"{name!r} tuple {t} has wrong arity")
                if any(c < 1 or c > self.n for c in t):
                    raise InvalidArgumentError(
                        f"{name!r} tuple {t} outside domain [{self.n}]"
                    )

    @classmethod
    def build(
        cls,
        signature: Signature,
        n: int,
        relations: Mapping[str, Iterable[Sequence[int]]] | None = None,
    ) -> "World":
        relations = relations or {}
        unknown = set(relations) - set(signature.names)
        if unknown:
            raise InvalidArgumentError(f"unknown relations {sorted(unknown)}")
        adj = tuple(
            frozenset(tuple(t) for t in relations.get(name, ()))
            for name, _ in signature.relations
        )
        return cls(signature, n, adj)

    def tuples(self, name: str) -> frozenset[tuple[int, ...]]:
        for (rel, _), tuples in zip(self.signature.relations, self.adjacency):
            if rel == name:
                return tuples
        raise InvalidArgumentError(f"unknown relation {name!r}")

    def to_json(self, include_signature: bool = False) -> dict:
        obj: dict = {"n": self.n, "relations": {}}
        if include_signature:
            obj = {"signature": self.signature.to_json(), "n": self.n, "relations": {}}
        for (name, _), tuples in zip(self.signature.relations, self.adjacency):
            obj["relations"][name] = sorted(list(t) for t in tuples)
        return obj

    @classmethod
    def from_json(cls, obj: Mapping, signature: Signature | None = None) -> "World":
        if signature is None:
            if "signature" not in obj:
                raise InvalidArgumentError("world JSON carries no signature")
            signature = Signature.from_json(obj["signature"])
        return cls.build(signature, int(obj["n"]), obj.get("relations", {}))

    def __repr__(self):
        rels = {name: sorted(self.tuples(name)) for name in self.signature.names}
        return f"World(n={self.n}, {rels})"


@dataclass(frozen=True)
class Permutation:
    """A bijection of [n]; images[i-1] is the image of element i."""

    images: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.images) != list(range(1, len(self.images) + 1)):
            raise InvalidArgumentError(f"{self.images} is not a bijection of [n]")

    @property
    def n(self) -> int:
        return len(self.images)

    def __call__(self, i: int) -> int:
        return self.images[i - 1]

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for i, img in enumerate(self.images, start=1):
            inv[img - 1] = i
        return Permutation(tuple(inv))

    def compose(self, other: "Permutation") -> "Permutation":
        """self after other: (self.compose(other))(i) = self(other(i))."""
        if self.n != other.n:
            raise InvalidArgumentError("permutation sizes differ")
        return Permutation(tuple(self(other(i)) for i in range(1, self.n + 1)))

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(1, n + 1)))


def all_permutations(n: int) -> Iterator[Permutation]:
    for images in itertools.permutations(range(1, n + 1)):
        yield Permutation(images)


@dataclass(frozen=True)
class ArityCell:
    """The data a world carries on one m-element index tuple.

    ``data`` aligns with the signature's relations; for a relation of arity
    below m the entry is empty, otherwise it holds the tuples over [m] that
    use exactly the m distinct elements 1..m.
    """

    signature: Signature
    m: int
    data: tuple[frozenset[tuple[int, ...]], ...]

    def __post_init__(self):
        if not 1 <= self.m <= self.signature.arity:
            raise InvalidArgumentError(f"cell arity {self.m} out of range")
        for (name, arity), tuples in zip(self.signature.relations, self.data):
            for t in tuples:
                if arity < self.m:
                    raise InvalidArgumentError(
                        f"{name!r} has arity {arity} < m={self.m} but holds tuples"
                    )
                if len(t) != arity or set(t) != set(range(1, self.m + 1)):
                    raise InvalidArgumentError(
                        f"{name!r} tuple {t} does not use exactly the elements [{self.m}]"
                    )

    @classmethod
    def build(
        cls,
        signature: Signature,
        m: int,
        relations: Mapping[str, Iterable[Sequence[int]]] | None = None,
    ) -> "ArityCell":
        relations = relations or {}
        adj = tuple(
            frozenset(tuple(t) for t in relations.get(name, ()))
            for name, _ in signature.relations
        )
        return cls(signature, m, adj)

    def tuples(self, name: str) -> frozenset[tuple[int, ...]]:
        for (rel, _), tuples in zip(self.signature.relations, self.data):
            if rel == name:
                return tuples
        raise InvalidArgumentError(f"unknown relation {name!r}")

    def to_json(self) -> dict:
        return {
            name: sorted(list(t) for t in self.tuples(name))
            for name in self.signature.names
            if self.signature.arity_of(name) >= self.m
        }


@dataclass(frozen=True)
class IsoClassId:
    """Identifies an isomorphism class by its canonical representative."""

    canonical: World
    class_size: int

    def key(self) -> int:
        return pack_world(self.canonical)


# ---------------------------------------------------------------------------
# slot tables and packing


@lru_cache(maxsize=None)
def slot_table(signature: Signature, n: int) -> tuple[tuple[tuple[int, tuple[int, ...]], ...], dict]:
    """All argument slots of all relations, in (relation, tuple-lex) order.

    Returns (slots, index) where slots[s] = (relation_index, tuple) and
    index maps (relation_index, tuple) back to s.
    """
    slots = []
    for r, (_, arity) in enumerate(signature.relations):
        for t in itertools.product(range(1, n + 1), repeat=arity):
            slots.append((r, t))
    index = {slot: s for s, slot in enumerate(slots)}
    return tuple(slots), index


def world_bits(signature: Signature, n: int) -> int:
    return sum(n ** arity for _, arity in signature.relations)


def pack_world(w: World) -> int:
    """Pack a world into an integer; slot s carries weight 2**(S-1-s)."""
    slots, index = slot_table(w.signature, w.n)
    nbits = len(slots)
    packed = 0
    for r, tuples in enumerate(w.adjacency):
        for t in tuples:
            packed |= 1 << (nbits - 1 - index[(r, t)])
    return packed


def unpack_world(signature: Signature, n: int, packed: int) -> World:
    slots, _ = slot_table(signature, n)
    nbits = len(slots)
    adj: list[set] = [set() for _ in signature.relations]
    for s, (r, t) in enumerate(slots):
        if (packed >> (nbits - 1 - s)) & 1:
            adj[r].add(t)
    return World(signature, n, tuple(frozenset(a) for a in adj))


@lru_cache(maxsize=None)
def perm_slot_maps(signature: Signature, n: int) -> tuple[tuple[Permutation, tuple[int, ...]], ...]:
    """For every permutation of [n], the map slot -> image slot.

    Applying a permutation moves the bit at slot s (tuple t) to the slot of
    the componentwise image of t.
    """
    slots, index = slot_table(signature, n)
    out = []
    for p in all_permutations(n):
        dest = tuple(index[(r, tuple(p(c) for c in t))] for r, t in slots)
        out.append((p, dest))
    return tuple(out)


def _permute_packed(packed: int, dest: Sequence[int], nbits: int) -> int:
    out = 0
    for s in range(nbits):
        if (packed >> (nbits - 1 - s)) & 1:
            out |= 1 << (nbits - 1 - dest[s])
    return out


# ---------------------------------------------------------------------------
# substructures and cells


def _check_subset(n: int, I: Sequence[int]) -> tuple[int, ...]:
    I = tuple(I)
    if not I:
        raise InvalidArgumentError("element subset must be nonempty")
    if any(c < 1 or c > n for c in I):
        raise InvalidArgumentError(f"subset {I} outside domain [{n}]")
    if list(I) != sorted(set(I)):
        raise InvalidArgumentError(f"subset {I} must be sorted and duplicate-free")
    return I


def induce_subset(w: World, I: Sequence[int]) -> World:
    """The |I|-world induced by the sorted element subset I, relabeled to [|I|]."""
    I = _check_subset(w.n, I)
    relabel = {orig: pos for pos, orig in enumerate(I, start=1)}
    adj = []
    for tuples in w.adjacency:
        kept = frozenset(
            tuple(relabel[c] for c in t) for t in tuples if all(c in relabel for c in t)
        )
        adj.append(kept)
    return World(w.signature, len(I), tuple(adj))


def induce_tuple(w: World, i: Sequence[int]) -> World:
    """The |i|-world induced by a tuple of distinct elements, with i_h -> h."""
    i = tuple(i)
    if len(set(i)) != len(i):
        raise InvalidArgumentError(f"index tuple {i} has repeated components")
    if not i or any(c < 1 or c > w.n for c in i):
        raise InvalidArgumentError(f"index tuple {i} outside domain [{w.n}]")
    relabel = {orig: pos for pos, orig in enumerate(i, start=1)}
    adj = []
    for tuples in w.adjacency:
        kept = frozenset(
            tuple(relabel[c] for c in t) for t in tuples if all(c in relabel for c in t)
        )
        adj.append(kept)
    return World(w.signature, len(i), tuple(adj))


def cell_of(w: World, i: Sequence[int]) -> ArityCell:
    """The arity-|i| data cell of w at the sorted index tuple i."""
    i = _check_subset(w.n, i)
    m = len(i)
    sub = induce_subset(w, i)
    data = []
    for (name, arity), tuples in zip(w.signature.relations, sub.adjacency):
        if arity < m:
            data.append(frozenset())
        else:
            data.append(frozenset(t for t in tuples if len(set(t)) == m))
    return ArityCell(w.signature, m, tuple(data))


def decompose(w: World) -> list[tuple[tuple[int, ...], ArityCell]]:
    """All (index tuple, cell) factors of w, for m = 1..arity(signature)."""
    out = []
    for m in range(1, w.signature.arity + 1):
        for i in itertools.combinations(range(1, w.n + 1), m):
            out.append((i, cell_of(w, i)))
    return out


def recompose(
    signature: Signature, n: int, cells: Iterable[tuple[tuple[int, ...], ArityCell]]
) -> World:
    """Rebuild the unique world whose decomposition equals ``cells``."""
    expected = {
        i
        for m in range(1, signature.arity + 1)
        for i in itertools.combinations(range(1, n + 1), m)
    }
    seen = set()
    adj: list[set] = [set() for _ in signature.relations]
    for i, cell in cells:
        i = tuple(i)
        if i in seen:
            raise InvalidArgumentError(f"duplicate index tuple {i}")
        if i not in expected:
            raise InvalidArgumentError(f"unexpected index tuple {i}")
        if cell.m != len(i):
            raise InvalidArgumentError(f"cell arity {cell.m} != |{i}|")
        if cell.signature != signature:
            raise InvalidArgumentError("cell signature mismatch")
        seen.add(i)
        for r, tuples in enumerate(cell.data):
            for t in tuples:
                adj[r].add(tuple(i[h - 1] for h in t))
    missing = expected - seen
    if missing:
        raise InvalidArgumentError(f"missing index tuples, e.g. {sorted(missing)[0]}")
    return World(signature, n, tuple(frozenset(a) for a in adj))


# ---------------------------------------------------------------------------
# enumeration


def enumerate_worlds(
    signature: Signature,
    n: int,
    convention: str = "directed",
    budget: int | None = None,
    start: int = 0,
    stop: int | None = None,
) -> Iterator[World]:
    """Stream every world of size n exactly once, in packed-integer order.

    With ``convention="undirected"`` (single binary relation only) the
    stream is restricted to loop-free symmetric worlds, indexed by subsets
    of unordered pairs.  ``start``/``stop`` slice the index range so
    consumers can split the stream.
    """
    if n < 1:
        raise InvalidArgumentError(f"n={n} < 1")
    budget = DEFAULT_WORLD_BUDGET if budget is None else budget
    if convention == "undirected":
        count = 1 << (n * (n - 1) // 2)
        if count > budget:
            raise BudgetExceededError(f"enumerating undirected worlds at n={n}", count, budget)
        rel = _single_binary_name(signature)
        stop = count if stop is None else min(stop, count)
        for mask in range(start, stop):
            yield world_from_pair_mask(signature, n, mask, rel)
        return
    if convention != "directed":
        raise InvalidArgumentError(f"unknown convention {convention!r}")
    nbits = world_bits(signature, n)
    count = 1 << nbits
    if count > budget:
        raise BudgetExceededError(f"enumerating worlds at n={n}", count, budget)
    stop = count if stop is None else min(stop, count)
    for packed in range(start, stop):
        yield unpack_world(signature, n, packed)


@lru_cache(maxsize=None)
def restricted_slots(signature: Signature, m: int) -> tuple[tuple[int, tuple[int, ...]], ...]:
    """Slots of the arity-m value space: tuples over [m] using all m elements."""
    if not 1 <= m <= signature.arity:
        raise InvalidArgumentError(f"m={m} out of range for signature")
    slots = []
    for r, (_, arity) in enumerate(signature.relations):
        if arity < m:
            continue
        for t in itertools.product(range(1, m + 1), repeat=arity):
            if len(set(t)) == m:
                slots.append((r, t))
    return tuple(slots)


def cell_from_id(signature: Signature, m: int, cell_id: int) -> ArityCell:
    """Catalog entry ``cell_id``: bit j (LSB first) sets the j-th restricted slot."""
    slots = restricted_slots(signature, m)
    if not 0 <= cell_id < (1 << len(slots)):
        raise InvalidArgumentError(f"cell id {cell_id} out of range")
    adj: list[set] = [set() for _ in signature.relations]
    for j, (r, t) in enumerate(slots):
        if (cell_id >> j) & 1:
            adj[r].add(t)
    return ArityCell(signature, m, tuple(frozenset(a) for a in adj))


def cell_to_id(cell: ArityCell) -> int:
    slots = restricted_slots(cell.signature, cell.m)
    index = {slot: j for j, slot in enumerate(slots)}
    out = 0
    for r, tuples in enumerate(cell.data):
        for t in tuples:
            out |= 1 << index[(r, t)]
    return out


def enumerate_cells(signature: Signature, m: int) -> list[ArityCell]:
    """The full arity-m value space, in catalog (cell id) order."""
    slots = restricted_slots(signature, m)
    return [cell_from_id(signature, m, i) for i in range(1 << len(slots))]


# ---------------------------------------------------------------------------
# permutation actions


def apply_permutation(w: World, p: Permutation) -> World:
    """Relabel w by p: a tuple t holds in the image iff p^{-1}(t) holds in w."""
    if p.n != w.n:
        raise InvalidArgumentError(f"permutation size {p.n} != world size {w.n}")
    adj = tuple(
        frozenset(tuple(p(c) for c in t) for t in tuples) for tuples in w.adjacency
    )
    return World(w.signature, w.n, adj)


def induced_permutation(p: Permutation, i: Sequence[int]) -> Permutation:
    """The permutation of [m] that p induces on the sorted tuple i.

    Position h maps to the rank of p(i_h) within the image set {p(i_j)}.
    """
    i = _check_subset(p.n, i)
    images = [p(c) for c in i]
    ranks = {v: r for r, v in enumerate(sorted(images), start=1)}
    return Permutation(tuple(ranks[v] for v in images))


def cell_permute(cell: ArityCell, p: Permutation) -> ArityCell:
    """Relabel the m nodes of a cell by a permutation of [m]."""
    if p.n != cell.m:
        raise InvalidArgumentError(f"permutation size {p.n} != cell arity {cell.m}")
    data = tuple(
        frozenset(tuple(p(c) for c in t) for t in tuples) for tuples in cell.data
    )
    return ArityCell(cell.signature, cell.m, data)


def rank_permutation(i: Sequence[int]) -> Permutation:
    """The permutation sending the rank of i_h (in sorted order) to h.

    Satisfies induce_tuple(w, i) == apply_permutation(induce_subset(w, sorted(i)), p).
    """
    i = tuple(i)
    order = sorted(i)
    pos = {v: h for h, v in enumerate(i, start=1)}
    return Permutation(tuple(pos[v] for v in order))


# ---------------------------------------------------------------------------
# canonical forms


def canonical_form(w: World, budget: int | None = None) -> IsoClassId:
    """Canonical representative (minimal packed permuted image) and class size."""
    budget = DEFAULT_PERM_BUDGET if budget is None else budget
    nperms = math.factorial(w.n)
    if nperms > budget:
        raise BudgetExceededError(f"canonicalizing a world of size {w.n}", nperms, budget)
    slots, _ = slot_table(w.signature, w.n)
    nbits = len(slots)
    packed = pack_world(w)
    images = {
        _permute_packed(packed, dest, nbits) for _, dest in perm_slot_maps(w.signature, w.n)
    }
    best = min(images)
    return IsoClassId(unpack_world(w.signature, w.n, best), len(images))


def iso_members(w: World, budget: int | None = None) -> list[World]:
    """All distinct relabelings of w, in packed order."""
    budget = DEFAULT_PERM_BUDGET if budget is None else budget
    nperms = math.factorial(w.n)
    if nperms > budget:
        raise BudgetExceededError(f"orbit of a world of size {w.n}", nperms, budget)
    slots, _ = slot_table(w.signature, w.n)
    nbits = len(slots)
    packed = pack_world(w)
    images = {
        _permute_packed(packed, dest, nbits) for _, dest in perm_slot_maps(w.signature, w.n)
    }
    return [unpack_world(w.signature, w.n, x) for x in sorted(images)]


# ---------------------------------------------------------------------------
# undirected pair packing (single binary relation)


def _single_binary_name(signature: Signature) -> str:
    if len(signature.relations) != 1 or signature.relations[0][1] != 2:
        raise InvalidArgumentError(
            "the undirected convention requires a signature with one binary relation"
        )
    return signature.relations[0][0]


@lru_cache(maxsize=None)
def pair_slots(n: int) -> tuple[tuple[int, int], ...]:
    return tuple(itertools.combinations(range(1, n + 1), 2))


def world_from_pair_mask(signature: Signature, n: int, mask: int, rel: str | None = None) -> World:
    """Decode an edge mask (bit P-1-p for pair p) into a symmetric world."""
    rel = rel or _single_binary_name(signature)
    pairs = pair_slots(n)
    nbits = len(pairs)
    edges = set()
    for p, (i, j) in enumerate(pairs):
        if (mask >> (nbits - 1 - p)) & 1:
            edges.add((i, j))
            edges.add((j, i))
    return World.build(signature, n, {rel: edges})


def pair_mask_of_world(w: World) -> int:
    """Encode a symmetric loop-free world as an edge mask."""
    rel = _single_binary_name(w.signature)
    tuples = w.tuples(rel)
    pairs = pair_slots(w.n)
    nbits = len(pairs)
    mask = 0
    for p, (i, j) in enumerate(pairs):
        if (i, j) in tuples:
            if (j, i) not in tuples:
                raise InvalidArgumentError(f"world is not symmetric at {(i, j)}")
            mask |= 1 << (nbits - 1 - p)
        elif (j, i) in tuples:
            raise InvalidArgumentError(f"world is not symmetric at {(j, i)}")
    for i in range(1, w.n + 1):
        if (i, i) in tuples:
            raise InvalidArgumentError(f"world has a self-loop at {i}")
    return mask


def load_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
