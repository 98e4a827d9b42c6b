"""Relational core: substructures, cells, permutations, canonical forms."""

import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from projrel.core import (
    ArityCell,
    BudgetExceededError,
    InvalidArgumentError,
    Permutation,
    Signature,
    World,
    all_permutations,
    apply_permutation,
    canonical_form,
    cell_of,
    cell_permute,
    cell_to_id,
    decompose,
    enumerate_cells,
    enumerate_worlds,
    induce_subset,
    induce_tuple,
    induced_permutation,
    iso_members,
    pack_world,
    pair_mask_of_world,
    rank_permutation,
    recompose,
    unpack_world,
    world_from_pair_mask,
)
from util import SIG, SIG_UC, cycle3, random_world

# a 3-world with one unary (color) and one binary (edge) relation; its cell
# at (1,3) is the single directed edge 1->2, which pins the edge 1->3
FIG_WORLD = World.build(
    SIG_UC, 3, {"c": [(1,), (2,)], "e": [(1, 3), (2, 3), (2, 1)]}
)


class TestInduce:
    def test_identity_subset(self):
        w = random_world(SIG, 4, 11)
        assert induce_subset(w, (1, 2, 3, 4)) == w

    def test_cycle_subset(self):
        sub = induce_subset(cycle3(), (1, 2))
        assert sub == World.build(SIG, 2, {"e": [(1, 2)]})

    def test_unary_binary_world(self):
        sub = induce_subset(FIG_WORLD, (1, 3))
        assert sub == World.build(SIG_UC, 2, {"c": [(1,)], "e": [(1, 2)]})

    def test_tuple_reverses_labels(self):
        sub = induce_tuple(FIG_WORLD, (3, 1))
        assert sub == World.build(SIG_UC, 2, {"c": [(2,)], "e": [(2, 1)]})

    def test_sorted_tuple_equals_subset(self):
        w = random_world(SIG, 5, 12)
        assert induce_tuple(w, (2, 4, 5)) == induce_subset(w, (2, 4, 5))

    def test_cycle_tuple(self):
        sub = induce_tuple(cycle3(), (2, 1))
        assert sub == World.build(SIG, 2, {"e": [(2, 1)]})

    def test_rejects_bad_input(self):
        w = random_world(SIG, 3, 13)
        with pytest.raises(InvalidArgumentError):
            induce_subset(w, ())
        with pytest.raises(InvalidArgumentError):
            induce_subset(w, (1, 4))
        with pytest.raises(InvalidArgumentError):
            induce_tuple(w, (1, 1))

    @given(st.integers(0, 10_000), st.integers(2, 5))
    @settings(max_examples=60, deadline=None)
    def test_tuple_is_permuted_subset(self, seed, n):
        w = random_world(SIG, n, seed)
        elems = list(range(1, n + 1))
        import random

        rnd = random.Random(seed)
        m = rnd.randint(1, n)
        i = tuple(rnd.sample(elems, m))
        expected = apply_permutation(induce_subset(w, sorted(i)), rank_permutation(i))
        assert induce_tuple(w, i) == expected


class TestDecompose:
    def test_roundtrip_exhaustive_n3(self):
        for w in enumerate_worlds(SIG, 3):
            cells = decompose(w)
            assert recompose(SIG, 3, cells) == w

    def test_roundtrip_random(self):
        for i in range(300):
            n = 2 + i % 4
            w = random_world(SIG_UC, n, 17, i)
            assert recompose(SIG_UC, n, decompose(w)) == w

    @pytest.mark.slow
    def test_roundtrip_exhaustive_n4(self):
        for w in enumerate_worlds(SIG, 4):
            assert recompose(SIG, 4, decompose(w)) == w

    def test_roundtrip_random_large(self):
        for i in range(40):
            n = 6 + i % 3
            w = random_world(SIG, n, 117, i)
            assert recompose(SIG, n, decompose(w)) == w

    def test_empty_world_all_zero_cells(self):
        w = World.build(SIG, 3)
        for _, cell in decompose(w):
            assert all(not tuples for tuples in cell.data)

    def test_recompose_validates(self):
        w = random_world(SIG, 3, 19)
        cells = decompose(w)
        with pytest.raises(InvalidArgumentError):
            recompose(SIG, 3, cells[:-1])
        with pytest.raises(InvalidArgumentError):
            recompose(SIG, 3, cells + [cells[0]])

    def test_cell_restriction(self):
        # only tuples using exactly m distinct elements live in a cell
        cell = cell_of(FIG_WORLD, (1, 3))
        assert cell.tuples("e") == frozenset({(1, 2)})
        with pytest.raises(InvalidArgumentError):
            ArityCell.build(SIG, 2, {"e": [(1, 1)]})


class TestEnumerate:
    def test_counts(self):
        assert len(list(enumerate_worlds(SIG, 1))) == 2
        assert len(list(enumerate_worlds(SIG, 2))) == 16
        undirected3 = list(enumerate_worlds(SIG, 3, convention="undirected"))
        assert len(undirected3) == 8
        assert len({canonical_form(w).key() for w in undirected3}) == 4

    def test_budget(self):
        with pytest.raises(BudgetExceededError) as exc:
            list(enumerate_worlds(SIG, 3, budget=100))
        assert "512" in str(exc.value)

    def test_stream_splitting(self):
        full = list(enumerate_worlds(SIG, 2))
        head = list(enumerate_worlds(SIG, 2, stop=7))
        tail = list(enumerate_worlds(SIG, 2, start=7))
        assert head + tail == full

    def test_cells_binary(self):
        assert len(enumerate_cells(SIG, 1)) == 2  # self-loop or not
        cells2 = enumerate_cells(SIG, 2)
        assert len(cells2) == 4  # none, ->, <-, <->
        assert [sorted(c.tuples("e")) for c in cells2] == [
            [],
            [(1, 2)],
            [(2, 1)],
            [(1, 2), (2, 1)],
        ]

    def test_cells_unary_binary(self):
        assert len(enumerate_cells(SIG_UC, 1)) == 4

    @pytest.mark.parametrize(
        "sig,m",
        [(SIG, 1), (SIG, 2), (SIG_UC, 1), (SIG_UC, 2), (Signature((("t", 3),)), 2)],
    )
    def test_cell_count_formula(self, sig, m):
        expected = 1
        for _, arity in sig.relations:
            if arity < m:
                continue
            surjective = sum(
                1
                for t in itertools.product(range(1, m + 1), repeat=arity)
                if len(set(t)) == m
            )
            expected *= 1 << surjective
        assert len(enumerate_cells(sig, m)) == expected

    def test_cell_ids_roundtrip(self):
        for i, cell in enumerate(enumerate_cells(SIG_UC, 2)):
            assert cell_to_id(cell) == i


class TestPermutations:
    PI = Permutation((3, 1, 4, 2))  # 1->3, 2->1, 3->4, 4->2

    def test_identity(self):
        w = random_world(SIG, 4, 23)
        assert apply_permutation(w, Permutation.identity(4)) == w

    def test_swap(self):
        w = World.build(SIG, 2, {"e": [(1, 2)]})
        assert apply_permutation(w, Permutation((2, 1))) == World.build(
            SIG, 2, {"e": [(2, 1)]}
        )

    def test_four_cycle_example(self):
        w = World.build(SIG, 4, {"e": [(1, 2), (2, 4), (4, 1)]})
        img = apply_permutation(w, self.PI)
        assert img == World.build(SIG, 4, {"e": [(1, 2), (2, 3), (3, 1)]})

    def test_group_action(self):
        w = random_world(SIG, 3, 29)
        for p in all_permutations(3):
            for q in all_permutations(3):
                lhs = apply_permutation(apply_permutation(w, p), q)
                assert lhs == apply_permutation(w, q.compose(p))

    def test_induced_permutation_example(self):
        pi_i = induced_permutation(self.PI, (1, 4))
        assert tuple(sorted(self.PI(c) for c in (1, 4))) == (2, 3)
        assert pi_i.images == (2, 1)

    def test_induced_identity(self):
        p = Permutation.identity(5)
        assert induced_permutation(p, (2, 3, 5)).images == (1, 2, 3)

    def test_induced_reconstruction(self):
        # pi restricted to the tuple is recoverable from (pi i, pi_i)
        import random

        rnd = random.Random(31)
        for _ in range(300):
            n = rnd.randint(2, 7)
            images = list(range(1, n + 1))
            rnd.shuffle(images)
            p = Permutation(tuple(images))
            m = rnd.randint(1, n)
            i = tuple(sorted(rnd.sample(range(1, n + 1), m)))
            pi_i = induced_permutation(p, i)
            image_sorted = sorted(p(c) for c in i)
            for h, c in enumerate(i, start=1):
                assert p(c) == image_sorted[pi_i(h) - 1]

    def test_cell_permute_matches_world_exhaustive_n3(self):
        # the data cell of the permuted world at the permuted tuple equals
        # the induced permutation acting on the original cell
        for w in enumerate_worlds(SIG, 3):
            for p in all_permutations(3):
                pw = apply_permutation(w, p)
                for m in (1, 2):
                    for i in itertools.combinations(range(1, 4), m):
                        pi = tuple(sorted(p(c) for c in i))
                        lhs = cell_of(pw, pi)
                        rhs = cell_permute(cell_of(w, i), induced_permutation(p, i))
                        assert lhs == rhs

    def test_cell_permute_matches_world_sampled_n4(self):
        for idx in range(9):
            w = random_world(SIG_UC, 4, 37, idx)
            for p in all_permutations(4):
                pw = apply_permutation(w, p)
                for m in (1, 2):
                    for i in itertools.combinations(range(1, 5), m):
                        pi = tuple(sorted(p(c) for c in i))
                        lhs = cell_of(pw, pi)
                        rhs = cell_permute(cell_of(w, i), induced_permutation(p, i))
                        assert lhs == rhs

    def test_size_mismatch(self):
        w = random_world(SIG, 3, 41)
        with pytest.raises(InvalidArgumentError):
            apply_permutation(w, Permutation.identity(4))


class TestCanonical:
    def test_two_node_classes(self):
        a = World.build(SIG, 2, {"e": [(1, 2)]})
        b = World.build(SIG, 2, {"e": [(2, 1)]})
        ca, cb = canonical_form(a), canonical_form(b)
        assert ca == cb
        assert ca.class_size == 2

    def test_undirected_triangle_classes(self):
        single = world_from_pair_mask(SIG, 3, 0b100)
        assert canonical_form(single).class_size == 3
        empty = world_from_pair_mask(SIG, 3, 0)
        assert canonical_form(empty).class_size == 1

    def test_invariance_exhaustive(self):
        for w in enumerate_worlds(SIG, 3):
            cf = canonical_form(w)
            assert canonical_form(cf.canonical) == cf  # fixed point
            assert math.factorial(3) % cf.class_size == 0
            for p in all_permutations(3):
                assert canonical_form(apply_permutation(w, p)) == cf

    def test_invariance_sampled_n4(self):
        for i in range(25):
            w = random_world(SIG, 4, 43, i)
            cf = canonical_form(w)
            for p in all_permutations(4):
                assert canonical_form(apply_permutation(w, p)) == cf

    def test_budget(self):
        w = random_world(SIG, 5, 47)
        with pytest.raises(BudgetExceededError):
            canonical_form(w, budget=10)

    def test_iso_members(self):
        w = World.build(SIG, 2, {"e": [(1, 2)]})
        members = iso_members(w)
        assert len(members) == 2
        assert w in members


class TestJson:
    def test_world_roundtrip(self):
        w = FIG_WORLD
        obj = w.to_json(include_signature=True)
        assert World.from_json(obj) == w
        assert World.from_json(w.to_json(), SIG_UC) == w

    def test_signature_roundtrip(self):
        assert Signature.from_json(SIG_UC.to_json()) == SIG_UC

    def test_world_json_sorted_one_indexed(self):
        w = World.build(SIG, 3, {"e": [(3, 1), (1, 2)]})
        assert w.to_json()["relations"]["e"] == [[1, 2], [3, 1]]

    def test_signature_validation(self):
        with pytest.raises(InvalidArgumentError):
            Signature((("e", 2), ("e", 1)))
        with pytest.raises(InvalidArgumentError):
            Signature((("e", 0),))


class TestPacking:
    def test_pack_unpack_roundtrip(self):
        for i in range(50):
            w = random_world(SIG_UC, 3, 53, i)
            assert unpack_world(SIG_UC, 3, pack_world(w)) == w

    def test_pair_mask_roundtrip(self):
        for mask in range(64):
            w = world_from_pair_mask(SIG, 4, mask)
            assert pair_mask_of_world(w) == mask

    def test_pair_mask_rejects_directed(self):
        with pytest.raises(InvalidArgumentError):
            pair_mask_of_world(World.build(SIG, 2, {"e": [(1, 2)]}))
