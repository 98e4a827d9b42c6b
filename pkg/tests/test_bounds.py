"""Tail bounds, empirical deviations, and realizer search."""

import math
from fractions import Fraction

import pytest

from projrel.ahk import bipartite_model, constant_empty_model, erdos_renyi_model
from projrel.bounds import (
    BoundSpec,
    empirical_deviation,
    realizer_deviation,
    search_realizer,
    tail_bound,
    union_bound,
    worldlet_space_size,
)
from projrel.core import InvalidArgumentError, World
from projrel.stats import WorldletDistribution, table1_rows, undirected_k3_worlds
from util import SIG, complete_bipartite, random_exchangeable_k3

ROWS = table1_rows()


class TestTailBound:
    def test_values(self):
        assert tail_bound(BoundSpec(30, 3, Fraction(1, 10))) == pytest.approx(
            math.exp(-0.2)
        )
        assert tail_bound(BoundSpec(3, 3, Fraction(1))) == pytest.approx(math.exp(-2))

    def test_monotone_in_t_and_n(self):
        spec = lambda n, t: tail_bound(BoundSpec(n, 3, Fraction(t)))
        assert spec(30, "2/10") < spec(30, "1/10")
        assert spec(60, "1/10") < spec(30, "1/10")

    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            BoundSpec(2, 3, Fraction(1, 10))
        with pytest.raises(InvalidArgumentError):
            BoundSpec(3, 3, Fraction(2))


class TestUnionBound:
    def test_value_at_n3(self):
        ub = union_bound(BoundSpec(3, 3, Fraction(1)), 8)
        assert ub.value == pytest.approx(16 * math.exp(-2))
        assert ub.value > 1  # inconclusive at this scale

    def test_doubling_worldlets(self):
        spec = BoundSpec(30, 3, Fraction(1, 10))
        assert union_bound(spec, 16).value == pytest.approx(
            2 * union_bound(spec, 8).value
        )

    def test_minimal_n_threshold(self):
        ub = union_bound(BoundSpec(3, 3, Fraction(1, 10)), 8)
        expected = 3 * math.ceil(math.log(16) / 0.02)
        assert ub.min_n_below_one == expected == 417
        check = BoundSpec(ub.min_n_below_one, 3, Fraction(1, 10))
        assert 2 * 8 * tail_bound(check) < 1
        just_below = BoundSpec(ub.min_n_below_one - 3, 3, Fraction(1, 10))
        assert 2 * 8 * tail_bound(just_below) >= 1

    def test_worldlet_space_size(self):
        assert worldlet_space_size(SIG, 2) == 16
        assert worldlet_space_size(SIG, 3) == 512


class TestEmpiricalDeviation:
    def test_constant_model_zero(self):
        rep = empirical_deviation(constant_empty_model(), 2, 10, 200, 3)
        assert all(d == 0 for d in rep.max_deviations)
        assert rep.exceedances == 0

    def test_er_within_bound(self):
        rep = empirical_deviation(
            erdos_renyi_model(), 2, 30, 2000, 5, Fraction(1, 10)
        )
        assert rep.exceedance_fraction <= Fraction(min(1.0, rep.bound.value))
        assert rep.binomial_ok

    def test_rejects_global_latent(self):
        from projrel.ahk import AhkModel, ConstantCell

        model = AhkModel.create(
            SIG, True, {1: ConstantCell(1, 0), 2: ConstantCell(2, 0)}
        )
        with pytest.raises(InvalidArgumentError):
            empirical_deviation(model, 2, 10, 100, 7)

    def test_bipartite_deviation_shrinks(self):
        # the sampled deviation approaches the finite-n bias of the balanced
        # complete bipartite census
        meds = {}
        for n in (12, 24, 48):
            rep = empirical_deviation(
                bipartite_model(), 3, n, 400, 11, Fraction(1, 10)
            )
            devs = sorted(rep.max_deviations)
            meds[n] = devs[len(devs) // 2]
        assert meds[48] < meds[24] < meds[12]
        oracle = realizer_deviation(ROWS["bipart"], complete_bipartite(24, 24))
        assert abs(float(meds[48]) - float(oracle)) < 2 * float(oracle)


class TestRealizerSearch:
    def test_delta_e3_exact(self):
        for n in (4, 5, 6):
            res = search_realizer(ROWS["delta_E3"], n)
            assert res.max_deviation == 0
            assert res.world == World.build(SIG, n)

    def test_k33_value(self):
        dev = realizer_deviation(ROWS["bipart"], complete_bipartite(3, 3))
        assert dev == Fraction(3, 20)

    def test_class_aggregated_norm_option(self):
        k33 = complete_bipartite(3, 3)
        agg = realizer_deviation(ROWS["bipart"], k33, class_aggregated=True)
        # class totals: empty |1/10 - 1/4|, two-edge |9/10 - 3/4|
        assert agg == Fraction(3, 20)
        per_labeled = realizer_deviation(ROWS["plus"], k33)
        agg_plus = realizer_deviation(ROWS["plus"], k33, class_aggregated=True)
        assert agg_plus >= per_labeled  # class totals accumulate here

    def test_bipart_ladder_regression(self):
        expected = {4: Fraction(0), 5: Fraction(1, 10), 6: Fraction(1, 20), 7: Fraction(1, 28)}
        for n, want in expected.items():
            res = search_realizer(ROWS["bipart"], n)
            assert res.max_deviation == want, n

    def test_bipart_n4_exact_realizer_is_star(self):
        # the 3-star reproduces the bipart row exactly at n=4
        res = search_realizer(ROWS["bipart"], 4)
        assert res.max_deviation == 0
        from projrel.stats import frequency_ordered

        assert dict(frequency_ordered(res.world, 3).entries) == dict(
            ROWS["bipart"].entries
        )

    def test_mixture_bounded_away_from_zero(self):
        groups = undirected_k3_worlds(SIG)
        mix = WorldletDistribution(
            SIG,
            3,
            {groups["empty"][0]: Fraction(1, 2), groups["triangle"][0]: Fraction(1, 2)},
            "undirected",
        )
        assert search_realizer(mix, 6).max_deviation == Fraction(3, 10)
        assert search_realizer(mix, 7).max_deviation == Fraction(3, 10)

    def test_fast_path_matches_generic(self):
        # the census-kernel scan against the per-class rational evaluation
        from projrel.extend import space_iso_classes

        for i in range(4):
            q = random_exchangeable_k3(131, i)
            fast = search_realizer(q, 4)
            classes = space_iso_classes(SIG, 4, "undirected")
            best = min(realizer_deviation(q, c.canonical) for c in classes)
            assert fast.max_deviation == best

    def test_local_bounded_by_exhaustive(self):
        for i in range(3):
            q = random_exchangeable_k3(137, i)
            ex = search_realizer(q, 5, mode="exhaustive")
            loc = search_realizer(q, 5, mode="local", seed=7, restarts=6)
            assert loc.max_deviation >= ex.max_deviation

    def test_local_finds_exact_empty(self):
        res = search_realizer(ROWS["delta_E3"], 5, mode="local", seed=3, restarts=8)
        assert res.max_deviation == 0

    def test_budget(self):
        from projrel.core import BudgetExceededError

        with pytest.raises(BudgetExceededError):
            search_realizer(ROWS["bipart"], 10, budget=1000)
