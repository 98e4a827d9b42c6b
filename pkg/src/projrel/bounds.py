"""Concentration machinery: exponential tail bounds for subsample frequency
deviations, their union bound over the worldlet space, empirical deviation
measurement for samplers without a global latent, and search for single
worlds whose frequency vector approximates a target distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import stats as scipy_stats

from . import backends
from .ahk import AhkModel, exact_marginal, kernel_spec
from .core import (
    DEFAULT_WORLD_BUDGET,
    BudgetExceededError,
    InvalidArgumentError,
    IsoClassId,
    Signature,
    World,
    canonical_form,
    pair_mask_of_world,
    unpack_world,
    world_bits,
    world_from_pair_mask,
)
from .extend import _triple_bits, space_iso_classes
from .rng import mix64, substream
from .stats import (
    UNDIRECTED_K3_CLASS_NAMES,
    WorldletDistribution,
    frequency_ordered,
    undirected_k3_worlds,
)


@dataclass(frozen=True)
class BoundSpec:
    n: int
    k: int
    t: Fraction

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise InvalidArgumentError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")
        if not 0 < self.t <= 1:
            raise InvalidArgumentError(f"tolerance t={self.t} not in (0, 1]")


def tail_bound(spec: BoundSpec) -> float:
    """exp(-2 * floor(n/k) * t^2): the per-worldlet deviation tail bound."""
    return math.exp(-2.0 * (spec.n // spec.k) * float(spec.t) ** 2)


@dataclass(frozen=True)
class UnionBound:
    value: float
    n_worldlets: int
    min_n_below_one: int


def union_bound(spec: BoundSpec, n_worldlets: int) -> UnionBound:
    """2 * |worldlet space| * tail bound, plus the minimal n making it < 1."""
    value = 2.0 * n_worldlets * tail_bound(spec)
    threshold = math.log(2.0 * n_worldlets) / (2.0 * float(spec.t) ** 2)
    min_n = spec.k * max(1, math.floor(threshold) + 1)
    return UnionBound(value, n_worldlets, min_n)


def worldlet_space_size(signature: Signature, k: int) -> int:
    return 1 << world_bits(signature, k)


# ---------------------------------------------------------------------------
# empirical deviation of sampled worlds from the model marginal


@dataclass
class DeviationReport:
    k: int
    n: int
    samples: int
    t: Fraction
    max_deviations: list[Fraction]
    exceedances: int
    bound: UnionBound
    binomial_ok: bool

    @property
    def exceedance_fraction(self) -> Fraction:
        return Fraction(self.exceedances, self.samples)

    def to_json(self) -> dict:
        devs = sorted(float(d) for d in self.max_deviations)
        return {
            "k": self.k,
            "n": self.n,
            "samples": self.samples,
            "t": str(self.t),
            "exceedances": self.exceedances,
            "exceedance_fraction": str(self.exceedance_fraction),
            "union_bound": self.bound.value,
            "binomial_ok": self.binomial_ok,
            "deviation_quantiles": {
                "min": devs[0],
                "median": devs[len(devs) // 2],
                "max": devs[-1],
            },
        }


def empirical_deviation(
    model: AhkModel,
    k: int,
    n: int,
    samples: int,
    seed: int,
    t: Fraction = Fraction(1, 10),
    target: WorldletDistribution | None = None,
) -> DeviationReport:
    """Sample size-n worlds, compute each one's exact unordered k-sample
    census, and record the max-norm deviation from the model marginal.

    Requires a model without the global latent: the independence structure
    behind the tail bound fails when a global latent couples the samples.
    """
    if model.has_global_latent:
        raise InvalidArgumentError(
            "empirical deviation requires a model without the global latent"
        )
    if target is None:
        target = exact_marginal(model, k)
    spec = kernel_spec(model)
    if spec is None or k not in (2, 3):
        raise InvalidArgumentError("deviation sampling needs a kernel-compatible model")
    census = backends.sample_phat_census(spec, k, n, samples, seed)
    n_subsets = math.comb(n, k)
    n_ids = census.shape[1]
    targets = [
        target.prob(unpack_world(model.signature, k, wid)) for wid in range(n_ids)
    ]
    # max |count/C - q| over worldlets, exactly: scale by lcm(C, denominators)
    denom = n_subsets
    for q in targets:
        denom = denom * q.denominator // math.gcd(denom, q.denominator)
    scaled_t = [int(q * denom) for q in targets]
    mult = denom // n_subsets
    arr = census.astype(np.int64) * mult
    dev_scaled = np.abs(arr - np.array(scaled_t, dtype=np.int64)[None, :]).max(axis=1)
    max_devs = [Fraction(int(d), denom) for d in dev_scaled.tolist()]
    exceed = sum(1 for d in max_devs if d >= t)
    bound = union_bound(BoundSpec(n, k, t), worldlet_space_size(model.signature, k))
    p_bound = min(1.0, bound.value)
    crit = int(scipy_stats.binom.ppf(0.99, samples, p_bound))
    binomial_ok = exceed <= crit
    return DeviationReport(
        k, n, samples, t, max_devs, exceed, bound, binomial_ok
    )


# ---------------------------------------------------------------------------
# realizer search


@dataclass
class RealizerResult:
    world: World
    class_id: IsoClassId | None
    max_deviation: Fraction
    method: str
    evaluations: int

    def to_json(self) -> dict:
        return {
            "world": self.world.to_json(),
            "max_deviation": str(self.max_deviation),
            "method": self.method,
            "evaluations": self.evaluations,
        }


def realizer_deviation(
    Q: WorldletDistribution, w: World, class_aggregated: bool = False
) -> Fraction:
    """Exact max-norm distance between w's ordered frequency vector and Q.

    The default norm ranges over labeled worldlets; ``class_aggregated``
    compares isomorphism-class totals instead (an option, never the
    default).
    """
    fv = frequency_ordered(w, Q.k)
    worlds = set(Q.entries) | set(fv.entries)
    if not class_aggregated:
        dev = Fraction(0)
        for x in worlds:
            d = abs(fv.prob(x) - Q.prob(x))
            if d > dev:
                dev = d
        return dev
    from .core import canonical_form, iso_members

    dev = Fraction(0)
    seen: set[World] = set()
    for x in worlds:
        if x in seen:
            continue
        members = iso_members(x)
        seen.update(members)
        d = abs(
            sum((fv.prob(m) for m in members), Fraction(0))
            - sum((Q.prob(m) for m in members), Fraction(0))
        )
        if d > dev:
            dev = d
    return dev


def _undirected_k3_scaled_targets(Q: WorldletDistribution, n: int):
    """Per-class labeled probabilities of Q scaled to a common denominator
    with the census grid; returns (multipliers, targets, denom)."""
    groups = undirected_k3_worlds(Q.signature)
    n_subsets = math.comb(n, 3)
    per_class = []
    for name in UNDIRECTED_K3_CLASS_NAMES:
        members = groups[name]
        p = Q.prob(members[0])
        for m in members[1:]:
            if Q.prob(m) != p:
                return None  # not exchangeable in class coordinates
        per_class.append((p, len(members)))
    denom = 1
    for p, size in per_class:
        d = n_subsets * size
        denom = denom * d // math.gcd(denom, d)
        denom = denom * p.denominator // math.gcd(denom, p.denominator)
    mults = [denom // (n_subsets * size) for _, size in per_class]
    targets = [int(p * denom) for p, _ in per_class]
    return mults, targets, denom


def _exhaustive_fast_k3(Q: WorldletDistribution, n: int, budget: int):
    """Scan every undirected size-n world with the census kernel; exact."""
    nbits = n * (n - 1) // 2
    count = 1 << nbits
    if count > budget:
        raise BudgetExceededError(
            f"exhaustive realizer search at n={n}", count, budget
        )
    scaled = _undirected_k3_scaled_targets(Q, n)
    if scaled is None:
        return None
    mults, targets, denom = scaled
    masks = np.arange(count, dtype=np.uint64)
    census = backends.triangle_census(masks, _triple_bits(n))
    arr = census.astype(np.int64)
    dev = np.zeros(count, dtype=np.int64)
    for c in range(4):
        np.maximum(dev, np.abs(arr[:, c] * mults[c] - targets[c]), out=dev)
    best = int(dev.argmin())
    best_dev = Fraction(int(dev[best]), denom)
    world = world_from_pair_mask(Q.signature, n, best)
    return world, best_dev, count


def search_realizer(
    Q: WorldletDistribution,
    n: int,
    mode: str = "exhaustive",
    seed: int = 0,
    restarts: int = 32,
    budget: int | None = None,
) -> RealizerResult:
    """Find a size-n world whose frequency vector is close to Q in max norm.

    Exhaustive mode scans every isomorphism class (exact minimum); local
    mode runs steepest-descent single-flip search from seeded starts and
    returns the best found with no optimality claim.
    """
    budget = DEFAULT_WORLD_BUDGET if budget is None else budget
    if n < Q.k:
        raise InvalidArgumentError(f"n={n} < k={Q.k}")
    from .stats import undirected_violations

    fast = (
        Q.convention == "undirected"
        and Q.k == 3
        and len(Q.signature.relations) == 1
        and Q.signature.relations[0][1] == 2
        and not undirected_violations(Q)
    )
    if mode == "exhaustive":
        if fast:
            out = _exhaustive_fast_k3(Q, n, budget)
            if out is not None:
                world, dev, count = out
                cls = canonical_form(world) if math.factorial(n) <= 5040 else None
                return RealizerResult(world, cls, dev, "exhaustive", count)
        classes = space_iso_classes(Q.signature, n, Q.convention, budget)
        best = None
        for cls in classes:
            dev = realizer_deviation(Q, cls.canonical)
            if best is None or dev < best[1]:
                best = (cls, dev)
        cls, dev = best
        return RealizerResult(cls.canonical, cls, dev, "exhaustive", len(classes))
    if mode != "local":
        raise InvalidArgumentError(f"unknown mode {mode!r}")

    evaluate = (
        (lambda w: _fast_dev_single(Q, w, n)) if fast else (lambda w: realizer_deviation(Q, w))
    )
    if Q.convention == "undirected":
        nbits = n * (n - 1) // 2
        decode = lambda mask: world_from_pair_mask(Q.signature, n, mask)
    else:
        nbits = world_bits(Q.signature, n)
        decode = lambda mask: unpack_world(Q.signature, n, mask)
    best_world = None
    best_dev = None
    evals = 0
    for r in range(restarts):
        mask = mix64(substream(seed, r)) & ((1 << nbits) - 1)
        current = decode(mask)
        cur_dev = evaluate(current)
        evals += 1
        improved = True
        while improved:
            improved = False
            for b in range(nbits):
                cand_mask = mask ^ (1 << b)
                cand = decode(cand_mask)
                d = evaluate(cand)
                evals += 1
                if d < cur_dev:
                    cur_dev, mask, current = d, cand_mask, cand
                    improved = True
        if best_dev is None or cur_dev < best_dev:
            best_world, best_dev = current, cur_dev
        if best_dev == 0:
            break
    cls = canonical_form(best_world) if math.factorial(n) <= 5040 else None
    return RealizerResult(best_world, cls, best_dev, "local", evals)


def _fast_dev_single(Q: WorldletDistribution, w: World, n: int) -> Fraction:
    scaled = _undirected_k3_scaled_targets(Q, n)
    if scaled is None:
        return realizer_deviation(Q, w)
    mults, targets, denom = scaled
    census = backends.triangle_census(
        np.array([pair_mask_of_world(w)], dtype=np.uint64), _triple_bits(n)
    )[0]
    dev = max(
        abs(int(census[c]) * mults[c] - targets[c]) for c in range(4)
    )
    return Fraction(dev, denom)
