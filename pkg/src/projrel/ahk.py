"""Latent-variable models for projective relational sampling.

A model carries one permutation-equivariant cell function per arity level.
Sampling a size-n world draws one uniform latent per index subset (plus an
optional global latent), evaluates the cell functions, and recomposes.
Latents are derived from (seed, index tuple) by a counter-based stream, so
restricting a size-n sample to [m] reproduces the size-m sample for the
same seed exactly; projectivity holds by construction, not on average.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np
from scipy import stats as scipy_stats

from . import backends
from .core import (
    InvalidArgumentError,
    Permutation,
    ProjrelError,
    Signature,
    World,
    all_permutations,
    cell_from_id,
    cell_permute,
    cell_to_id,
    induce_subset,
    induce_tuple,
    recompose,
    restricted_slots,
    unpack_world,
    pack_world,
)
from .rng import latent_uniform, substream
from .stats import WorldletDistribution


class GlobalLatentDependenceError(ProjrelError):
    """Raised when stripping the global latent from a model that uses it."""

    def __init__(self, m: int, u_a, u_b, out_a: int, out_b: int):
        self.m = m
        self.witness = (u_a, u_b, out_a, out_b)
        super().__init__(
            f"arity-{m} function depends on the global latent: "
            f"inputs {u_a} vs {u_b} give cells {out_a} vs {out_b}"
        )


# ---------------------------------------------------------------------------
# latent vector layout (graded lexicographic over index subsets)


def latent_layout(m: int, has_global: bool) -> list[tuple[int, ...]]:
    """Positions of the latent vector for an m-tuple: the subsets of [m],
    ordered by size then lexicographically; the empty set leads when the
    global latent is present."""
    out: list[tuple[int, ...]] = [()] if has_global else []
    for size in range(1, m + 1):
        out.extend(itertools.combinations(range(1, m + 1), size))
    return out


def component_names(m: int, has_global: bool) -> list[str]:
    return [
        "u0" if sub == () else "u" + "".join(str(c) for c in sub)
        for sub in latent_layout(m, has_global)
    ]


def permute_latents(
    u: Sequence[float], p: Permutation, m: int, has_global: bool
) -> tuple[float, ...]:
    """The action of a permutation of [m] on a latent vector: position of a
    subset receives the value held at the position of its image."""
    layout = latent_layout(m, has_global)
    pos = {sub: i for i, sub in enumerate(layout)}
    out = []
    for sub in layout:
        image = tuple(sorted(p(c) for c in sub))
        out.append(u[pos[image]])
    return tuple(out)


# ---------------------------------------------------------------------------
# cell functions


class EquivariantFunction:
    """Maps a latent vector for an m-tuple to an arity-m cell id."""

    m: int

    def evaluate(self, u: Sequence[float], has_global: bool) -> int:
        raise NotImplementedError

    def references_global(self) -> bool:
        return False

    def to_json(self) -> dict:
        raise NotImplementedError


def _pair_components(u: Sequence[float], has_global: bool) -> tuple[float, float, float]:
    off = 1 if has_global else 0
    return u[off], u[off + 1], u[off + 2]


@dataclass(frozen=True)
class ConstantCell(EquivariantFunction):
    m: int
    cell_id: int

    def evaluate(self, u, has_global):
        return self.cell_id

    def to_json(self):
        return {"builtin": "constant", "cell_id": self.cell_id}


@dataclass(frozen=True)
class ErdosRenyiPair(EquivariantFunction):
    """Undirected edge with probability p, given a random orientation by
    comparing the endpoint latents."""

    p: Fraction
    m: int = 2

    def evaluate(self, u, has_global):
        u1, u2, u12 = _pair_components(u, has_global)
        if u12 < float(self.p):
            if u1 < u2:
                return 1
            if u2 < u1:
                return 2
        return 0

    def to_json(self):
        return {"builtin": "erdos_renyi", "p": str(self.p)}


@dataclass(frozen=True)
class BlockModelPair(EquivariantFunction):
    """Stochastic block model pair function: endpoint latents pick blocks via
    interval boundaries; a symmetric edge appears with the block-pair
    probability.  The probability matrix must be symmetric."""

    boundaries: tuple[Fraction, ...]
    probs: tuple[tuple[Fraction, ...], ...]
    m: int = 2

    def __post_init__(self):
        k = len(self.boundaries) + 1
        if len(self.probs) != k or any(len(row) != k for row in self.probs):
            raise InvalidArgumentError("block probability matrix shape mismatch")
        for i in range(k):
            for j in range(k):
                if self.probs[i][j] != self.probs[j][i]:
                    raise InvalidArgumentError("block probabilities must be symmetric")
                if not 0 <= self.probs[i][j] <= 1:
                    raise InvalidArgumentError("block probabilities must be in [0,1]")
        if list(self.boundaries) != sorted(self.boundaries) or any(
            not 0 < b < 1 for b in self.boundaries
        ):
            raise InvalidArgumentError("boundaries must be increasing within (0,1)")

    def block_of(self, u: float) -> int:
        b = 0
        while b < len(self.boundaries) and u >= float(self.boundaries[b]):
            b += 1
        return b

    def block_probability(self, b: int) -> Fraction:
        lo = Fraction(0) if b == 0 else self.boundaries[b - 1]
        hi = Fraction(1) if b == len(self.boundaries) else self.boundaries[b]
        return hi - lo

    def evaluate(self, u, has_global):
        u1, u2, u12 = _pair_components(u, has_global)
        prob = self.probs[self.block_of(u1)][self.block_of(u2)]
        return 3 if u12 < float(prob) else 0

    def to_json(self):
        return {
            "builtin": "block_model",
            "boundaries": [str(b) for b in self.boundaries],
            "probs": [[str(p) for p in row] for row in self.probs],
        }


@dataclass(frozen=True)
class PiecewiseCdf:
    """A cdf on [0,1] given by knots; duplicate x-values encode jumps and the
    function is right-continuous at them."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        xs = [x for x, _ in self.points]
        ys = [y for _, y in self.points]
        if len(self.points) < 2 or xs != sorted(xs) or ys != sorted(ys):
            raise InvalidArgumentError("cdf knots must be nondecreasing")
        if xs[0] != 0.0 or xs[-1] != 1.0 or ys[-1] != 1.0 or ys[0] < 0.0:
            raise InvalidArgumentError("cdf must span x in [0,1] and end at 1")

    def value(self, x: float) -> float:
        xs = [p[0] for p in self.points]
        ys = [p[1] for p in self.points]
        if x < xs[0]:
            return ys[0]
        j = 0
        for t in range(len(xs)):
            if xs[t] <= x:
                j = t
            else:
                break
        if xs[j] == x or j == len(xs) - 1:
            return ys[j]
        return ys[j] + (x - xs[j]) / (xs[j + 1] - xs[j]) * (ys[j + 1] - ys[j])

    def inverse(self, u: float) -> float:
        """Generalized inverse: inf{d : F(d) >= u}."""
        xs = [p[0] for p in self.points]
        ys = [p[1] for p in self.points]
        if u <= ys[0]:
            return xs[0]
        for t in range(1, len(xs)):
            if ys[t] >= u:
                if ys[t] == ys[t - 1] or xs[t] == xs[t - 1]:
                    return xs[t]
                frac = (u - ys[t - 1]) / (ys[t] - ys[t - 1])
                return xs[t - 1] + frac * (xs[t] - xs[t - 1])
        return xs[-1]

    def to_json(self):
        return [[x, y] for x, y in self.points]


IDENTITY_CDF = PiecewiseCdf(((0.0, 0.0), (1.0, 1.0)))


@dataclass(frozen=True)
class DegreeModelPair(EquivariantFunction):
    """Pair function whose conditional mean normalized out-degree follows the
    generalized inverse of the supplied cdf."""

    cdf: PiecewiseCdf
    m: int = 2

    def evaluate(self, u, has_global):
        u1, u2, u12 = _pair_components(u, has_global)
        fv = self.cdf.value(u12)
        return (1 if u1 >= fv else 0) + (2 if u2 >= fv else 0)

    def to_json(self):
        return {"builtin": "degree_model", "cdf": self.cdf.to_json()}


_OP_CODES = {"<": 0, "<=": 1, ">": 2, ">=": 3}


@dataclass(frozen=True)
class Comparison:
    lhs: str | Fraction
    op: str
    rhs: str | Fraction

    def __post_init__(self):
        if self.op not in _OP_CODES:
            raise InvalidArgumentError(f"unknown comparison operator {self.op!r}")


@dataclass(frozen=True)
class Rule:
    guard: tuple[Comparison, ...]  # empty guard = always fires
    out_cell: int


@dataclass(frozen=True)
class RuleTable(EquivariantFunction):
    """First-match rule table over comparisons of latent components and
    rational constants.  The final rule must be unconditional.  Guard
    constants are evaluated in float64, matching the kernel backends."""

    m: int
    rules: tuple[Rule, ...]

    def __post_init__(self):
        if not self.rules or self.rules[-1].guard:
            raise InvalidArgumentError("rule table must end with an unconditional rule")

    def _resolve(self, term, names: Mapping[str, int], u):
        if isinstance(term, str):
            if term not in names:
                raise InvalidArgumentError(f"unknown latent component {term!r}")
            return u[names[term]]
        return float(term)

    def evaluate(self, u, has_global):
        names = {nm: i for i, nm in enumerate(component_names(self.m, has_global))}
        for rule in self.rules:
            ok = True
            for cmp_ in rule.guard:
                lhs = self._resolve(cmp_.lhs, names, u)
                rhs = self._resolve(cmp_.rhs, names, u)
                if cmp_.op == "<":
                    ok = lhs < rhs
                elif cmp_.op == "<=":
                    ok = lhs <= rhs
                elif cmp_.op == ">":
                    ok = lhs > rhs
                else:
                    ok = lhs >= rhs
                if not ok:
                    break
            if ok:
                return rule.out_cell
        raise AssertionError("unreachable: final rule is unconditional")

    def references_global(self) -> bool:
        for rule in self.rules:
            for cmp_ in rule.guard:
                if cmp_.lhs == "u0" or cmp_.rhs == "u0":
                    return True
        return False

    def substitute_global(self, anchor: Fraction) -> "RuleTable":
        rules = []
        for rule in self.rules:
            guard = tuple(
                Comparison(
                    anchor if c.lhs == "u0" else c.lhs,
                    c.op,
                    anchor if c.rhs == "u0" else c.rhs,
                )
                for c in rule.guard
            )
            rules.append(Rule(guard, rule.out_cell))
        return RuleTable(self.m, tuple(rules))

    def to_json(self):
        out = []
        for rule in self.rules:
            if rule.guard:
                out.append(
                    {
                        "if": [
                            [str(c.lhs), c.op, str(c.rhs)] for c in rule.guard
                        ],
                        "then": rule.out_cell,
                    }
                )
            else:
                out.append({"else": rule.out_cell})
        return {"rules": out}


# ---------------------------------------------------------------------------
# models


@dataclass
class EquivarianceReport:
    passed: bool
    trials: int
    counterexample: tuple | None  # (u, permutation, f(u), f(pi u), pi f(u))


def check_equivariance(
    f: EquivariantFunction,
    m: int,
    trials: int,
    seed: int,
    has_global: bool = True,
    signature: Signature | None = None,
) -> EquivarianceReport:
    """Exhaustively over permutations of [m], Monte Carlo over latent vectors:
    evaluating on permuted latents must equal permuting the output cell."""
    signature = signature or Signature.single_binary()
    layout = latent_layout(m, has_global)
    perms = list(all_permutations(m))
    for t in range(trials):
        sj = substream(seed, t)
        u = tuple(latent_uniform(sj, (pos,)) for pos in range(len(layout)))
        base = f.evaluate(u, has_global)
        for p in perms:
            pu = permute_latents(u, p, m, has_global)
            lhs = f.evaluate(pu, has_global)
            rhs = cell_to_id(cell_permute(cell_from_id(signature, m, base), p))
            if lhs != rhs:
                return EquivarianceReport(False, t + 1, (u, p, base, lhs, rhs))
    return EquivarianceReport(True, trials, None)


@dataclass
class AhkModel:
    signature: Signature
    has_global_latent: bool
    functions: dict[int, EquivariantFunction]

    @classmethod
    def create(
        cls,
        signature: Signature,
        has_global_latent: bool,
        functions: Mapping[int, EquivariantFunction],
        validate: bool = True,
        trials: int = 64,
        seed: int = 2024,
    ) -> "AhkModel":
        functions = dict(functions)
        arity = signature.arity
        if sorted(functions) != list(range(1, arity + 1)):
            raise InvalidArgumentError(
                f"need exactly one function per arity level 1..{arity}"
            )
        for m, f in functions.items():
            n_cells = 1 << len(restricted_slots(signature, m))
            probe = f.evaluate(
                tuple(0.5 for _ in latent_layout(m, has_global_latent)),
                has_global_latent,
            )
            if not 0 <= probe < n_cells:
                raise InvalidArgumentError(f"arity-{m} function emits cell id {probe}")
            if not has_global_latent and f.references_global():
                raise InvalidArgumentError(
                    f"arity-{m} function references u0 but the model has no global latent"
                )
            if validate:
                rep = check_equivariance(
                    f, m, trials, seed + m, has_global_latent, signature
                )
                if not rep.passed:
                    u, p, base, lhs, rhs = rep.counterexample
                    raise InvalidArgumentError(
                        f"arity-{m} function is not permutation equivariant: "
                        f"u={u}, pi={p.images}, f(pi u)={lhs} != pi f(u)={rhs}"
                    )
        return cls(signature, has_global_latent, functions)

    def to_json(self) -> dict:
        return {
            "signature": self.signature.to_json(),
            "global_latent": self.has_global_latent,
            "functions": {str(m): f.to_json() for m, f in sorted(self.functions.items())},
        }


def model_from_json(obj: Mapping, validate: bool = True) -> AhkModel:
    signature = Signature.from_json(obj["signature"])
    functions: dict[int, EquivariantFunction] = {}
    for m_str, fobj in obj["functions"].items():
        m = int(m_str)
        functions[m] = _function_from_json(fobj, m, signature)
    return AhkModel.create(
        signature, bool(obj.get("global_latent", False)), functions, validate=validate
    )


def _cell_id_from_spec(spec, signature: Signature, m: int) -> int:
    if isinstance(spec, int):
        return spec
    from .core import ArityCell

    adj = {name: spec.get(name, []) for name in signature.names}
    built = ArityCell.build(signature, m, adj)
    return cell_to_id(built)


def _function_from_json(fobj: Mapping, m: int, signature: Signature) -> EquivariantFunction:
    if "builtin" in fobj:
        kind = fobj["builtin"]
        if kind == "constant":
            if "cell_id" in fobj:
                return ConstantCell(m, int(fobj["cell_id"]))
            return ConstantCell(m, _cell_id_from_spec(fobj["cell"], signature, m))
        if kind == "erdos_renyi":
            return ErdosRenyiPair(Fraction(fobj["p"]))
        if kind == "block_model":
            return BlockModelPair(
                tuple(Fraction(b) for b in fobj["boundaries"]),
                tuple(tuple(Fraction(p) for p in row) for row in fobj["probs"]),
            )
        if kind == "degree_model":
            return DegreeModelPair(PiecewiseCdf(tuple((float(x), float(y)) for x, y in fobj["cdf"])))
        raise InvalidArgumentError(f"unknown builtin {kind!r}")
    if "rules" in fobj:
        rules = []
        for robj in fobj["rules"]:
            if "else" in robj:
                rules.append(Rule((), _cell_id_from_spec(robj["else"], signature, m)))
            else:
                guard = tuple(
                    Comparison(_term(lhs), op, _term(rhs)) for lhs, op, rhs in robj["if"]
                )
                rules.append(Rule(guard, _cell_id_from_spec(robj["then"], signature, m)))
        return RuleTable(m, tuple(rules))
    raise InvalidArgumentError("function spec needs 'builtin' or 'rules'")


def _term(s: str):
    s = str(s)
    if s.startswith("u"):
        return s
    return Fraction(s)


# built-in model instances ---------------------------------------------------


def constant_empty_model(signature: Signature | None = None) -> AhkModel:
    signature = signature or Signature.single_binary()
    funcs = {m: ConstantCell(m, 0) for m in range(1, signature.arity + 1)}
    return AhkModel.create(signature, False, funcs)


def erdos_renyi_model(p: Fraction = Fraction(1, 2)) -> AhkModel:
    sig = Signature.single_binary()
    return AhkModel.create(sig, False, {1: ConstantCell(1, 0), 2: ErdosRenyiPair(Fraction(p))})


def block_model(
    boundaries: Sequence[Fraction], probs: Sequence[Sequence[Fraction]]
) -> AhkModel:
    sig = Signature.single_binary()
    f2 = BlockModelPair(
        tuple(Fraction(b) for b in boundaries),
        tuple(tuple(Fraction(p) for p in row) for row in probs),
    )
    return AhkModel.create(sig, False, {1: ConstantCell(1, 0), 2: f2})


def bipartite_model() -> AhkModel:
    """Complete balanced bipartite sampler: endpoint latents encode the side."""
    return block_model([Fraction(1, 2)], [[Fraction(0), Fraction(1)], [Fraction(1), Fraction(0)]])


def degree_model(cdf: PiecewiseCdf = IDENTITY_CDF) -> AhkModel:
    sig = Signature.single_binary()
    return AhkModel.create(sig, False, {1: ConstantCell(1, 0), 2: DegreeModelPair(cdf)})


def builtin_models() -> dict[str, AhkModel]:
    return {
        "constant_empty": constant_empty_model(),
        "erdos_renyi": erdos_renyi_model(),
        "bipartite": bipartite_model(),
        "degree_identity": degree_model(),
    }


# ---------------------------------------------------------------------------
# sampling


def latent_vector(model: AhkModel, seed: int, index: tuple[int, ...]) -> tuple[float, ...]:
    """The latent vector feeding the cell at a sorted global index tuple."""
    m = len(index)
    out = []
    for sub in latent_layout(m, model.has_global_latent):
        global_sub = tuple(index[h - 1] for h in sub)
        out.append(latent_uniform(seed, global_sub))
    return tuple(out)


def sample_world(model: AhkModel, n: int, seed: int) -> World:
    """One world of size n; restriction to [m] equals the size-m sample for
    the same seed by construction."""
    if n < 1:
        raise InvalidArgumentError(f"n={n} < 1")
    cells = []
    for m in range(1, model.signature.arity + 1):
        f = model.functions[m]
        for index in itertools.combinations(range(1, n + 1), m):
            u = latent_vector(model, seed, index)
            cid = f.evaluate(u, model.has_global_latent)
            cells.append((index, cell_from_id(model.signature, m, cid)))
    return recompose(model.signature, n, cells)


# kernel bridge --------------------------------------------------------------


@dataclass
class KernelSpec:
    code: int
    has_global: bool
    f1_cell: int
    fparams: np.ndarray
    r_start: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    r_len: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    r_out: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    c_lhs: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    c_op: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    c_rhs_isconst: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    c_rhs_idx: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    c_rhs_const: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.float64))


def kernel_spec(model: AhkModel) -> KernelSpec | None:
    """Flat-array encoding for the accelerated samplers, or None when the
    model needs the generic path (non-binary signature, non-constant f1)."""
    sig = model.signature
    if len(sig.relations) != 1 or sig.relations[0][1] != 2:
        return None
    f1 = model.functions[1]
    if not isinstance(f1, ConstantCell):
        return None
    f2 = model.functions[2]
    hg = model.has_global_latent
    if isinstance(f2, ErdosRenyiPair):
        return KernelSpec(1, hg, f1.cell_id, np.array([float(f2.p)]))
    if isinstance(f2, BlockModelPair):
        k = len(f2.boundaries) + 1
        params = [float(k)]
        params.extend(float(b) for b in f2.boundaries)
        for row in f2.probs:
            params.extend(float(p) for p in row)
        return KernelSpec(2, hg, f1.cell_id, np.array(params))
    if isinstance(f2, DegreeModelPair):
        xs = [p[0] for p in f2.cdf.points]
        ys = [p[1] for p in f2.cdf.points]
        return KernelSpec(3, hg, f1.cell_id, np.array([float(len(xs))] + xs + ys))
    if isinstance(f2, ConstantCell):
        f2 = RuleTable(2, (Rule((), f2.cell_id),))
    if isinstance(f2, RuleTable):
        names = {nm: i for i, nm in enumerate(component_names(2, hg))}
        r_start, r_len, r_out = [], [], []
        c_lhs, c_op, c_isconst, c_idx, c_const = [], [], [], [], []
        for rule in f2.rules:
            r_start.append(len(c_lhs))
            r_len.append(len(rule.guard))
            r_out.append(rule.out_cell)
            for cmp_ in rule.guard:
                if not isinstance(cmp_.lhs, str):
                    return None  # constant lhs not supported by the kernels
                c_lhs.append(names[cmp_.lhs])
                c_op.append(_OP_CODES[cmp_.op])
                if isinstance(cmp_.rhs, str):
                    c_isconst.append(0)
                    c_idx.append(names[cmp_.rhs])
                    c_const.append(0.0)
                else:
                    c_isconst.append(1)
                    c_idx.append(0)
                    c_const.append(float(cmp_.rhs))
        return KernelSpec(
            4,
            hg,
            f1.cell_id,
            np.zeros(0),
            np.array(r_start, dtype=np.int64),
            np.array(r_len, dtype=np.int64),
            np.array(r_out, dtype=np.int64),
            np.array(c_lhs, dtype=np.int64),
            np.array(c_op, dtype=np.int64),
            np.array(c_isconst, dtype=np.int64),
            np.array(c_idx, dtype=np.int64),
            np.array(c_const, dtype=np.float64),
        )
    return None


def sample_worlds_packed(model: AhkModel, n: int, count: int, seed: int) -> np.ndarray:
    """Accelerated batch sampling into packed world integers (n <= 8)."""
    spec = kernel_spec(model)
    if spec is None or n > 8:
        raise InvalidArgumentError("model or size not supported by the kernel path")
    return backends.sample_worlds_packed(spec, n, count, seed)


# ---------------------------------------------------------------------------
# estimates and statistical checks


@dataclass
class EstimatedMarginal:
    """Monte Carlo estimate of a model's size-k marginal (floats, not exact)."""

    signature: Signature
    k: int
    samples: int
    counts: dict[World, int]

    def prob(self, w: World) -> float:
        return self.counts.get(w, 0) / self.samples

    def stderr(self, w: World) -> float:
        p = self.prob(w)
        return math.sqrt(p * (1 - p) / self.samples)

    def items(self):
        return sorted(self.counts.items(), key=lambda kv: pack_world(kv[0]))

    def to_json(self) -> dict:
        return {
            "signature": self.signature.to_json(),
            "k": self.k,
            "samples": self.samples,
            "entries": [
                {
                    "world": w.to_json(),
                    "prob": c / self.samples,
                    "stderr": self.stderr(w),
                    "count": c,
                }
                for w, c in self.items()
            ],
        }


def estimate_marginal(model: AhkModel, k: int, samples: int, seed: int) -> EstimatedMarginal:
    if samples < 1:
        raise InvalidArgumentError("samples must be >= 1")
    spec = kernel_spec(model)
    counts: dict[World, int] = {}
    if spec is not None and k <= 5:
        packed = backends.sample_worlds_packed(spec, k, samples, seed)
        ids, cnts = np.unique(packed, return_counts=True)
        for pid, c in zip(ids.tolist(), cnts.tolist()):
            counts[unpack_world(model.signature, k, int(pid))] = int(c)
    else:
        for s in range(samples):
            w = sample_world(model, k, substream(seed, s))
            counts[w] = counts.get(w, 0) + 1
    return EstimatedMarginal(model.signature, k, samples, counts)


def exact_marginal(model: AhkModel, k: int) -> WorldletDistribution:
    """Closed-form size-k marginal for constant/edge-probability models.

    Conditions on the ranking of the endpoint latents (all k! orders equally
    likely), under which pair cells are independent with rational
    probabilities.  Degree models and general rule tables are not supported.
    """
    sig = model.signature
    if len(sig.relations) != 1 or sig.relations[0][1] != 2:
        raise InvalidArgumentError("exact marginal supports single binary signatures")
    f1 = model.functions[1]
    f2 = model.functions[2]
    if not isinstance(f1, ConstantCell):
        raise InvalidArgumentError("exact marginal needs a constant arity-1 function")
    pairs = list(itertools.combinations(range(1, k + 1), 2))

    def pair_outcomes_given(ranks=None, blocks=None):
        # {pair -> {cell_id -> Fraction}}
        out = {}
        for i, j in pairs:
            if isinstance(f2, ErdosRenyiPair):
                p = Fraction(f2.p)
                if ranks[i] < ranks[j]:
                    out[(i, j)] = {1: p, 0: 1 - p}
                else:
                    out[(i, j)] = {2: p, 0: 1 - p}
            elif isinstance(f2, BlockModelPair):
                p = f2.probs[blocks[i]][blocks[j]]
                out[(i, j)] = {3: p, 0: 1 - p} if p > 0 else {0: Fraction(1)}
                if p == 1:
                    out[(i, j)] = {3: Fraction(1)}
            elif isinstance(f2, ConstantCell):
                out[(i, j)] = {f2.cell_id: Fraction(1)}
            else:
                raise InvalidArgumentError(
                    f"exact marginal not available for {type(f2).__name__}"
                )
        return out

    def accumulate(weight: Fraction, outcome_dists, acc):
        # expand the product of independent pair-cell distributions
        combos = [(Fraction(1), [])]
        for i, j in pairs:
            new = []
            for w_, cells in combos:
                for cid, pr in outcome_dists[(i, j)].items():
                    if pr:
                        new.append((w_ * pr, cells + [((i, j), cid)]))
            combos = new
        for w_, cells in combos:
            edges = set()
            for (i, j), cid in cells:
                if cid & 1:
                    edges.add((i, j))
                if cid & 2:
                    edges.add((j, i))
            if f1.cell_id & 1:
                edges.update((i, i) for i in range(1, k + 1))
            world = World.build(sig, k, {sig.relations[0][0]: edges})
            acc[world] = acc.get(world, Fraction(0)) + weight * w_

    acc: dict[World, Fraction] = {}
    if isinstance(f2, (ConstantCell,)):
        accumulate(Fraction(1), pair_outcomes_given(), acc)
    elif isinstance(f2, ErdosRenyiPair):
        orders = list(itertools.permutations(range(1, k + 1)))
        w_order = Fraction(1, len(orders))
        for order in orders:
            ranks = {node: pos for pos, node in enumerate(order)}
            accumulate(w_order, pair_outcomes_given(ranks=ranks), acc)
    elif isinstance(f2, BlockModelPair):
        nblocks = len(f2.boundaries) + 1
        for assignment in itertools.product(range(nblocks), repeat=k):
            weight = Fraction(1)
            for b in assignment:
                weight *= f2.block_probability(b)
            if weight == 0:
                continue
            blocks = {node: b for node, b in enumerate(assignment, start=1)}
            accumulate(weight, pair_outcomes_given(blocks=blocks), acc)
    else:
        raise InvalidArgumentError(f"exact marginal not available for {type(f2).__name__}")
    convention = "undirected" if isinstance(f2, BlockModelPair) and not (f1.cell_id & 1) else "directed"
    return WorldletDistribution(sig, k, acc, convention)


# ---------------------------------------------------------------------------
# reports


@dataclass
class ProjectivityReport:
    coupling_seeds: int
    coupling_failures: list[int]
    chi2: float
    dof: int
    pvalue: float
    passed: bool


def projectivity_test(
    model,
    m: int,
    n: int,
    samples: int,
    seed: int,
    alpha: float = 1e-3,
    coupling_seeds: int = 200,
) -> ProjectivityReport:
    """Exact seed-coupled restriction check plus a two-sample chi-square
    comparison of the size-n marginal restricted to [m] against direct
    size-m sampling.  ``model`` may be any object with sample_world-like
    behavior; AhkModel instances use their own sampler."""
    if not m < n:
        raise InvalidArgumentError("need m < n")
    sampler = model.sample_world if hasattr(model, "sample_world") else None

    def draw(size: int, s: int) -> World:
        if isinstance(model, AhkModel):
            return sample_world(model, size, s)
        return sampler(size, s)

    failures = []
    for t in range(coupling_seeds):
        s = substream(seed, t)
        big = draw(n, s)
        small = draw(m, s)
        if induce_subset(big, tuple(range(1, m + 1))) != small:
            failures.append(t)
    counts_a: dict[World, int] = {}
    counts_b: dict[World, int] = {}
    if isinstance(model, AhkModel) and kernel_spec(model) is not None and n <= 8:
        packed_n = sample_worlds_packed(model, n, samples, substream(seed, 10_001))
        packed_m = sample_worlds_packed(model, m, samples, substream(seed, 10_002))
        for w_id in packed_n.tolist():
            w = induce_subset(
                unpack_world(model.signature, n, int(w_id)), tuple(range(1, m + 1))
            )
            counts_a[w] = counts_a.get(w, 0) + 1
        for w_id in packed_m.tolist():
            w = unpack_world(model.signature, m, int(w_id))
            counts_b[w] = counts_b.get(w, 0) + 1
    else:
        for t in range(samples):
            w = induce_subset(draw(n, substream(seed, 20_000 + t)), tuple(range(1, m + 1)))
            counts_a[w] = counts_a.get(w, 0) + 1
            w2 = draw(m, substream(seed, 50_000_000 + t))
            counts_b[w2] = counts_b.get(w2, 0) + 1
    cells = set(counts_a) | set(counts_b)
    chi2 = 0.0
    dof = -1
    for w in cells:
        a = counts_a.get(w, 0)
        b = counts_b.get(w, 0)
        if a + b == 0:
            continue
        chi2 += (a - b) ** 2 / (a + b)
        dof += 1
    pvalue = float(scipy_stats.chi2.sf(chi2, dof)) if dof > 0 else 1.0
    passed = not failures and pvalue >= alpha
    return ProjectivityReport(coupling_seeds, failures, chi2, dof, pvalue, passed)


@dataclass
class ClassHomogeneity:
    class_world: World
    class_size: int
    total: int
    chi2: float
    pvalue: float


@dataclass
class ExchangeabilityTestReport:
    samples: int
    classes: list[ClassHomogeneity]
    alpha: float
    passed: bool


def exchangeability_test(
    model: AhkModel, k: int, samples: int, seed: int, alpha: float = 1e-3
) -> ExchangeabilityTestReport:
    """Chi-square homogeneity of the estimated marginal within each
    isomorphism class, Bonferroni-corrected across classes."""
    from .core import canonical_form, iso_members

    est = estimate_marginal(model, k, samples, seed)
    by_class: dict[World, list[int]] = {}
    seen: set[World] = set()
    for w in est.counts:
        if w in seen:
            continue
        members = iso_members(w)
        seen.update(members)
        rep = canonical_form(w).canonical
        by_class[rep] = [est.counts.get(x, 0) for x in members]
    rows = []
    for rep, counts in sorted(by_class.items(), key=lambda kv: pack_world(kv[0])):
        size = len(counts)
        total = sum(counts)
        if size < 2 or total == 0:
            continue
        expected = total / size
        chi2 = sum((c - expected) ** 2 / expected for c in counts)
        pvalue = float(scipy_stats.chi2.sf(chi2, size - 1))
        rows.append(ClassHomogeneity(rep, size, total, chi2, pvalue))
    tested = len(rows)
    passed = all(r.pvalue >= alpha / max(tested, 1) for r in rows)
    return ExchangeabilityTestReport(samples, rows, alpha, passed)


@dataclass
class ModularityBoundReport:
    world: World
    samples: int
    p_hat: float
    q_hat: float
    sigma: float
    inconclusive: bool
    passed: bool


def modularity_bound_test(
    model: AhkModel, w: World, samples: int, seed: int
) -> ModularityBoundReport:
    """Estimate p (probability of w at size n) and q (probability that both
    two-overlap restrictions of a size-(n+1) world equal w); the bound
    requires q >= p^2 up to Monte Carlo error."""
    n = w.n
    prefix = tuple(range(1, n + 1))
    overlap = tuple(range(1, n)) + (n + 1,)
    spec = kernel_spec(model)
    if spec is not None and n + 1 <= 8:
        packed_n = sample_worlds_packed(model, n, samples, substream(seed, 1))
        target = pack_world(w)
        p_hat = float(np.count_nonzero(packed_n == np.uint64(target))) / samples
        packed_n1 = sample_worlds_packed(model, n + 1, samples, substream(seed, 2))
        hits = 0
        for pid in packed_n1.tolist():
            big = unpack_world(model.signature, n + 1, int(pid))
            if induce_subset(big, prefix) == w and induce_tuple(big, overlap) == w:
                hits += 1
        q_hat = hits / samples
    else:
        hit_p = 0
        for t in range(samples):
            if sample_world(model, n, substream(seed, 100_000 + t)) == w:
                hit_p += 1
        p_hat = hit_p / samples
        hit_q = 0
        for t in range(samples):
            big = sample_world(model, n + 1, substream(seed, 900_000 + t))
            if induce_subset(big, prefix) == w and induce_tuple(big, overlap) == w:
                hit_q += 1
        q_hat = hit_q / samples
    sigma = math.sqrt(
        q_hat * (1 - q_hat) / samples + 4 * p_hat**2 * p_hat * (1 - p_hat) / samples
    )
    inconclusive = p_hat == 0.0
    passed = inconclusive or q_hat >= p_hat**2 - 3 * sigma
    return ModularityBoundReport(w, samples, p_hat, q_hat, sigma, inconclusive, passed)


@dataclass
class DegreeGridRow:
    u: float
    mean_normalized_outdegree: float
    stderr: float
    expected: float
    passed: bool


@dataclass
class DegreeModelReport:
    n: int
    samples: int
    eps: float
    rows: list[DegreeGridRow]
    passed: bool


def degree_model_test(
    model: AhkModel,
    u_grid: Sequence[float],
    n: int,
    samples: int,
    seed: int,
    eps: float = 0.01,
) -> DegreeModelReport:
    """Condition node 1's latent on a small window around each grid value and
    compare its mean normalized out-degree to the generalized inverse cdf.

    Out-degree is normalized by the n-1 possible targets, which makes the
    identity-cdf case exact at finite n.
    """
    f2 = model.functions.get(2)
    if not isinstance(f2, DegreeModelPair):
        raise InvalidArgumentError("degree test requires a degree-model pair function")
    spec = kernel_spec(model)
    rows = []
    for gi, u in enumerate(u_grid):
        lo = max(0.0, u - eps)
        hi = min(1.0, u + eps)
        sj = substream(seed, gi)
        if spec is not None:
            degs = backends.sample_outdegree(spec, n, lo, hi, samples, sj)
            degs = np.asarray(degs, dtype=np.float64) / (n - 1)
            mean = float(degs.mean())
            se = float(degs.std(ddof=1) / math.sqrt(samples))
        else:
            vals = []
            for t in range(samples):
                st = substream(sj, t)
                v = lo + (hi - lo) * latent_uniform(st, (1,))
                deg = 0
                for j in range(2, n + 1):
                    uj = latent_uniform(st, (j,))
                    u1j = latent_uniform(st, (1, j))
                    cell = f2.evaluate(
                        ((0.0,) if model.has_global_latent else ())
                        + (v, uj, u1j),
                        model.has_global_latent,
                    )
                    deg += cell & 1
                vals.append(deg / (n - 1))
            mean = sum(vals) / samples
            se = math.sqrt(sum((x - mean) ** 2 for x in vals) / (samples - 1) / samples)
        expected = f2.cdf.inverse(u)
        rows.append(DegreeGridRow(u, mean, se, expected, abs(mean - expected) <= 3 * se))
    return DegreeModelReport(n, samples, eps, rows, all(r.passed for r in rows))


def strip_global_latent(model: AhkModel, trials: int = 256, seed: int = 77) -> AhkModel:
    """Remove the global latent after verifying the functions ignore it,
    pinning it to the anchor value 1/2 for rule tables that mention it."""
    if not model.has_global_latent:
        return model
    anchor = Fraction(1, 2)
    new_functions: dict[int, EquivariantFunction] = {}
    for m, f in model.functions.items():
        layout = latent_layout(m, True)
        for t in range(trials):
            sj = substream(seed, t * 31 + m)
            u = [latent_uniform(sj, (pos,)) for pos in range(len(layout))]
            out_a = f.evaluate(tuple(u), True)
            alt = list(u)
            alt[0] = latent_uniform(sj, (len(layout) + 1,))
            out_b = f.evaluate(tuple(alt), True)
            if out_a != out_b:
                raise GlobalLatentDependenceError(m, tuple(u), tuple(alt), out_a, out_b)
        if isinstance(f, RuleTable):
            new_functions[m] = f.substitute_global(anchor)
        else:
            new_functions[m] = f
    return AhkModel.create(
        model.signature, False, new_functions, validate=False
    )
