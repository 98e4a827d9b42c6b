"""Exact-rational LP feasibility via phase-one simplex with Bland's rule.

Decides whether A x = b has a solution with x >= 0, entirely in Fraction
arithmetic.  Feasible instances yield the solution vector; infeasible ones
yield a Farkas certificate y with y^T A <= 0 and y^T b > 0.  Bland's rule
guarantees termination; there is no floating-point presolve anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence


@dataclass
class FeasibilityResult:
    feasible: bool
    solution: list[Fraction] | None
    farkas: list[Fraction] | None
    pivots: int


def solve_feasibility(
    rows: Sequence[Sequence[Fraction]], rhs: Sequence[Fraction]
) -> FeasibilityResult:
    """Find x >= 0 with rows . x = rhs, or a Farkas certificate of infeasibility."""
    m = len(rows)
    n = len(rows[0]) if m else 0
    signs = [1 if b >= 0 else -1 for b in rhs]
    tab = [
        [Fraction(v) * signs[i] for v in rows[i]] + [Fraction(0)] * m
        for i in range(m)
    ]
    for i in range(m):
        tab[i][n + i] = Fraction(1)
    b = [Fraction(rhs[i]) * signs[i] for i in range(m)]
    basis = [n + i for i in range(m)]
    total = n + m

    def reduced_costs():
        # phase-one costs: 1 on artificials, 0 on structural variables
        y = [Fraction(0)] * m
        for i, bv in enumerate(basis):
            if bv >= n:
                y[i] = Fraction(1)
        red = []
        for j in range(total):
            cj = Fraction(1) if j >= n else Fraction(0)
            acc = cj
            for i in range(m):
                if y[i]:
                    acc -= y[i] * tab[i][j]
            red.append(acc)
        return red

    pivots = 0
    while True:
        red = reduced_costs()
        entering = -1
        for j in range(total):
            if j in basis:
                continue
            if red[j] < 0:
                entering = j
                break
        if entering < 0:
            break
        leaving = -1
        best = None
        for i in range(m):
            a = tab[i][entering]
            if a > 0:
                ratio = b[i] / a
                if best is None or ratio < best or (
                    ratio == best and basis[i] < basis[leaving]
                ):
                    best = ratio
                    leaving = i
        if leaving < 0:
            raise RuntimeError("phase-one objective unbounded; input inconsistent")
        piv = tab[leaving][entering]
        tab[leaving] = [v / piv for v in tab[leaving]]
        b[leaving] /= piv
        for i in range(m):
            if i == leaving:
                continue
            f = tab[i][entering]
            if f:
                row_l = tab[leaving]
                tab[i] = [tab[i][j] - f * row_l[j] for j in range(total)]
                b[i] -= f * b[leaving]
        basis[leaving] = entering
        pivots += 1

    objective = sum(b[i] for i in range(m) if basis[i] >= n)
    if objective == 0:
        x = [Fraction(0)] * n
        for i, bv in enumerate(basis):
            if bv < n:
                x[bv] = b[i]
        return FeasibilityResult(True, x, None, pivots)

    # infeasible: y = c_B B^{-1}; columns n..n+m of the tableau hold B^{-1}
    y = []
    for j in range(m):
        acc = Fraction(0)
        for i, bv in enumerate(basis):
            if bv >= n:
                acc += tab[i][n + j]
        y.append(acc * signs[j])
    return FeasibilityResult(False, None, y, pivots)


def verify_feasible(rows, rhs, x) -> bool:
    m = len(rows)
    if any(v < 0 for v in x):
        return False
    for i in range(m):
        if sum(rows[i][j] * x[j] for j in range(len(x))) != rhs[i]:
            return False
    return True


def verify_farkas(rows, rhs, y) -> bool:
    m = len(rows)
    n = len(rows[0]) if m else 0
    for j in range(n):
        if sum(y[i] * rows[i][j] for i in range(m)) > 0:
            return False
    return sum(y[i] * rhs[i] for i in range(m)) > 0
