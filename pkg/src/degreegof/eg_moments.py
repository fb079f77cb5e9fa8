"""Moments of the degree mean square under exchangeable (graphon) models.

Everything is written in terms of the edge count M1, the wedge count M2 and
the pattern probabilities phi_1..phi_10. The long sums cancel heavily when
n is large (the leading n^6 terms of E[(cM1 + M2)^2] cancel down to n^3),
so the algebra runs on exact rationals built from the float inputs and is
rounded once at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .graph import Graph
from .her_moments import Moments
from .models import Graphon
from .patterns import PhiVector, phi_vector


class ConsistencyError(ArithmeticError):
    """The two variance assemblies disagree, or the variance came out negative."""


def falling_factorials(n: int, top: int = 5) -> list[int]:
    """[n_1, ..., n_top] with n_i = n (n-1) ... (n-i), as exact integers."""
    out, acc = [], n
    for i in range(1, top + 1):
        acc *= n - i
        out.append(acc)
    return out


@dataclass(frozen=True)
class EgMomentInputs:
    n: int
    phi1_0: float
    phi: PhiVector

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if not 0 <= self.phi1_0 <= 1:
            raise ValueError("null edge probability must lie in [0, 1]")
        missing = [j for j in range(1, 11) if j not in self.phi]
        if missing:
            raise ValueError(f"pattern probabilities missing for {missing}")

    @cached_property
    def nf(self) -> list[int]:
        """Falling factorials n_1..n_5."""
        return falling_factorials(self.n)

    @cached_property
    def exact_phi(self) -> dict[int, Fraction]:
        return {j: Fraction(self.phi[j]) for j in range(1, 11)}

    @property
    def slope(self) -> Fraction:
        """c = 1 - 2 (n - 1) phi1_0, the weight of M1 in n W."""
        return 1 - 2 * (self.n - 1) * Fraction(self.phi1_0)


def w_phi_statistic(g: Graph, phi1_0: float) -> float:
    """(1/n) sum_i (D_i - (n - 1) phi1_0)^2."""
    r = g.degree_array - (g.n - 1) * phi1_0
    return math.fsum(r * r) / g.n


def w_phi_identity(g: Graph, phi1_0: float) -> tuple[Fraction, Fraction]:
    """Both sides of n W = n (n-1)^2 phi0^2 + 2 (1 - 2 (n-1) phi0) M1 + 2 M2,
    evaluated exactly. The left side comes from the degrees one node at a
    time, the right side from the edge and wedge counts."""
    n = g.n
    num, den = Fraction(phi1_0).as_integer_ratio()
    d = g.degree_array.tolist()
    lhs = Fraction(sum((den * x - (n - 1) * num) ** 2 for x in d), den * den)
    m1 = g.m
    m2 = sum(x * (x - 1) // 2 for x in d)
    p0 = Fraction(num, den)
    rhs = n * (n - 1) ** 2 * p0 ** 2 + 2 * (1 - 2 * (n - 1) * p0) * m1 + 2 * m2
    return lhs, rhs


def _m_moments_exact(inp: EgMomentInputs) -> tuple[Fraction, ...]:
    n1, n2, n3, n4, n5 = inp.nf
    f = inp.exact_phi
    em1 = Fraction(n1, 2) * f[1]
    em2 = Fraction(n2, 2) * f[2]
    em1sq = Fraction(n1, 2) * f[1] + n2 * f[2] + Fraction(n3, 4) * f[1] ** 2
    em1m2 = (Fraction(n2, 2) * (2 * f[2] + f[3]) + Fraction(n3, 2) * (f[5] + 2 * f[6])
             + Fraction(n4, 4) * f[1] * f[2])
    em2sq = (Fraction(n2, 6) * (3 * f[2] + 6 * f[3])
             + Fraction(n3, 2) * (4 * f[4] + 2 * f[5] + 2 * f[6] + f[7])
             + Fraction(n4, 4) * (4 * f[8] + f[9] + 4 * f[10])
             + Fraction(n5, 4) * f[2] ** 2)
    return em1, em2, em1sq, em1m2, em2sq


def m_moments(inp: EgMomentInputs) -> tuple[float, float, float, float, float]:
    """(E M1, E M2, E M1^2, E M1 M2, E M2^2)."""
    return tuple(float(x) for x in _m_moments_exact(inp))


def _variance_raw(inp: EgMomentInputs) -> Fraction:
    em1, em2, em1sq, em1m2, em2sq = _m_moments_exact(inp)
    c = inp.slope
    second = c * c * em1sq + 2 * c * em1m2 + em2sq
    first = c * em1 + em2
    return Fraction(4, inp.n ** 2) * (second - first * first)


def _variance_display(inp: EgMomentInputs) -> Fraction:
    """The grouped form: each bracket is already a centred (co)variance."""
    n = inp.n
    n1, n2, n3, n4, n5 = inp.nf
    f = inp.exact_phi
    c = inp.slope
    var_m1 = (Fraction(n1, 2) * f[1] + n2 * f[2]
              + Fraction(n3 - n1 * n1, 4) * f[1] ** 2)
    cov = (Fraction(n2, 2) * (2 * f[2] + f[3]) + Fraction(n3, 2) * (f[5] + 2 * f[6])
           + Fraction(n4 - n1 * n2, 4) * f[1] * f[2])
    var_m2 = (Fraction(n2, 6) * (3 * f[2] + 6 * f[3])
              + Fraction(n3, 2) * (4 * f[4] + 2 * f[5] + 2 * f[6] + f[7])
              + Fraction(n4, 4) * (4 * f[8] + f[9] + 4 * f[10])
              + Fraction(n5 - n2 * n2, 4) * f[2] ** 2)
    return Fraction(1, n * n) * (4 * c * c * var_m1 + 8 * c * cov + 4 * var_m2)


def w_phi_mean(inp: EgMomentInputs) -> float:
    n = inp.n
    n1, n2 = inp.nf[:2]
    f = inp.exact_phi
    p0 = Fraction(inp.phi1_0)
    total = n * (n - 1) ** 2 * p0 ** 2 + inp.slope * n1 * f[1] + n2 * f[2]
    return float(total / n)


def w_phi_moments(inp: EgMomentInputs, rtol: float = 1e-9) -> Moments:
    """Mean and variance of W_{phi0} under the graphon with pattern
    probabilities ``inp.phi``.

    The variance is assembled from the raw M-moments and cross-checked
    against the grouped (co)variance form; a mismatch beyond ``rtol``
    raises :class:`ConsistencyError`.
    """
    raw = _variance_raw(inp)
    grouped = _variance_display(inp)
    scale = max(abs(raw), abs(grouped))
    if scale and abs(raw - grouped) > rtol * scale:
        raise ConsistencyError(f"variance assemblies disagree: {float(raw)!r} vs {float(grouped)!r}")
    var = float(raw)
    if var < 0:
        # phi's that are not jointly realisable (or rounded) can push a
        # zero variance slightly negative
        if var < -1e-9 * max(1.0, float(_second_moment_scale(inp))):
            raise ConsistencyError(f"negative variance {var!r}")
        var = 0.0
    return Moments(w_phi_mean(inp), var)


def _second_moment_scale(inp: EgMomentInputs) -> Fraction:
    em1, em2, em1sq, em1m2, em2sq = _m_moments_exact(inp)
    c = inp.slope
    return Fraction(4, inp.n ** 2) * (c * c * em1sq + 2 * abs(c) * em1m2 + em2sq)


def null_moments(phi0: Graphon, n: int, method: str | None = None, budget: int | None = None,
                 rng=None) -> Moments:
    """Moments of W_{phi0} when the data come from phi0 itself."""
    vec = phi_vector(phi0, method=method, budget=budget, rng=rng)
    return w_phi_moments(EgMomentInputs(n, vec[1], vec))


def moments_under(phi: Graphon, phi1_0: float, n: int, method: str | None = None,
                  budget: int | None = None, rng=None) -> Moments:
    """Moments of W_{phi0} (null edge probability ``phi1_0``) under ``phi``."""
    vec = phi_vector(phi, method=method, budget=budget, rng=rng)
    return w_phi_moments(EgMomentInputs(n, phi1_0, vec))
