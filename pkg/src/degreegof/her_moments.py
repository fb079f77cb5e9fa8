"""Degree statistics and their exact moments under independent-edge models.

All sums over node triples and quadruples are reduced to row sums, so each
moment costs O(n^2). Large sums go through :func:`math.fsum`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .graph import Graph
from .models import ProbMatrix


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class Moments:
    """Mean and variance of a statistic."""

    mean: float
    variance: float

    def __post_init__(self):
        if not self.variance >= 0 or not math.isfinite(self.variance):
            raise ValueError(f"variance must be finite and nonnegative, got {self.variance}")

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)


def _fsum(a) -> float:
    return math.fsum(np.asarray(a, dtype=float).ravel())


def _check_dims(g: Graph, p: ProbMatrix):
    if g.n != p.n:
        raise DimensionError(f"graph has {g.n} nodes but the matrix is {p.n}x{p.n}")


def w_statistic(g: Graph, p0: ProbMatrix) -> float:
    """Degree mean square (1/n) sum_i (D_i - mu0_i)^2, mu0_i = sum_j p0_ij."""
    _check_dims(g, p0)
    mu0 = p0.p.sum(axis=1)
    r = g.degree_array - mu0
    return _fsum(r * r) / g.n


def v_statistic(g: Graph) -> float:
    """Empirical degree variance (1/n) sum_i (D_i - mean degree)^2."""
    d = g.degree_array.astype(float)
    r = d - d.mean()
    return _fsum(r * r) / g.n


class HerContext:
    """True matrix ``p`` and null matrix ``p0`` with cached derived sums."""

    def __init__(self, p: ProbMatrix, p0: ProbMatrix | None = None):
        if p0 is None:
            p0 = p
        if p.n != p0.n:
            raise DimensionError(f"p is {p.n}x{p.n} but p0 is {p0.n}x{p0.n}")
        self.p = p
        self.p0 = p0

    @property
    def n(self) -> int:
        return self.p.n

    @cached_property
    def sigma2(self) -> np.ndarray:
        return self.p.p * (1 - self.p.p)

    @cached_property
    def delta(self) -> np.ndarray:
        return self.p.p - self.p0.p

    @cached_property
    def big_delta(self) -> np.ndarray:
        """Delta_i = sum_{j != i} delta_ij."""
        return self.delta.sum(axis=1)

    @cached_property
    def sigma2_rows(self) -> np.ndarray:
        return self.sigma2.sum(axis=1)

    @cached_property
    def sigma4_rows(self) -> np.ndarray:
        return (self.sigma2 ** 2).sum(axis=1)


def _adjacent_pair_sum(a: np.ndarray) -> float:
    """sum over unordered pairs of distinct edges sharing one node of a_e a_f,
    i.e. sum_{i<j<k} (a_ij a_ik + a_ij a_jk + a_ik a_jk)."""
    rows = a.sum(axis=1)
    sq = (a * a).sum(axis=1)
    return 0.5 * _fsum(rows * rows - sq)


def _disjoint_pair_sum(a: np.ndarray) -> float:
    """sum over unordered pairs of node-disjoint edges of a_e a_f."""
    iu = np.triu_indices(a.shape[0], 1)
    vals = a[iu]
    total = _fsum(vals)
    all_pairs = 0.5 * (total * total - _fsum(vals * vals))
    return all_pairs - _adjacent_pair_sum(a)


def w_moments_her(ctx: HerContext) -> Moments:
    """Mean and variance of the degree mean square W_{p0} under HER(p)."""
    n = ctx.n
    iu = np.triu_indices(n, 1)
    s2, d = ctx.sigma2, ctx.delta
    mean = 2.0 / n * (_fsum(s2[iu] + d[iu] ** 2) + _adjacent_pair_sum(d))
    D = ctx.big_delta
    lin = 1 - 2 * ctx.p.p + D[:, None] + D[None, :]
    r, q = ctx.sigma2_rows, ctx.sigma4_rows
    wedges = 0.5 * _fsum(r * r - q)
    var = 4.0 / n ** 2 * (_fsum((s2 * lin * lin)[iu]) + wedges)
    return Moments(mean, max(var, 0.0))


def w_moments_null(p0: ProbMatrix) -> Moments:
    """Moments of W_{p0} when the data come from HER(p0) itself.

    Both the edge term and the wedge term carry the factor 4 of the general
    formula with delta = 0.
    """
    return w_moments_her(HerContext(p0, p0))


def v_moments_her(p: ProbMatrix) -> Moments:
    """Mean and variance of the degree variance V under HER(p)."""
    n = p.n
    P = p.p
    iu = np.triu_indices(n, 1)
    edge_sum = _fsum(P[iu])
    s2 = P * (1 - P)
    # Same value as (2(n-2) E M1 + 2(n-4) E[wedges] - 8 E[disjoint pairs]) / n^2,
    # regrouped as Var-part + spread of expected degrees to avoid cancelling
    # O(n^4 p^2) terms when p is dense.
    mu = P.sum(axis=1)
    spread = mu - mu.mean()
    mean = 2.0 * _fsum(s2[iu]) * (n - 2) / n ** 2 + _fsum(spread * spread) / n

    rows = P.sum(axis=1)
    touching = rows[:, None] + rows[None, :] - 2 * P  # sum_{k not in {i,j}} (p_ik + p_jk)
    untouched = edge_sum - rows[:, None] - rows[None, :] + P  # sum_{k<l not in {i,j}} p_kl
    coef = 4.0 * (n - 2) + 4.0 * (n - 4) * touching - 16.0 * untouched
    var = (_fsum((s2 * coef * coef)[iu]) / 4.0
           + 4.0 * (n - 4) ** 2 * _adjacent_pair_sum(s2)
           + 64.0 * _disjoint_pair_sum(s2)) / n ** 4
    return Moments(mean, max(var, 0.0))


def v_moments_er(n: int, p: float) -> Moments:
    """Closed-form moments of V under ER(p)."""
    if n < 1:
        raise ValueError("n must be positive")
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    pq = p * (1 - p)
    mean = (n - 1) * (n - 2) * pq / n
    var = 2.0 * (n - 1) * (n - 2) ** 2 * pq * (1 + (n - 6) * pq) / n ** 3
    return Moments(mean, max(var, 0.0))
