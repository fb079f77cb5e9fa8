"""The ten small patterns R1..R10 and their edge-presence probabilities.

``phi_j`` is the probability that every edge of pattern R_j is present on a
fixed set of nodes (other pairs unconstrained), i.e. the homomorphism
density of R_j in the graphon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .graph import Graph, count_triangles
from .models import (BlockConstant, Constant, DegreeCorrected, DegreeFunction, Graphon,
                     ModelError, Product, RngSpec, Scaled, _as_generator)

PATTERN_IDS = tuple(range(1, 11))


@dataclass(frozen=True)
class Pattern:
    id: int
    n_nodes: int
    edges: tuple[tuple[int, int], ...]
    automorphisms: int

    @cached_property
    def degrees(self) -> tuple[int, ...]:
        d = [0] * self.n_nodes
        for u, v in self.edges:
            d[u] += 1
            d[v] += 1
        return tuple(d)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_copies(self) -> int:
        """Number of distinct copies of the pattern on a fixed node set."""
        return math.factorial(self.n_nodes) // self.automorphisms


PATTERNS: dict[int, Pattern] = {
    1: Pattern(1, 2, ((0, 1),), 2),
    2: Pattern(2, 3, ((0, 1), (0, 2)), 2),
    3: Pattern(3, 3, ((0, 1), (0, 2), (1, 2)), 6),
    4: Pattern(4, 4, ((0, 1), (0, 2), (1, 2), (0, 3)), 2),
    5: Pattern(5, 4, ((0, 1), (0, 2), (0, 3)), 6),
    6: Pattern(6, 4, ((0, 1), (1, 2), (2, 3)), 2),
    7: Pattern(7, 4, ((0, 1), (1, 2), (2, 3), (0, 3)), 8),
    8: Pattern(8, 5, ((0, 1), (1, 2), (2, 3), (3, 4)), 2),
    9: Pattern(9, 5, ((0, 1), (0, 2), (0, 3), (0, 4)), 24),
    10: Pattern(10, 5, ((0, 1), (1, 2), (2, 3), (1, 4)), 2),
}


def pattern(j: int) -> Pattern:
    try:
        return PATTERNS[j]
    except KeyError:
        raise ValueError(f"pattern id must be in 1..10, got {j}") from None


class PhiVector:
    """phi_1..phi_10 (or a subset), indexed by pattern id, with standard errors."""

    def __init__(self, values: dict[int, float], se: dict[int, float] | None = None):
        self.values = dict(values)
        self.se = {j: 0.0 for j in self.values} if se is None else dict(se)
        v = self.values
        tol = 1e-12 + 4 * max(self.se.get(1, 0), self.se.get(2, 0), self.se.get(3, 0))
        if 1 in v and 2 in v and v[2] > v[1] + tol:
            raise ValueError("phi_2 exceeds phi_1")
        if 2 in v and 3 in v and v[3] > v[2] + tol:
            raise ValueError("phi_3 exceeds phi_2")

    def __getitem__(self, j: int) -> float:
        return self.values[j]

    def __contains__(self, j: int) -> bool:
        return j in self.values

    def as_array(self) -> np.ndarray:
        return np.array([self.values[j] for j in PATTERN_IDS])

    def csv_row(self) -> str:
        return ",".join(f"{self.values[j]:.10g}" for j in sorted(self.values))

    def __repr__(self) -> str:
        body = ", ".join(f"{j}: {self.values[j]:.6g}" for j in sorted(self.values))
        return f"PhiVector({{{body}}})"


# ----------------------------------------------------------------------------
# Closed forms


def _block_pattern_sum(node_weights: np.ndarray, pi: np.ndarray, pat: Pattern) -> float:
    """sum over block labels k_1..k_p of prod_u node_weights[k_u, d_u]
    prod_{(u,v) in edges} pi[k_u, k_v]."""
    letters = "abcde"[:pat.n_nodes]
    terms = [letters[u] for u in range(pat.n_nodes)]
    ops = [node_weights[:, d] for d in pat.degrees]
    for u, v in pat.edges:
        terms.append(letters[u] + letters[v])
        ops.append(pi)
    return float(np.einsum(",".join(terms) + "->", *ops, optimize="greedy"))


def _check_sbm(alpha, pi) -> tuple[np.ndarray, np.ndarray]:
    alpha = np.asarray(alpha, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if alpha.ndim != 1 or np.any(alpha < 0) or abs(alpha.sum() - 1) > 1e-10:
        raise ModelError("block weights must form a probability vector")
    if pi.shape != (alpha.size, alpha.size) or not np.allclose(pi, pi.T, rtol=0, atol=1e-12):
        raise ModelError("connectivity matrix must be symmetric and K x K")
    return alpha, pi


def phi_sbm(alpha, pi, j: int) -> float:
    """phi_j for a stochastic block model with weights alpha and connectivity pi."""
    alpha, pi = _check_sbm(alpha, pi)
    pat = pattern(j)
    weights = np.repeat(alpha[:, None], 5, axis=1)
    return _block_pattern_sum(weights, pi, pat)


def edd_moments(g: DegreeFunction, order: int = 4) -> list[float]:
    """[g_1, ..., g_order] with g_k the integral of g(u)**k over [0, 1]."""
    return [g.moment(k) for k in range(1, order + 1)]


def phi_edd(g_moments: Sequence[float], j: int) -> float:
    """phi_j = prod over pattern nodes of g_{degree} for Phi(u, v) = g(u) g(v).

    ``g_moments[k - 1]`` holds g_k.
    """
    pat = pattern(j)
    need = max(pat.degrees)
    if len(g_moments) < need:
        raise ValueError(f"pattern {j} needs g moments up to order {need}")
    return math.prod(g_moments[d - 1] for d in pat.degrees)


def _block_moments(base: BlockConstant, g: DegreeFunction) -> np.ndarray:
    """Integral of g**d over each block, d = 0..4."""
    return np.array([[g.moment(d, a, b) if d else b - a for d in range(5)]
                     for a, b in base.block_bounds()])


def phi_exact(phi: Graphon, j: int) -> float | None:
    """Closed-form phi_j where the graphon admits one, else None."""
    pat = pattern(j)
    if isinstance(phi, Constant):
        return phi.c ** pat.n_edges
    if isinstance(phi, BlockConstant):
        return phi_sbm(phi.alpha, phi.pi, j)
    if isinstance(phi, Product):
        return phi_edd(edd_moments(phi.g), j)
    if isinstance(phi, DegreeCorrected):
        return _block_pattern_sum(_block_moments(phi.base, phi.g), phi.base.pi, pat)
    if isinstance(phi, Scaled):
        inner = phi_exact(phi.base, j)
        return None if inner is None else phi.factor ** pat.n_edges * inner
    return None


# ----------------------------------------------------------------------------
# Numerical integration


def gauss_legendre_nodes(n_nodes: int, breakpoints: Iterable[float] = ()) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on [0, 1] split at ``breakpoints``.

    Uses about ``n_nodes`` points in total and at least ten per piece
    (three when the mesh has so many pieces that ten would exceed 4096).
    """
    cuts = np.unique(np.concatenate([[0.0], [b for b in breakpoints if 0 < b < 1], [1.0]]))
    pieces = len(cuts) - 1
    floor = 10 if 10 * pieces <= 4096 else 3
    per = max(floor, -(-n_nodes // pieces))
    x, w = np.polynomial.legendre.leggauss(per)
    lo, hi = cuts[:-1, None], cuts[1:, None]
    half = (hi - lo) / 2
    return (half * x + (hi + lo) / 2).ravel(), (half * w).ravel()


def _quadrature(phi: Graphon, pat: Pattern, n_nodes: int) -> float:
    x, w = gauss_legendre_nodes(n_nodes, phi.breakpoints())
    kernel = np.asarray(phi(x[:, None], x[None, :]), dtype=float)
    letters = "abcde"[:pat.n_nodes]
    terms = list(letters)
    ops: list[np.ndarray] = [w] * pat.n_nodes
    for u, v in pat.edges:
        terms.append(letters[u] + letters[v])
        ops.append(kernel)
    return float(np.einsum(",".join(terms) + "->", *ops, optimize="greedy"))


def _montecarlo(phi: Graphon, pat: Pattern, samples: int, rng) -> tuple[float, float]:
    """Antithetic Monte-Carlo: each uniform point x is paired with 1 - x."""
    gen = _as_generator(rng)
    pairs = max(samples // 2, 1)
    block = 1 << 17
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < pairs:
        m = min(block, pairs - done)
        x = gen.random((m, pat.n_nodes))
        y = 1.0 - x
        fx = np.ones(m)
        fy = np.ones(m)
        for u, v in pat.edges:
            fx *= phi(x[:, u], x[:, v])
            fy *= phi(y[:, u], y[:, v])
        pm = (fx + fy) / 2
        total += math.fsum(pm)
        total_sq += math.fsum(pm * pm)
        done += m
    mean = total / pairs
    var = max(total_sq / pairs - mean * mean, 0.0) * pairs / max(pairs - 1, 1)
    return mean, math.sqrt(var / pairs)


def phi_graphon(phi: Graphon, j: int, method: str | None = None, budget: int | None = None,
                rng=None) -> tuple[float, float]:
    """phi_j for an arbitrary graphon, with a standard error.

    ``method``: None (closed form when available, quadrature otherwise),
    ``"quadrature"`` (tensor Gauss-Legendre, ``budget`` nodes per axis,
    default 64) or ``"montecarlo"`` (``budget`` samples, default 10**6,
    seeded by ``rng``). Closed forms and quadrature report SE = 0.
    """
    pat = pattern(j)
    if method is None:
        exact = phi_exact(phi, j)
        if exact is not None:
            return exact, 0.0
        method = "quadrature"
    if method == "quadrature":
        budget = 64 if budget is None else budget
        if budget < 2:
            raise ValueError("quadrature needs at least 2 nodes per axis")
        return _quadrature(phi, pat, budget), 0.0
    if method == "montecarlo":
        budget = 10 ** 6 if budget is None else budget
        if budget < 100:
            raise ValueError("Monte-Carlo integration needs at least 100 samples")
        return _montecarlo(phi, pat, budget, RngSpec(0) if rng is None else rng)
    raise ValueError(f"unknown integration method {method!r}")


def phi_vector(phi: Graphon, ids: Iterable[int] = PATTERN_IDS, method: str | None = None,
               budget: int | None = None, rng=None) -> PhiVector:
    vals, ses = {}, {}
    for j in ids:
        sub = rng.child(j) if isinstance(rng, RngSpec) else rng
        vals[j], ses[j] = phi_graphon(phi, j, method=method, budget=budget, rng=sub)
    return PhiVector(vals, ses)


# ----------------------------------------------------------------------------
# Empirical counts


def _search_order(pat: Pattern) -> list[int]:
    order = [0]
    while len(order) < pat.n_nodes:
        for u, v in pat.edges:
            if u in order and v not in order:
                order.append(v)
                break
            if v in order and u not in order:
                order.append(u)
                break
    return order


def count_pattern(g: Graph, j: int) -> int:
    """Number of (not necessarily induced) copies of R_j in g."""
    pat = pattern(j)
    if g.n < pat.n_nodes:
        return 0
    if j == 1:
        return g.m
    if j == 2:
        d = g.degree_array
        return int(np.sum(d * (d - 1) // 2))
    if j == 3:
        return count_triangles(g)
    nb = [set(a.tolist()) for a in g.neighbors]
    order = _search_order(pat)
    adj = {u: set() for u in range(pat.n_nodes)}
    for u, v in pat.edges:
        adj[u].add(v)
        adj[v].add(u)
    # for each position, the earlier-placed pattern neighbours it must hit
    back = [[order.index(w) for w in adj[u] if order.index(w) < k] for k, u in enumerate(order)]
    maps = 0
    image = [0] * pat.n_nodes

    def extend(k: int):
        nonlocal maps
        if k == pat.n_nodes:
            maps += 1
            return
        anchor = image[back[k][0]]
        for c in nb[anchor]:
            if c in image[:k]:
                continue
            if all(c in nb[image[b]] for b in back[k][1:]):
                image[k] = c
                extend(k + 1)

    for start in range(g.n):
        image[0] = start
        extend(1)
    return maps // pat.automorphisms


def p_hat(g: Graph, j: int) -> float:
    """Empirical frequency of R_j: count over (C(n, p) times copies per node set)."""
    pat = pattern(j)
    denom = math.comb(g.n, pat.n_nodes) * pat.n_copies
    return count_pattern(g, j) / denom if denom else 0.0


def p_hat_normalized(g: Graph, j: int, phi1_hat: float) -> float:
    """Empirical frequency divided by phi1_hat ** (number of pattern edges)."""
    if not phi1_hat > 0:
        raise ValueError("normalisation needs a positive edge density")
    return p_hat(g, j) / phi1_hat ** pattern(j).n_edges
