"""Independent-edge (HER) and exchangeable (graphon) random graph models.

Every sampler draws from a :class:`RngSpec`, so a given ``(seed, stream)``
always yields the same graph. Pair draws follow the lexicographic order of
the ``i < j`` pairs.
"""

from __future__ import annotations

import csv
import io
import json
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .graph import Graph

# pairs drawn per sampling chunk; bounds memory at large n
_CHUNK_PAIRS = 1 << 22


class ModelError(ValueError):
    """Invalid model parameters."""


class GraphonRangeError(ModelError):
    """A graphon takes values outside [0, 1]."""


@dataclass(frozen=True)
class RngSpec:
    """Master seed plus a stream key (replicate id, or a tuple of ids)."""

    seed: int
    stream: int | tuple[int, ...] = 0

    def generator(self) -> np.random.Generator:
        key = self.stream if isinstance(self.stream, tuple) else (self.stream,)
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=tuple(int(k) for k in key))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, *key: int) -> "RngSpec":
        base = self.stream if isinstance(self.stream, tuple) else (self.stream,)
        return RngSpec(self.seed, tuple(base) + tuple(key))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngSpec):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


# ----------------------------------------------------------------------------
# HER probability matrices


class ProbMatrix:
    """Symmetric edge-probability matrix with zero diagonal."""

    def __init__(self, p, check: bool = True):
        p = np.array(p, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ModelError("probability matrix must be square")
        if check:
            if not np.allclose(p, p.T, rtol=0, atol=1e-12):
                raise ModelError("probability matrix must be symmetric")
            if np.any(np.diag(p) != 0):
                raise ModelError("probability matrix must have a zero diagonal")
            if np.any(p < 0) or np.any(p > 1) or not np.all(np.isfinite(p)):
                raise ModelError("probabilities must lie in [0, 1]")
            p = (p + p.T) / 2
        p.setflags(write=False)
        self.p = p

    @classmethod
    def constant(cls, n: int, c: float) -> "ProbMatrix":
        p = np.full((n, n), float(c))
        np.fill_diagonal(p, 0.0)
        return cls(p)

    @classmethod
    def from_upper(cls, n: int, values) -> "ProbMatrix":
        """Build from the n(n-1)/2 lexicographic pair values."""
        values = np.asarray(values, dtype=float)
        p = np.zeros((n, n))
        iu = np.triu_indices(n, 1)
        p[iu] = values
        return cls(p + p.T)

    @property
    def n(self) -> int:
        return self.p.shape[0]

    @cached_property
    def upper(self) -> np.ndarray:
        return self.p[np.triu_indices(self.n, 1)]

    def mean(self) -> float:
        """Mean off-diagonal probability (the density of the model)."""
        if self.n < 2:
            return 0.0
        return float(self.upper.mean())

    def __repr__(self) -> str:
        return f"ProbMatrix(n={self.n}, mean={self.mean():.4g})"


# ----------------------------------------------------------------------------
# Degree functions g for product-form graphons


class DegreeFunction(ABC):
    """Nonnegative function g on [0, 1] used in Phi(u, v) = g(u) g(v)."""

    @abstractmethod
    def __call__(self, u): ...

    @abstractmethod
    def moment(self, k: int, a: float = 0.0, b: float = 1.0) -> float:
        """Integral of g(u)**k over [a, b]."""

    @abstractmethod
    def sup(self, a: float = 0.0, b: float = 1.0) -> float: ...

    def breakpoints(self) -> tuple[float, ...]:
        return ()

    @abstractmethod
    def to_dict(self) -> dict: ...


@dataclass(frozen=True)
class PowerG(DegreeFunction):
    """g(u) = c * u**(beta - 1), beta >= 1."""

    c: float
    beta: float

    def __post_init__(self):
        if self.c < 0:
            raise ModelError("power-form scale must be nonnegative")
        if self.beta < 1:
            raise ModelError("power-form exponent beta must be >= 1 (g unbounded otherwise)")

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.beta == 1:
            return np.full_like(u, self.c)
        return self.c * u ** (self.beta - 1)

    def moment(self, k: int, a: float = 0.0, b: float = 1.0) -> float:
        s = k * (self.beta - 1) + 1
        return self.c ** k * (b ** s - a ** s) / s

    def sup(self, a: float = 0.0, b: float = 1.0) -> float:
        return float(self(b))

    def breakpoints(self) -> tuple[float, ...]:
        # u**s with non-integer s is not smooth at 0; a mesh graded
        # geometrically towards 0 restores fast quadrature convergence
        if float(self.beta).is_integer():
            return ()
        return tuple(2.0 ** -k for k in range(1, 31))

    def to_dict(self) -> dict:
        return {"type": "power", "c": self.c, "beta": self.beta}


class TabulatedG(DegreeFunction):
    """Piecewise-linear g through values at m uniform nodes on [0, 1]."""

    def __init__(self, values: Sequence[float]):
        v = np.asarray(values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ModelError("tabulated g needs at least two node values")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ModelError("tabulated g must be nonnegative and finite")
        v.setflags(write=False)
        self.values = v
        self.nodes = np.linspace(0.0, 1.0, v.size)

    def __call__(self, u):
        return np.interp(u, self.nodes, self.values)

    def moment(self, k: int, a: float = 0.0, b: float = 1.0) -> float:
        # g**k is a degree-k polynomial on each linear piece: a Gauss rule
        # with ceil((k+1)/2) points per piece integrates it exactly
        cuts = np.concatenate([[a], self.nodes[(self.nodes > a) & (self.nodes < b)], [b]])
        x, w = np.polynomial.legendre.leggauss(k // 2 + 1)
        lo, hi = cuts[:-1, None], cuts[1:, None]
        pts = (hi - lo) / 2 * x[None, :] + (hi + lo) / 2
        return float(np.sum((hi - lo) / 2 * w[None, :] * self(pts) ** k))

    def sup(self, a: float = 0.0, b: float = 1.0) -> float:
        inner = self.values[(self.nodes > a) & (self.nodes < b)]
        return float(max(np.max(inner, initial=0.0), self(a), self(b)))

    def breakpoints(self) -> tuple[float, ...]:
        return tuple(self.nodes[1:-1])

    def to_dict(self) -> dict:
        return {"type": "tabulated", "values": self.values.tolist()}

    def __eq__(self, other):
        return isinstance(other, TabulatedG) and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())


def degree_function_from_dict(d: dict) -> DegreeFunction:
    kind = d.get("type")
    if kind == "power":
        return PowerG(float(d["c"]), float(d["beta"]))
    if kind == "tabulated":
        return TabulatedG(d["values"])
    raise ModelError(f"unknown degree-function type {kind!r}")


# ----------------------------------------------------------------------------
# Graphons


class Graphon(ABC):
    """Symmetric measurable function Phi: [0, 1]^2 -> [0, 1]."""

    @abstractmethod
    def __call__(self, u, v) -> np.ndarray: ...

    @abstractmethod
    def sup(self) -> float: ...

    def breakpoints(self) -> tuple[float, ...]:
        """Interior points where Phi may be non-smooth (used by quadrature)."""
        return ()

    @abstractmethod
    def to_dict(self) -> dict: ...

    def check_range(self) -> None:
        s = self.sup()
        if s > 1 + 1e-12:
            raise GraphonRangeError(f"graphon exceeds 1 (sup = {s:.6g})")

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True)
class Constant(Graphon):
    c: float

    def __post_init__(self):
        if not 0 <= self.c <= 1:
            raise GraphonRangeError(f"constant graphon value {self.c} outside [0, 1]")

    def __call__(self, u, v):
        return np.full(np.broadcast(np.asarray(u), np.asarray(v)).shape, float(self.c))

    def sup(self) -> float:
        return float(self.c)

    def to_dict(self) -> dict:
        return {"type": "constant", "c": self.c}


class BlockConstant(Graphon):
    """Stochastic block model as a blockwise-constant graphon.

    Block k covers the interval between the (k-1)th and kth cumulative
    weight, so a uniform latent u picks its block by inverse CDF.
    """

    def __init__(self, alpha, pi):
        alpha = np.asarray(alpha, dtype=float)
        pi = np.asarray(pi, dtype=float)
        if alpha.ndim != 1 or alpha.size < 1:
            raise ModelError("block weights must be a nonempty vector")
        if np.any(alpha <= 0) or abs(alpha.sum() - 1) > 1e-10:
            raise ModelError("block weights must be positive and sum to 1")
        K = alpha.size
        if pi.shape != (K, K):
            raise ModelError(f"connectivity must be {K}x{K}")
        if not np.allclose(pi, pi.T, rtol=0, atol=1e-12):
            raise ModelError("connectivity matrix must be symmetric")
        if np.any(pi < 0) or np.any(pi > 1):
            raise GraphonRangeError("connectivity values must lie in [0, 1]")
        alpha = alpha / alpha.sum()
        alpha.setflags(write=False)
        pi = (pi + pi.T) / 2
        pi.setflags(write=False)
        self.alpha = alpha
        self.pi = pi
        edges = np.cumsum(alpha)
        edges[-1] = 1.0
        self._cuts = edges

    @property
    def K(self) -> int:
        return self.alpha.size

    def block_of(self, u) -> np.ndarray:
        k = np.searchsorted(self._cuts, np.asarray(u, dtype=float), side="right")
        return np.minimum(k, self.K - 1)

    def block_bounds(self) -> list[tuple[float, float]]:
        lo = np.concatenate([[0.0], self._cuts[:-1]])
        return list(zip(lo.tolist(), self._cuts.tolist()))

    def __call__(self, u, v):
        return self.pi[self.block_of(u), self.block_of(v)]

    def sup(self) -> float:
        return float(self.pi.max())

    def breakpoints(self) -> tuple[float, ...]:
        return tuple(self._cuts[:-1])

    def to_dict(self) -> dict:
        return {"type": "block", "alpha": self.alpha.tolist(), "pi": self.pi.tolist()}

    def __eq__(self, other):
        return (isinstance(other, BlockConstant) and np.array_equal(self.alpha, other.alpha)
                and np.array_equal(self.pi, other.pi))

    def __hash__(self):
        return hash((self.alpha.tobytes(), self.pi.tobytes()))

    def __repr__(self):
        return f"BlockConstant(K={self.K})"


@dataclass(frozen=True)
class Product(Graphon):
    """Expected-degree-distribution graphon Phi(u, v) = g(u) g(v)."""

    g: DegreeFunction

    def __call__(self, u, v):
        return self.g(u) * self.g(v)

    def sup(self) -> float:
        return self.g.sup() ** 2

    def breakpoints(self) -> tuple[float, ...]:
        return self.g.breakpoints()

    def to_dict(self) -> dict:
        return {"type": "product", "g": self.g.to_dict()}


@dataclass(frozen=True)
class DegreeCorrected(Graphon):
    """Block graphon modulated by a product term: pi[k(u), k(v)] g(u) g(v).

    Reduces to ``base`` when g == 1 and to ``Product(g)`` when K == 1.
    """

    base: BlockConstant
    g: DegreeFunction

    def __call__(self, u, v):
        return self.base(u, v) * self.g(u) * self.g(v)

    def sup(self) -> float:
        gs = np.array([self.g.sup(a, b) for a, b in self.base.block_bounds()])
        return float(np.max(self.base.pi * np.outer(gs, gs)))

    def breakpoints(self) -> tuple[float, ...]:
        return tuple(sorted(set(self.base.breakpoints()) | set(self.g.breakpoints())))

    def to_dict(self) -> dict:
        return {"type": "degree_corrected", "base": self.base.to_dict(), "g": self.g.to_dict()}


class Grid(Graphon):
    """Bilinear interpolation of values tabulated on an m x m uniform grid
    (grid nodes include 0 and 1)."""

    def __init__(self, values):
        v = np.asarray(values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 2:
            raise ModelError("grid graphon needs an m x m table with m >= 2")
        if not np.allclose(v, v.T, rtol=0, atol=1e-12):
            raise ModelError("grid graphon must be symmetric")
        if np.any(v < 0) or np.any(v > 1):
            raise GraphonRangeError("grid graphon values must lie in [0, 1]")
        v = (v + v.T) / 2
        v.setflags(write=False)
        self.values = v

    @property
    def m(self) -> int:
        return self.values.shape[0]

    def __call__(self, u, v):
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        h = self.m - 1
        x, y = u * h, v * h
        i = np.clip(np.floor(x).astype(np.int64), 0, h - 1)
        j = np.clip(np.floor(y).astype(np.int64), 0, h - 1)
        fx, fy = x - i, y - j
        t = self.values
        return ((1 - fx) * (1 - fy) * t[i, j] + fx * (1 - fy) * t[i + 1, j]
                + (1 - fx) * fy * t[i, j + 1] + fx * fy * t[i + 1, j + 1])

    def sup(self) -> float:
        return float(self.values.max())

    def breakpoints(self) -> tuple[float, ...]:
        return tuple(np.linspace(0, 1, self.m)[1:-1])

    def to_dict(self) -> dict:
        return {"type": "grid", "m": self.m, "values": self.values.ravel().tolist()}

    @classmethod
    def from_function(cls, f, m: int) -> "Grid":
        x = np.linspace(0, 1, m)
        return cls(f(x[:, None], x[None, :]))

    def __eq__(self, other):
        return isinstance(other, Grid) and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())

    def __repr__(self):
        return f"Grid(m={self.m})"


@dataclass(frozen=True)
class Scaled(Graphon):
    base: Graphon
    factor: float

    def __post_init__(self):
        if not 0 < self.factor:
            raise ModelError("scale factor must be positive")
        if self.factor * self.base.sup() > 1 + 1e-12:
            raise GraphonRangeError(
                f"scaled graphon exceeds 1 (sup = {self.factor * self.base.sup():.6g})")

    def __call__(self, u, v):
        return self.factor * self.base(u, v)

    def sup(self) -> float:
        return self.factor * self.base.sup()

    def breakpoints(self) -> tuple[float, ...]:
        return self.base.breakpoints()

    def to_dict(self) -> dict:
        return {"type": "scaled", "factor": self.factor, "base": self.base.to_dict()}


def graphon_from_dict(d: dict) -> Graphon:
    kind = d.get("type")
    try:
        if kind == "constant":
            return Constant(float(d["c"]))
        if kind == "block":
            return BlockConstant(d["alpha"], d["pi"])
        if kind == "product":
            return Product(degree_function_from_dict(d["g"]))
        if kind == "degree_corrected":
            base = graphon_from_dict(d["base"])
            if not isinstance(base, BlockConstant):
                raise ModelError("degree_corrected base must be a block graphon")
            return DegreeCorrected(base, degree_function_from_dict(d["g"]))
        if kind == "grid":
            m = int(d["m"])
            vals = np.asarray(d["values"], dtype=float)
            if vals.size != m * m:
                raise ModelError(f"grid graphon expects {m * m} values, got {vals.size}")
            return Grid(vals.reshape(m, m))
        if kind == "scaled":
            return Scaled(graphon_from_dict(d["base"]), float(d["factor"]))
    except KeyError as exc:
        raise ModelError(f"graphon of type {kind!r} is missing field {exc}") from None
    raise ModelError(f"unknown graphon type {kind!r}")


def read_graphon(text: str) -> Graphon:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"graphon file: {exc}") from None
    return graphon_from_dict(d)


def read_prob_matrix(text: str) -> ProbMatrix:
    """CSV: a first line holding n, then n comma-separated rows."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise ModelError("empty probability-matrix file")
    try:
        n = int(rows[0][0])
    except ValueError:
        raise ModelError("line 1: expected node count") from None
    if len(rows) - 1 != n:
        raise ModelError(f"expected {n} matrix rows, got {len(rows) - 1}")
    p = np.empty((n, n))
    for r, row in enumerate(rows[1:]):
        if len(row) != n:
            raise ModelError(f"line {r + 2}: expected {n} values, got {len(row)}")
        try:
            p[r] = [float(c) for c in row]
        except ValueError:
            raise ModelError(f"line {r + 2}: malformed number") from None
    return ProbMatrix(p)


def write_prob_matrix(p: ProbMatrix) -> str:
    out = io.StringIO()
    out.write(f"{p.n}\n")
    w = csv.writer(out, lineterminator="\n")
    for row in p.p:
        w.writerow([repr(float(x)) for x in row])
    return out.getvalue()


# ----------------------------------------------------------------------------
# Samplers


def _sample_rows(n: int, row_probs, gen: np.random.Generator) -> Graph:
    """Draw one uniform per pair in lexicographic order, chunked by rows.

    ``row_probs(i0, i1)`` returns the concatenated probabilities of pairs
    (i, j), j > i, for rows i0 <= i < i1.
    """
    keys = []
    offset = 0
    i0 = 0
    while i0 < n - 1:
        i1 = i0
        size = 0
        while i1 < n - 1 and (size == 0 or size + (n - 1 - i1) <= _CHUNK_PAIRS):
            size += n - 1 - i1
            i1 += 1
        probs = row_probs(i0, i1)
        hit = gen.random(size) < probs
        keys.append(np.flatnonzero(hit) + offset)
        offset += size
        i0 = i1
    k = np.concatenate(keys) if keys else np.empty(0, dtype=np.int64)
    return Graph.from_pair_keys(n, k)


def sample_her(p: ProbMatrix, rng) -> Graph:
    """Independent edges with probabilities p_ij."""
    gen = _as_generator(rng)
    n = p.n
    up = p.upper
    starts = np.concatenate([[0], np.cumsum(np.arange(n - 1, 0, -1))])

    def row_probs(i0, i1):
        return up[starts[i0]:starts[i1]]

    return _sample_rows(n, row_probs, gen)


def sample_eg(phi: Graphon, n: int, rng) -> tuple[Graph, np.ndarray]:
    """Exchangeable graph: latent u_i ~ U[0, 1], then Bernoulli(Phi(u_i, u_j)).

    Returns the graph and the latent positions.
    """
    phi.check_range()
    gen = _as_generator(rng)
    u = gen.random(n)

    def row_probs(i0, i1):
        return np.concatenate([phi(u[i], u[i + 1:]) for i in range(i0, i1)])

    return _sample_rows(n, row_probs, gen), u


def conditional_matrix(phi: Graphon, u) -> ProbMatrix:
    """HER matrix p_ij = Phi(u_i, u_j) obtained by fixing the latent positions."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0) or np.any(u > 1):
        raise ModelError("latent positions must lie in [0, 1]")
    p = np.array(phi(u[:, None], u[None, :]), dtype=float)
    np.fill_diagonal(p, 0.0)
    return ProbMatrix(p)


def sparsify_vanish(model, a: float, n: int):
    """Multiply every probability (or graphon value) by n**-a."""
    if a < 0:
        raise ModelError("vanishing exponent must be nonnegative")
    factor = float(n) ** (-a)
    if isinstance(model, ProbMatrix):
        return ProbMatrix(model.p * factor, check=False) if a else model
    if isinstance(model, Graphon):
        if a == 0:
            return model
        if isinstance(model, Scaled):
            return Scaled(model.base, model.factor * factor)
        return Scaled(model, factor)
    raise TypeError(f"cannot sparsify {type(model).__name__}")


def sparsify_thin(p: ProbMatrix, b: float, n: int, rng) -> ProbMatrix:
    """Keep each pair's probability with chance n**-b, else set it to zero."""
    if b < 0:
        raise ModelError("thinning exponent must be nonnegative")
    gen = _as_generator(rng)
    keep = gen.random(p.upper.size) < float(n) ** (-b)
    return ProbMatrix.from_upper(p.n, np.where(keep, p.upper, 0.0))


__all__ = [
    "BlockConstant", "Constant", "DegreeCorrected", "DegreeFunction", "Graphon",
    "GraphonRangeError", "Grid", "ModelError", "PowerG", "ProbMatrix", "Product",
    "RngSpec", "Scaled", "TabulatedG", "conditional_matrix", "graphon_from_dict",
    "read_graphon", "read_prob_matrix", "sample_eg", "sample_her", "sparsify_thin",
    "sparsify_vanish", "write_prob_matrix",
]
