"""Undirected simple graphs, degree summaries and edge-list IO."""

from __future__ import annotations

import io
from dataclasses import dataclass
from functools import cached_property
from typing import TextIO

import numpy as np


class GraphError(ValueError):
    """Raised for invalid graph input (self-loops, bad ids, parse errors)."""


def pair_index(n: int, i, j):
    """Lexicographic index of the unordered pair (i, j), i < j, among all
    n(n-1)/2 pairs."""
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    return i * (2 * n - i - 1) // 2 + (j - i - 1)


def _row_start(n: int, i):
    return i * (2 * n - i - 1) // 2


def pair_from_index(n: int, k):
    """Inverse of :func:`pair_index`."""
    k = np.asarray(k, dtype=np.int64)
    b = 2 * n - 1
    i = np.floor((b - np.sqrt(np.maximum(b * b - 8.0 * k, 0.0))) / 2).astype(np.int64)
    # float rounding can put i one row off in either direction
    i = np.where(_row_start(n, i) > k, i - 1, i)
    i = np.where(_row_start(n, i + 1) <= k, i + 1, i)
    j = k - _row_start(n, i) + i + 1
    return i, j


@dataclass(frozen=True)
class DegreeSummary:
    degrees: np.ndarray
    m1: int
    m2: int
    triangles: int


class Graph:
    """Immutable undirected graph on nodes ``0..n-1`` without self-loops.

    Edges are kept as a lexicographically sorted ``(m, 2)`` array of
    ``i < j`` pairs.
    """

    __slots__ = ("n", "edges", "__dict__")

    def __init__(self, n: int, edges=None):
        if n < 1:
            raise GraphError(f"node count must be positive, got {n}")
        self.n = int(n)
        if edges is None:
            e = np.empty((0, 2), dtype=np.int64)
        else:
            e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size:
            if np.any(e[:, 0] == e[:, 1]):
                raise GraphError("self-loops are not allowed")
            if e.min() < 0 or e.max() >= self.n:
                raise GraphError(f"node id out of range [0, {self.n})")
            e = np.sort(e, axis=1)
            keys = np.unique(pair_index(self.n, e[:, 0], e[:, 1]))
            i, j = pair_from_index(self.n, keys)
            e = np.column_stack([i, j])
        e.setflags(write=False)
        self.edges = e

    @classmethod
    def from_pair_keys(cls, n: int, keys) -> "Graph":
        """Build from sorted unique lexicographic pair indices."""
        i, j = pair_from_index(n, np.asarray(keys, dtype=np.int64))
        g = cls.__new__(cls)
        g.n = int(n)
        e = np.column_stack([i, j]).astype(np.int64)
        e.setflags(write=False)
        g.edges = e
        return g

    @classmethod
    def from_pair_mask(cls, n: int, mask) -> "Graph":
        """Build from a boolean vector over the n(n-1)/2 lexicographic pairs."""
        return cls.from_pair_keys(n, np.flatnonzero(mask))

    @classmethod
    def from_adjacency(cls, a) -> "Graph":
        a = np.asarray(a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise GraphError("adjacency must be square")
        if np.any(np.diag(a) != 0):
            raise GraphError("self-loops are not allowed")
        if not np.array_equal(a != 0, (a != 0).T):
            raise GraphError("adjacency must be symmetric")
        i, j = np.nonzero(np.triu(a != 0, 1))
        return cls(a.shape[0], np.column_stack([i, j]))

    @classmethod
    def complete(cls, n: int) -> "Graph":
        i, j = np.triu_indices(n, 1)
        return cls(n, np.column_stack([i, j]))

    @property
    def m(self) -> int:
        return int(self.edges.shape[0])

    @cached_property
    def _keys(self) -> np.ndarray:
        return pair_index(self.n, self.edges[:, 0], self.edges[:, 1])

    def has_edge(self, i: int, j: int) -> bool:
        if i == j:
            return False
        i, j = min(i, j), max(i, j)
        k = int(pair_index(self.n, i, j))
        pos = np.searchsorted(self._keys, k)
        return bool(pos < len(self._keys) and self._keys[pos] == k)

    @cached_property
    def degree_array(self) -> np.ndarray:
        d = np.bincount(self.edges.ravel(), minlength=self.n).astype(np.int64)
        d.setflags(write=False)
        return d

    @cached_property
    def neighbors(self) -> list[np.ndarray]:
        """Sorted neighbour arrays, one per node."""
        src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        cuts = np.searchsorted(src, np.arange(self.n + 1))
        return [dst[cuts[v]:cuts[v + 1]] for v in range(self.n)]

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.int8)
        a[self.edges[:, 0], self.edges[:, 1]] = 1
        a[self.edges[:, 1], self.edges[:, 0]] = 1
        return a

    def __eq__(self, other) -> bool:
        return (isinstance(other, Graph) and self.n == other.n
                and np.array_equal(self.edges, other.edges))

    def __hash__(self):
        return hash((self.n, self.edges.tobytes()))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"


def degrees(g: Graph) -> np.ndarray:
    return g.degree_array


def count_triangles(g: Graph) -> int:
    """Count triangles by intersecting neighbour sets along each edge.

    Each triangle is seen once per edge, so the total is divided by three.
    """
    if g.m == 0:
        return 0
    nb = g.neighbors
    deg = g.degree_array
    total = 0
    for i, j in g.edges:
        a, b = nb[i], nb[j]
        if deg[i] > deg[j]:
            a, b = b, a
        total += int(np.count_nonzero(np.isin(a, b, assume_unique=True)))
    return total // 3


def summarize(g: Graph) -> DegreeSummary:
    d = g.degree_array
    m2 = int(np.sum(d * (d - 1) // 2))
    return DegreeSummary(degrees=d, m1=g.m, m2=m2, triangles=count_triangles(g))


def read_edge_list(stream: TextIO | str, n: int | None = None) -> Graph:
    """Parse whitespace-separated ``i j`` pairs; ``#`` starts a comment line.

    Node ids are 0-based. Without an explicit ``n`` the node count is the
    largest id plus one.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    pairs = []
    for lineno, line in enumerate(stream, start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        tok = s.split()
        if len(tok) != 2:
            raise GraphError(f"line {lineno}: expected two node ids, got {s!r}")
        try:
            i, j = int(tok[0]), int(tok[1])
        except ValueError:
            raise GraphError(f"line {lineno}: malformed node id in {s!r}") from None
        if i < 0 or j < 0:
            raise GraphError(f"line {lineno}: negative node id")
        if i == j:
            raise GraphError(f"line {lineno}: self-loop {i}-{j} not allowed")
        if n is not None and max(i, j) >= n:
            raise GraphError(f"line {lineno}: node id {max(i, j)} >= n={n}")
        pairs.append((i, j))
    if n is None:
        n = max((max(p) for p in pairs), default=-1) + 1
        if n == 0:
            raise GraphError("empty edge list needs an explicit node count")
    return Graph(n, pairs)


def relabel_edge_list(stream: TextIO | str) -> tuple[Graph, dict[str, int]]:
    """Read an edge list with arbitrary string labels.

    Labels are mapped to dense ids in order of first appearance; the map is
    returned alongside the graph.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    labels: dict[str, int] = {}
    pairs = []
    for lineno, line in enumerate(stream, start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        tok = s.split()
        if len(tok) != 2:
            raise GraphError(f"line {lineno}: expected two labels, got {s!r}")
        if tok[0] == tok[1]:
            raise GraphError(f"line {lineno}: self-loop {tok[0]} not allowed")
        ids = [labels.setdefault(t, len(labels)) for t in tok]
        pairs.append(ids)
    if not labels:
        raise GraphError("empty edge list")
    return Graph(len(labels), pairs), labels


def write_edge_list(g: Graph, stream: TextIO | None = None,
                    header: bool = True) -> str | None:
    """Write the canonical form: sorted unique ``i j`` pairs with i < j."""
    lines = [f"# n={g.n}\n"] if header else []
    lines.extend(f"{i} {j}\n" for i, j in g.edges.tolist())
    text = "".join(lines)
    if stream is None:
        return text
    stream.write(text)
    return None


def parse_node_count(text: str) -> int | None:
    """Recover ``n`` from a ``# n=...`` header written by write_edge_list."""
    for line in text.splitlines():
        s = line.strip()
        if s.startswith("#") and "n=" in s:
            try:
                return int(s.split("n=", 1)[1].split()[0])
            except (ValueError, IndexError):
                return None
        if s and not s.startswith("#"):
            break
    return None

