"""Core domain types: rooted trees, spin configurations, coupling assignments.

Spins live in {+1, -1}. Trees use dense integer vertex indices 0..n-1 with the
root at index 0, and every edge is keyed by its child endpoint (the map
edge -> non-root vertex is a bijection). All types here are immutable after
construction and safe to share across concurrent workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "LogRatio",
    "SpinValue",
    "RootedTree",
    "GibbsParams",
    "CouplingAssignment",
    "SpinConfig",
    "path_edges",
    "common_ancestor",
]

# A spin is a plain int restricted to {+1, -1}; a log-ratio is a plain float
# where +inf encodes a vertex pinned to +1 and -inf a vertex pinned to -1.
SpinValue = int
LogRatio = float


class RootedTree:
    """Explicit rooted tree over vertices 0..n-1 with root 0.

    Constructed from a parent array where ``parent[0] == -1`` and
    ``parent[v] < v`` for every v >= 1 (parents precede children, as produced
    by breadth-first construction).  Children lists keep insertion order,
    i.e. increasing child index, so sampled trees replay byte-for-byte from
    a seed.
    """

    __slots__ = (
        "n",
        "parent",
        "depth",
        "height",
        "children_start",
        "children_flat",
        "_level_bounds",
    )

    def __init__(self, parent: Sequence[int] | np.ndarray, depth: np.ndarray | None = None):
        parent = np.asarray(parent, dtype=np.int64)
        if parent.ndim != 1 or parent.size == 0:
            raise ValueError("parent array must be 1-D and non-empty")
        n = int(parent.size)
        if parent[0] != -1:
            raise ValueError("root must be vertex 0 with parent[0] == -1")
        if n > 1:
            idx = np.arange(1, n)
            bad = (parent[1:] < 0) | (parent[1:] >= idx)
            if bad.any():
                v = int(idx[bad][0])
                raise ValueError(
                    f"parent[{v}] = {int(parent[v])}: parents must satisfy "
                    "0 <= parent[v] < v"
                )

        if depth is None:
            depth = np.zeros(n, dtype=np.int64)
            # parent[v] < v, so one forward pass settles every depth
            for v in range(1, n):
                depth[v] = depth[parent[v]] + 1
        else:
            depth = np.asarray(depth, dtype=np.int64)
            if depth.shape != parent.shape:
                raise ValueError("depth array must align with parent array")

        counts = np.bincount(parent[1:], minlength=n) if n > 1 else np.zeros(n, dtype=np.int64)
        children_start = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=children_start[1:])
        # stable sort by parent keeps children in increasing-index order
        children_flat = np.argsort(parent[1:], kind="stable").astype(np.int64) + 1

        height = int(depth.max())
        # level_bounds[h] = sorted vertex indices at depth h
        order = np.argsort(depth, kind="stable")
        sorted_depth = depth[order]
        bounds = np.searchsorted(sorted_depth, np.arange(height + 2))
        level_bounds = tuple(
            np.sort(order[bounds[h]:bounds[h + 1]]) for h in range(height + 1)
        )

        for arr in (parent, depth, children_start, children_flat):
            arr.setflags(write=False)
        for arr in level_bounds:
            arr.setflags(write=False)

        self.n = n
        self.parent = parent
        self.depth = depth
        self.height = height
        self.children_start = children_start
        self.children_flat = children_flat
        self._level_bounds = level_bounds

    @property
    def root(self) -> int:
        return 0

    @property
    def vertex_count(self) -> int:
        return self.n

    @property
    def edge_count(self) -> int:
        return self.n - 1

    def children(self, v: int) -> np.ndarray:
        """Ordered children of v (insertion order == increasing index)."""
        self._check_vertex(v)
        return self.children_flat[self.children_start[v]:self.children_start[v + 1]]

    def level(self, h: int) -> np.ndarray:
        """Vertices at depth exactly h; empty beyond the tree height."""
        if h < 0:
            raise ValueError("depth must be non-negative")
        if h > self.height:
            return np.empty(0, dtype=np.int64)
        return self._level_bounds[h]

    def ancestors(self, v: int) -> np.ndarray:
        """Path of vertices from the root down to v, inclusive."""
        self._check_vertex(v)
        out = np.empty(self.depth[v] + 1, dtype=np.int64)
        w = v
        for i in range(self.depth[v], -1, -1):
            out[i] = w
            w = self.parent[w]
        return out

    def _check_vertex(self, v: int) -> None:
        if not 0 <= v < self.n:
            raise ValueError(f"unknown vertex index {v} (tree has {self.n} vertices)")

    def __repr__(self) -> str:  # pragma: no cover
        return f"RootedTree(n={self.n}, height={self.height})"


def path_edges(tree: RootedTree, u: int, w: int) -> list[int]:
    """Edges of the unique u-w path, keyed by child endpoint, ordered u -> w.

    Empty when u == w.
    """
    tree._check_vertex(u)
    tree._check_vertex(w)
    up: list[int] = []
    down: list[int] = []
    a, b = u, w
    while tree.depth[a] > tree.depth[b]:
        up.append(a)
        a = int(tree.parent[a])
    while tree.depth[b] > tree.depth[a]:
        down.append(b)
        b = int(tree.parent[b])
    while a != b:
        up.append(a)
        down.append(b)
        a = int(tree.parent[a])
        b = int(tree.parent[b])
    return up + down[::-1]


def common_ancestor(tree: RootedTree, u: int, v: int) -> int:
    """Deepest vertex lying on both the root-to-u and root-to-v paths."""
    tree._check_vertex(u)
    tree._check_vertex(v)
    a, b = u, v
    while tree.depth[a] > tree.depth[b]:
        a = int(tree.parent[a])
    while tree.depth[b] > tree.depth[a]:
        b = int(tree.parent[b])
    while a != b:
        a = int(tree.parent[a])
        b = int(tree.parent[b])
    return a


@dataclass(frozen=True)
class GibbsParams:
    """Inverse temperature plus the coupling distribution on the edges."""

    beta: float
    phi: "CouplingDistribution"  # noqa: F821 - defined in glassy.distributions

    def __post_init__(self):
        if not np.isfinite(self.beta) or self.beta < 0:
            raise ValueError(f"beta must be finite and >= 0, got {self.beta}")


class CouplingAssignment:
    """One real coupling per tree edge, keyed by the child vertex.

    ``values[v - 1]`` is the coupling of the edge {parent(v), v}.
    """

    __slots__ = ("values",)

    def __init__(self, values: Sequence[float] | np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError("coupling values must be a 1-D array")
        if values.size and not np.isfinite(values).all():
            raise ValueError("couplings must be finite")
        values = values.copy()
        values.setflags(write=False)
        self.values = values

    def coupling(self, child: int) -> float:
        """Coupling of the edge identified by its child endpoint."""
        if not 1 <= child <= self.values.size:
            raise ValueError(f"no edge keyed by child vertex {child}")
        return float(self.values[child - 1])

    def __len__(self) -> int:
        return int(self.values.size)

    def __repr__(self) -> str:  # pragma: no cover
        return f"CouplingAssignment(edges={self.values.size})"


class SpinConfig:
    """A +-1 assignment on a vertex subset (its support)."""

    __slots__ = ("vertices", "values")

    def __init__(self, vertices: Iterable[int], values: Iterable[int]):
        vertices = np.asarray(list(vertices) if not isinstance(vertices, np.ndarray) else vertices, dtype=np.int64)
        values = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=np.int8)
        if vertices.shape != values.shape or vertices.ndim != 1:
            raise ValueError("vertices and values must be 1-D and aligned")
        if np.unique(vertices).size != vertices.size:
            raise ValueError("support contains repeated vertices")
        if values.size and not np.isin(values, (-1, 1)).all():
            raise ValueError("spins must be +1 or -1")
        vertices = vertices.copy()
        values = values.copy()
        vertices.setflags(write=False)
        values.setflags(write=False)
        self.vertices = vertices
        self.values = values

    @classmethod
    def empty(cls) -> "SpinConfig":
        return cls(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int8))

    def dense(self, n: int) -> np.ndarray:
        """int8 array of length n: +-1 on the support, 0 elsewhere."""
        out = np.zeros(n, dtype=np.int8)
        out[self.vertices] = self.values
        return out

    def spin(self, v: int) -> int:
        hits = np.nonzero(self.vertices == v)[0]
        if hits.size == 0:
            raise KeyError(f"vertex {v} is not in the support")
        return int(self.values[hits[0]])

    def __len__(self) -> int:
        return int(self.vertices.size)

    def __contains__(self, v: int) -> bool:
        return bool(np.any(self.vertices == v))

    def __repr__(self) -> str:  # pragma: no cover
        return f"SpinConfig(support={self.vertices.size})"
