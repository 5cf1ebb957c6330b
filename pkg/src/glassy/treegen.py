"""Construction of complete Delta-ary trees and sampled Galton-Watson trees.

Galton-Watson sampling is breadth-first with child counts drawn in
vertex-index order, so a (seed, spec) pair replays the identical tree
vertex-for-vertex.  A vertex budget caps explosion; exceeding it raises
``TreeBudgetError`` carrying the last fully built level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import OffspringDistribution, sample_offspring_array
from .model import RootedTree

__all__ = ["TreeSpec", "TreeBudgetError", "build_tree", "level_set"]

DEFAULT_MAX_VERTICES = 5_000_000


class TreeBudgetError(RuntimeError):
    """Raised when a sampled tree would exceed its vertex budget."""

    def __init__(self, level_reached: int, vertex_count: int, budget: int):
        super().__init__(
            f"vertex budget {budget} exceeded while extending level "
            f"{level_reached} (tree had {vertex_count} vertices)"
        )
        self.level_reached = level_reached
        self.vertex_count = vertex_count
        self.budget = budget


@dataclass(frozen=True)
class TreeSpec:
    """Either a complete Delta-ary tree or a Galton-Watson sample, to height h."""

    kind: str
    height: int
    delta: int = 0
    offspring: OffspringDistribution | None = None
    max_vertices: int = DEFAULT_MAX_VERTICES

    def __post_init__(self):
        if self.kind not in ("delta_ary", "galton_watson"):
            raise ValueError(f"unknown tree kind {self.kind!r}")
        if self.height < 0:
            raise ValueError("height must be non-negative")
        if self.max_vertices < 1:
            raise ValueError("max_vertices must be positive")
        if self.kind == "delta_ary" and self.delta < 1:
            raise ValueError("delta must be >= 1")
        if self.kind == "galton_watson" and self.offspring is None:
            raise ValueError("galton_watson spec needs an offspring distribution")

    @classmethod
    def delta_ary(cls, delta: int, height: int) -> "TreeSpec":
        return cls("delta_ary", int(height), delta=int(delta))

    @classmethod
    def galton_watson(
        cls,
        offspring: OffspringDistribution,
        height: int,
        max_vertices: int = DEFAULT_MAX_VERTICES,
    ) -> "TreeSpec":
        return cls(
            "galton_watson", int(height), offspring=offspring, max_vertices=int(max_vertices)
        )


def build_tree(spec: TreeSpec, rng: np.random.Generator | None = None) -> RootedTree:
    """Materialise the spec as a RootedTree; rng is unused for delta_ary."""
    if spec.kind == "delta_ary":
        return _build_delta_ary(spec.delta, spec.height)
    if rng is None:
        raise ValueError("galton_watson sampling needs an rng stream")
    parent, depth = _sample_gw_parents(spec.offspring, spec.height, spec.max_vertices, rng)
    return RootedTree(parent, depth=depth)


def _build_delta_ary(delta: int, height: int) -> RootedTree:
    sizes = delta ** np.arange(height + 1, dtype=np.int64)
    n = int(sizes.sum())
    parent = np.empty(n, dtype=np.int64)
    parent[0] = -1
    lo = 1  # start of the level being filled
    prev_lo = 0
    for h in range(1, height + 1):
        prev = np.arange(prev_lo, lo, dtype=np.int64)
        parent[lo:lo + sizes[h]] = np.repeat(prev, delta)
        prev_lo = lo
        lo += sizes[h]
    depth = np.repeat(np.arange(height + 1, dtype=np.int64), sizes)
    return RootedTree(parent, depth=depth)


def _sample_gw_parents(
    zeta: OffspringDistribution, height: int, max_vertices: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    chunks = [np.array([-1], dtype=np.int64)]
    level_sizes = [1]
    total = 1
    level_lo, level_hi = 0, 1
    for h in range(height):
        width = level_hi - level_lo
        if width == 0:
            break  # extinct before reaching the target height
        counts = sample_offspring_array(zeta, width, rng)
        born = int(counts.sum())
        if total + born > max_vertices:
            raise TreeBudgetError(h, total, max_vertices)
        if born:
            chunks.append(np.repeat(np.arange(level_lo, level_hi, dtype=np.int64), counts))
            level_sizes.append(born)
        level_lo, level_hi = level_hi, level_hi + born
        total += born
    parent = np.concatenate(chunks)
    depth = np.repeat(np.arange(len(level_sizes), dtype=np.int64), level_sizes)
    return parent, depth


def level_set(tree: RootedTree, h: int) -> np.ndarray:
    """Vertices at depth exactly h; empty when the tree ends earlier."""
    return tree.level(h)
