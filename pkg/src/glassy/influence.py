"""Edge influences, path products, the TV upper bound, and the disagreement
coupling simulator.

The influence of an edge with coupling J is |tanh(beta*J/2)|, the largest
derivative of the root log-ratio recursion in the child variable; the signed
version drops the absolute value.  Path products of squared influences are
accumulated in log space with an explicit zero mask, so exact zeros survive
and deep paths cannot underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .inference import GibbsInstance
from .seeds import trial_rng

__all__ = [
    "InfluenceAssignment",
    "influences",
    "gradient_sup_check",
    "tv_upper_bound",
    "down_coupling_simulate",
    "root_product_table",
]


@dataclass(frozen=True)
class InfluenceAssignment:
    """Per-edge influences, indexed by child vertex - 1."""

    gamma: np.ndarray
    signed_gamma: np.ndarray


def influences(instance: GibbsInstance) -> InfluenceAssignment:
    signed = np.tanh(0.5 * instance.edge_weights())
    return InfluenceAssignment(gamma=np.abs(signed), signed_gamma=signed)


def gradient_sup_check(beta: float, j: float, grid: np.ndarray) -> float:
    """Largest |d/dx| of the per-child recursion term over the given grid.

    The derivative is -(1 - e^{2a}) e^x / ((e^{a+x}+1)(e^x+e^a)) with
    a = beta*j; its magnitude is evaluated in log space.  The supremum over
    all of R is attained at x = 0 and equals |tanh(a/2)|, which this grid
    maximum can only approach from below.
    """
    a = beta * j
    if a == 0.0:
        return 0.0
    grid = np.asarray(grid, dtype=np.float64)
    if a > 0:
        log_num = 2.0 * a + math.log1p(-math.exp(-2.0 * a)) if a < 350 else 2.0 * a
    else:
        log_num = math.log1p(-math.exp(2.0 * a)) if a > -350 else 0.0
    log_mag = log_num + grid - np.logaddexp(a + grid, 0.0) - np.logaddexp(grid, a)
    return float(np.exp(log_mag).max())


def root_product_table(instance: GibbsInstance) -> tuple[np.ndarray, np.ndarray]:
    """(zero_mask, log_prod) of prod of squared influences from the root.

    Entry v describes prod_{e in path(root, v)} gamma_e^2; the root row is
    the empty product (mask False, log 0).
    """
    tree = instance.tree
    gamma = influences(instance).gamma
    zero = np.zeros(tree.n, dtype=bool)
    log_prod = np.zeros(tree.n)
    with np.errstate(divide="ignore"):
        edge_log = 2.0 * np.log(gamma)
    edge_zero = gamma == 0.0
    for h in range(1, tree.height + 1):
        verts = tree.level(h)
        parents = tree.parent[verts]
        zero[verts] = zero[parents] | edge_zero[verts - 1]
        log_prod[verts] = log_prod[parents] + np.where(
            edge_zero[verts - 1], 0.0, edge_log[verts - 1]
        )
    return zero, log_prod


def tv_upper_bound(instance: GibbsInstance, h: int) -> float:
    """sqrt of the sum over depth-h vertices of path products of gamma^2."""
    verts = instance.tree.level(h)
    if verts.size == 0:
        return 0.0
    zero, log_prod = root_product_table(instance)
    live = ~zero[verts]
    return float(math.sqrt(np.exp(log_prod[verts][live]).sum())) if live.any() else 0.0


def down_coupling_simulate(
    instance: GibbsInstance,
    h: int,
    trials: int,
    seed: int,
    *,
    chunk: int = 8192,
) -> dict[int, float]:
    """Per-vertex disagreement frequency at depth h under the top-down
    maximal coupling of the two root-conditioned measures.

    The two copies disagree at the root by construction; a parent
    disagreement propagates to a child with probability exactly gamma of the
    connecting edge, and agreement is absorbing.  Returns one frequency per
    depth-h vertex.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    tree = instance.tree
    targets = tree.level(h)
    if targets.size == 0:
        return {}
    gamma = influences(instance).gamma
    counts = np.zeros(targets.size, dtype=np.int64)
    for lo in range(0, trials, chunk):
        hi = min(lo + chunk, trials)
        b = hi - lo
        u = np.empty((b, tree.edge_count))
        for i in range(lo, hi):
            u[i - lo] = trial_rng(seed, i).random(tree.edge_count)
        disagree = np.zeros((b, tree.n), dtype=bool)
        disagree[:, 0] = True
        for level in range(1, min(h, tree.height) + 1):
            verts = tree.level(level)
            fire = u[:, verts - 1] < gamma[verts - 1]
            disagree[:, verts] = disagree[:, tree.parent[verts]] & fire
        counts += disagree[:, targets].sum(axis=0)
    freq = counts / trials
    return {int(v): float(f) for v, f in zip(targets, freq)}
