"""Exact conditional root marginals, a brute-force Gibbs oracle, and
total-variation computations (exact and Monte Carlo).

The root log-ratio log(mu_r(+1|K,tau) / mu_r(-1|K,tau)) satisfies a bottom-up
recursion: a conditioned vertex contributes x = +-inf, a free childless vertex
x = 0, and a parent with children x_1..x_k and edge weights a_i = beta*J_i
accumulates  sum_i log((e^{a_i + x_i} + 1) / (e^{x_i} + e^{a_i})).  The
+-inf limits are evaluated analytically as +-a_i, never clamped, so boundary
conditioning is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import expit

from .model import CouplingAssignment, RootedTree, SpinConfig
from .seeds import trial_rng

__all__ = [
    "GibbsInstance",
    "PosteriorPair",
    "ExactGibbs",
    "CapacityError",
    "log_ratio_root",
    "root_posterior",
    "brute_force_gibbs",
    "tv_leaf_conditional_exact",
    "tv_monte_carlo",
    "downup_marginal_exact",
]

BRUTE_FORCE_VERTEX_LIMIT = 22
LEAF_ENUMERATION_LIMIT = 20


class CapacityError(ValueError):
    """An exact routine was asked to enumerate more states than it supports."""


@dataclass(frozen=True)
class GibbsInstance:
    """A tree, an inverse temperature, and one fixed coupling per edge."""

    tree: RootedTree
    beta: float
    couplings: CouplingAssignment

    def __post_init__(self):
        if not np.isfinite(self.beta):
            raise ValueError("beta must be finite")
        if len(self.couplings) != self.tree.edge_count:
            raise ValueError(
                f"couplings cover {len(self.couplings)} edges, "
                f"tree has {self.tree.edge_count}"
            )

    def edge_weights(self) -> np.ndarray:
        """beta * J per edge, indexed by child vertex - 1."""
        return self.beta * self.couplings.values


@dataclass(frozen=True)
class PosteriorPair:
    """Root posterior (p_plus, p_minus); the two must sum to one."""

    p_plus: float
    p_minus: float

    def __post_init__(self):
        if abs(self.p_plus + self.p_minus - 1.0) > 1e-12:
            raise ValueError("posterior probabilities must sum to 1")

    @property
    def gap(self) -> float:
        return abs(self.p_plus - self.p_minus)


# -- log-ratio recursion -----------------------------------------------------


@lru_cache(maxsize=8)
def _level_plan(tree: RootedTree):
    """Per-depth reduction plan: vertices, parent grouping, segment starts.

    ``order`` is None when the level is already grouped by parent (the case
    for breadth-first-built trees), sparing a gather in the hot loop.
    """
    plan = []
    for h in range(1, tree.height + 1):
        verts = tree.level(h)
        parents = tree.parent[verts]
        order = np.argsort(parents, kind="stable")
        if (order == np.arange(order.size)).all():
            sorted_parents = parents
            order = None
        else:
            sorted_parents = parents[order]
        firsts = np.ones(sorted_parents.size, dtype=bool)
        firsts[1:] = sorted_parents[1:] != sorted_parents[:-1]
        seg_starts = np.nonzero(firsts)[0]
        plan.append((verts, order, seg_starts, sorted_parents[seg_starts]))
    return plan


def _child_terms(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """log((e^{a+x}+1)/(e^x+e^a)) for finite a and x, overflow-safe."""
    return np.logaddexp(a + x, 0.0) - np.logaddexp(x, a)


def _log_ratio_batch(
    tree: RootedTree, a: np.ndarray, pinned: np.ndarray
) -> np.ndarray:
    """Root log-ratios for a batch of boundary conditions.

    ``a`` is (n-1,) or (B, n-1) edge weights; ``pinned`` is (B, n) int8 with
    0 = free and +-1 = conditioned spin.  Returns shape (B,).
    """
    b = pinned.shape[0]
    acc = np.zeros((b, tree.n))
    a2d = a if a.ndim == 2 else a[None, :]
    for verts, order, seg_starts, seg_parents in reversed(_level_plan(tree)):
        lo, hi = int(verts[0]), int(verts[-1]) + 1
        if hi - lo == verts.size:  # contiguous level: slice views, no gathers
            av = np.broadcast_to(a2d[:, lo - 1:hi - 1], (b, verts.size))
            pv = pinned[:, lo:hi]
            x = acc[:, lo:hi]
        else:
            av = np.broadcast_to(a2d[:, verts - 1], (b, verts.size))
            pv = pinned[:, verts]
            x = acc[:, verts]
        # the logaddexp form is only needed where the vertex is free
        if not pv.any():
            terms = _child_terms(av, x)
        else:
            terms = pv * av
            free = np.nonzero(pv == 0)
            if free[0].size:
                terms[free] = _child_terms(av[free], x[free])
        grouped = terms if order is None else terms[:, order]
        sums = np.add.reduceat(grouped, seg_starts, axis=1)
        acc[:, seg_parents] += sums
    return acc[:, 0]


def log_ratio_root(instance: GibbsInstance, boundary: SpinConfig) -> float:
    """log of the ratio of conditional root marginals given the boundary.

    The boundary may pin any vertex set K not containing the root; spins of
    vertices strictly below a pinned vertex cannot influence the root and are
    ignored by construction.
    """
    if 0 in boundary:
        raise ValueError("boundary must not contain the root")
    pinned = boundary.dense(instance.tree.n)[None, :]
    return float(_log_ratio_batch(instance.tree, instance.edge_weights(), pinned)[0])


def root_posterior(instance: GibbsInstance, boundary: SpinConfig) -> PosteriorPair:
    log_ratio = log_ratio_root(instance, boundary)
    return PosteriorPair(float(expit(log_ratio)), float(expit(-log_ratio)))


# -- exhaustive enumeration ---------------------------------------------------


class ExactGibbs:
    """Exact distribution over {+1,-1}^V for a small instance.

    Configuration index k maps vertex v to spin +1 when bit v of k is 0 and
    -1 when it is 1.
    """

    __slots__ = ("n", "probs")

    def __init__(self, n: int, probs: np.ndarray):
        self.n = n
        self.probs = probs

    def spins(self, v: int) -> np.ndarray:
        """The +-1 spin of vertex v across all 2^n configurations."""
        bits = (np.arange(self.probs.size, dtype=np.int64) >> v) & 1
        return (1 - 2 * bits).astype(np.int8)

    def marginal(self, v: int) -> PosteriorPair:
        p_plus = float(self.probs[self.spins(v) == 1].sum())
        return PosteriorPair(p_plus, 1.0 - p_plus)

    def conditioned(self, condition: SpinConfig) -> "ExactGibbs":
        keep = np.ones(self.probs.size, dtype=bool)
        for v, s in zip(condition.vertices, condition.values):
            keep &= self.spins(int(v)) == s
        mass = float(self.probs[keep].sum())
        if mass == 0.0:
            raise ValueError("conditioning event has zero probability")
        probs = np.where(keep, self.probs, 0.0) / mass
        return ExactGibbs(self.n, probs)

    def expectation(self, values: np.ndarray) -> float:
        return float(self.probs @ values)


def brute_force_gibbs(
    instance: GibbsInstance,
    condition: SpinConfig | None = None,
    hamiltonian: str = "indicator",
) -> ExactGibbs:
    """Exact normalised weights over all configurations, in log space.

    ``hamiltonian`` selects exp(beta * sum 1{sigma_u = sigma_w} J_uw) (the
    default) or the product form exp(beta * sum sigma_u sigma_w J_uw).
    """
    tree = instance.tree
    if tree.n > BRUTE_FORCE_VERTEX_LIMIT:
        raise CapacityError(
            f"{tree.n} vertices exceed the enumeration bound {BRUTE_FORCE_VERTEX_LIMIT}"
        )
    if hamiltonian not in ("indicator", "product"):
        raise ValueError(f"unknown hamiltonian {hamiltonian!r}")
    size = 1 << tree.n
    k = np.arange(size, dtype=np.int64)
    log_w = np.zeros(size)
    a = instance.edge_weights()
    for child in range(1, tree.n):
        s_child = 1 - 2 * ((k >> child) & 1)
        s_parent = 1 - 2 * ((k >> int(tree.parent[child])) & 1)
        if hamiltonian == "indicator":
            log_w += a[child - 1] * (s_child == s_parent)
        else:
            log_w += a[child - 1] * (s_child * s_parent)
    log_w -= log_w.max()
    probs = np.exp(log_w)
    probs /= probs.sum()
    dist = ExactGibbs(tree.n, probs)
    if condition is not None and len(condition):
        dist = dist.conditioned(condition)
    return dist


# -- exact level-set marginals ------------------------------------------------


def _leaf_table(instance: GibbsInstance, h: int) -> tuple[np.ndarray, np.ndarray]:
    """All conditional level-set marginals at depth h, by dynamic programming.

    Returns (leaves, P) with P of shape (2, 2^L):  P[i, k] is the probability
    that the depth-h vertices take the k-th configuration given the root spin
    is +1 (i = 0) or -1 (i = 1).  Configuration bits follow ``leaves`` order,
    first leaf most significant, bit 0 = spin +1.
    """
    tree = instance.tree
    leaves_at_h = tree.level(h)
    if leaves_at_h.size > LEAF_ENUMERATION_LIMIT:
        raise CapacityError(
            f"{leaves_at_h.size} depth-{h} vertices exceed the enumeration "
            f"bound {LEAF_ENUMERATION_LIMIT}"
        )
    if leaves_at_h.size == 0:
        return leaves_at_h, np.ones((2, 1))

    stay = expit(instance.edge_weights())
    tables: dict[int, np.ndarray] = {}
    leaf_lists: dict[int, list[int]] = {}
    identity = np.eye(2)
    for v in range(tree.n - 1, -1, -1):
        depth = int(tree.depth[v])
        if depth > h:
            continue
        if depth == h:
            tables[v] = identity
            leaf_lists[v] = [v]
            continue
        rows = [np.ones(1), np.ones(1)]
        collected: list[int] = []
        for c in tree.children(v):
            sub = tables.pop(int(c), None)
            if sub is None:
                continue
            p = stay[c - 1]
            channel = np.array([[p, 1.0 - p], [1.0 - p, p]])
            g = channel @ sub
            rows = [np.kron(rows[0], g[0]), np.kron(rows[1], g[1])]
            collected.extend(leaf_lists.pop(int(c)))
        if collected:
            tables[v] = np.vstack(rows)
            leaf_lists[v] = collected
    leaves = np.asarray(leaf_lists[0], dtype=np.int64)
    return leaves, tables[0]


def tv_leaf_conditional_exact(instance: GibbsInstance, h: int) -> float:
    """Exact TV distance between the depth-h marginals given root +1 vs -1."""
    _, table = _leaf_table(instance, h)
    return 0.5 * float(np.abs(table[0] - table[1]).sum())


def downup_marginal_exact(instance: GibbsInstance, h: int, s: int) -> PosteriorPair:
    """Root law after broadcasting from root spin s and resampling the root
    conditional on the depth-h configuration (total-probability sum)."""
    if s not in (1, -1):
        raise ValueError("s must be +1 or -1")
    _, table = _leaf_table(instance, h)
    total = table[0] + table[1]
    with np.errstate(invalid="ignore", divide="ignore"):
        posterior_plus = np.where(total > 0, table[0] / total, 0.0)
    row = table[0] if s == 1 else table[1]
    p_plus = float(posterior_plus @ row)
    return PosteriorPair(p_plus, 1.0 - p_plus)


# -- Monte Carlo ---------------------------------------------------------------


def tv_monte_carlo(
    instance: GibbsInstance,
    h: int,
    trials: int,
    seed: int,
    *,
    chunk: int = 4096,
) -> tuple[float, float]:
    """Monte Carlo estimate of the depth-h conditional TV distance.

    Uses the identity  TV = E_{tau ~ mu_Lambda} |mu_r(+1|tau) - mu_r(-1|tau)|:
    each trial broadcasts once with a uniform root, restricts to the level
    set, and evaluates the posterior gap at the root.  Trial i draws from the
    stream derived from (seed, i), and the mean/stderr reduction runs in
    trial-index order, so results do not depend on scheduling.

    An empty level set contributes the degenerate value 0 without sampling.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if h < 1:
        raise ValueError("h must be >= 1 (the estimator conditions on a level "
                         "set not containing the root)")
    tree = instance.tree
    if tree.level(h).size == 0:
        return 0.0, 0.0
    values = np.empty(trials)
    stay = expit(instance.edge_weights())
    for lo in range(0, trials, chunk):
        hi = min(lo + chunk, trials)
        u = np.empty((hi - lo, tree.n))
        for i in range(lo, hi):
            u[i - lo] = trial_rng(seed, i).random(tree.n)
        values[lo:hi] = _tv_values_for_uniforms(instance, h, stay, u)
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.inf
    return mean, stderr


def _tv_values_for_uniforms(
    instance: GibbsInstance, h: int, stay: np.ndarray, u: np.ndarray
) -> np.ndarray:
    """|p_plus - p_minus| per run for a batch of per-vertex uniforms."""
    from .broadcast import _propagate_batch

    tree = instance.tree
    b = u.shape[0]
    roots = np.where(u[:, 0] < 0.5, 1, -1).astype(np.int8)
    spins = _propagate_batch(tree, stay, u, roots)
    pinned = np.zeros((b, tree.n), dtype=np.int8)
    verts = tree.level(h)
    pinned[:, verts] = spins[:, verts]
    log_ratio = _log_ratio_batch(tree, instance.edge_weights(), pinned)
    return np.abs(np.tanh(0.5 * log_ratio))
