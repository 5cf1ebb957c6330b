"""Top-down spin propagation with one random symmetric matrix per edge.

Each edge holds a 2x2 symmetric stochastic matrix whose diagonal entry
(the probability that the child copies its parent) is the logistic function
of beta * J.  Propagation is breadth-first using one uniform real per vertex,
so a run is fully reproducible from its stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .distributions import sample_couplings_array
from .model import CouplingAssignment, GibbsParams, RootedTree, SpinConfig

__all__ = [
    "BroadcastMatrix",
    "matrix_from_coupling",
    "stay_probabilities",
    "sample_couplings",
    "broadcast_sample",
]

# exp() saturates silently beyond this; keeps stay_prob in {0,1} without NaN
_EXP_CLAMP = 745.0


@dataclass(frozen=True)
class BroadcastMatrix:
    """Symmetric channel: the child copies the parent with prob stay_prob."""

    stay_prob: float

    def __post_init__(self):
        if not 0.0 <= self.stay_prob <= 1.0:
            raise ValueError(f"stay_prob must be in [0,1], got {self.stay_prob}")

    def as_matrix(self) -> np.ndarray:
        """Rows/cols ordered (+1, -1)."""
        p = self.stay_prob
        return np.array([[p, 1.0 - p], [1.0 - p, p]])


def matrix_from_coupling(beta: float, j: float) -> BroadcastMatrix:
    if not (np.isfinite(beta) and np.isfinite(j)):
        raise ValueError("beta and j must be finite")
    return BroadcastMatrix(float(_stay_prob(np.asarray(beta * j))))


def _stay_prob(beta_j: np.ndarray) -> np.ndarray:
    return expit(np.clip(beta_j, -_EXP_CLAMP, _EXP_CLAMP))


def stay_probabilities(tree: RootedTree, beta: float, couplings: CouplingAssignment) -> np.ndarray:
    """stay_prob of every edge, indexed by child vertex - 1."""
    if len(couplings) != tree.edge_count:
        raise ValueError(
            f"couplings cover {len(couplings)} edges, tree has {tree.edge_count}"
        )
    return _stay_prob(beta * couplings.values)


def sample_couplings(
    tree: RootedTree, params: GibbsParams, rng: np.random.Generator
) -> CouplingAssignment:
    """One i.i.d. phi-draw per edge, in child-index order."""
    return CouplingAssignment(sample_couplings_array(params.phi, tree.edge_count, rng))


def broadcast_sample(
    tree: RootedTree,
    params: GibbsParams,
    couplings: CouplingAssignment,
    root_spin: int | None,
    rng: np.random.Generator,
) -> SpinConfig:
    """Broadcast once down the tree; root_spin None means a fair coin.

    Children copy their parent independently with the stay probability of
    their edge, else flip.
    """
    stay = stay_probabilities(tree, params.beta, couplings)
    u = rng.random(tree.n)
    spins = _propagate(tree, stay, u, root_spin)
    return SpinConfig(np.arange(tree.n), spins)


def _propagate(
    tree: RootedTree, stay: np.ndarray, u: np.ndarray, root_spin: int | None
) -> np.ndarray:
    """Single-run propagation; u holds one uniform per vertex (u[0] = root coin)."""
    spins = np.empty(tree.n, dtype=np.int8)
    if root_spin is None:
        spins[0] = 1 if u[0] < 0.5 else -1
    else:
        if root_spin not in (1, -1):
            raise ValueError("root_spin must be +1, -1 or None")
        spins[0] = root_spin
    for h in range(1, tree.height + 1):
        verts = tree.level(h)
        keep = u[verts] < stay[verts - 1]
        spins[verts] = spins[tree.parent[verts]] * np.where(keep, 1, -1)
    return spins


def _propagate_batch(
    tree: RootedTree, stay: np.ndarray, u: np.ndarray, root_spins: np.ndarray
) -> np.ndarray:
    """Vectorised propagation for a batch of runs.

    ``stay`` has shape (B, n-1) or (n-1,); ``u`` has shape (B, n) with one
    uniform per vertex per run; root_spins has shape (B,).
    """
    b, n = u.shape
    spins = np.empty((b, n), dtype=np.int8)
    spins[:, 0] = root_spins
    stay2d = stay if stay.ndim == 2 else stay[None, :]
    one, minus_one = np.int8(1), np.int8(-1)
    for h in range(1, tree.height + 1):
        verts = tree.level(h)
        lo, hi = int(verts[0]), int(verts[-1]) + 1
        parent_spins = spins[:, tree.parent[verts]]
        if hi - lo == verts.size:  # contiguous level: slice views, no gathers
            signs = np.where(u[:, lo:hi] < stay2d[:, lo - 1:hi - 1], one, minus_one)
            spins[:, lo:hi] = parent_spins * signs
        else:
            signs = np.where(u[:, verts] < stay2d[:, verts - 1], one, minus_one)
            spins[:, verts] = parent_spins * signs
    return spins
