"""Root-reconstruction estimators and their closed-form moments.

Four leaf statistics are supported, all of the form
sum_u tau(u) * w(u) over the depth-h vertices:

  majority                 w(u) = 1
  parity_flipped_majority  w(u) = (-1)^h
  sign_weighted_majority   w(u) = prod of sign(J_e) along the root-u path
  flip_majority            w(u) = prod of tanh(beta*J_e/2) along the path

The sign of the statistic estimates the root spin; a statistic of exactly 0
is surfaced as a tie and resolved by the caller's tie rule (ties happen with
positive probability for discrete couplings).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import OffspringDistribution, expected_gamma_sq
from .inference import GibbsInstance
from .influence import influences, root_product_table
from .model import GibbsParams, SpinConfig

__all__ = [
    "ESTIMATOR_KINDS",
    "RatioBound",
    "leaf_weights",
    "evaluate_estimator",
    "estimate_root",
    "flip_moment_gap",
    "flip_second_moment",
    "delta_ary_ratio_bound",
    "gw_ratio_bound",
]

ESTIMATOR_KINDS = (
    "majority",
    "parity_flipped_majority",
    "sign_weighted_majority",
    "flip_majority",
)


def leaf_weights(kind: str, instance: GibbsInstance, h: int) -> tuple[np.ndarray, np.ndarray]:
    """(depth-h vertices, per-vertex weights) of the chosen statistic."""
    if kind not in ESTIMATOR_KINDS:
        raise ValueError(f"unknown estimator kind {kind!r}")
    tree = instance.tree
    leaves = tree.level(h)
    if kind == "majority":
        return leaves, np.ones(leaves.size)
    if kind == "parity_flipped_majority":
        return leaves, np.full(leaves.size, (-1.0) ** h)
    factor = (
        np.sign(instance.couplings.values)
        if kind == "sign_weighted_majority"
        else influences(instance).signed_gamma
    )
    prod = np.ones(tree.n)
    for level in range(1, min(h, tree.height) + 1):
        verts = tree.level(level)
        prod[verts] = prod[tree.parent[verts]] * factor[verts - 1]
    return leaves, prod[leaves]


def evaluate_estimator(
    kind: str, instance: GibbsInstance, h: int, leaf_config: SpinConfig
) -> float:
    """The statistic's value on one depth-h configuration; 0 means a tie.

    Summed with math.fsum so that exact cancellations really produce 0.0
    instead of rounding residue (ties must be surfaced, not invented or lost).
    """
    leaves, weights = leaf_weights(kind, instance, h)
    dense = leaf_config.dense(instance.tree.n)
    tau = dense[leaves]
    if np.any(tau == 0):
        missing = leaves[tau == 0][:5]
        raise ValueError(f"leaf_config misses depth-{h} vertices {missing.tolist()}")
    return math.fsum(weights * tau)


def estimate_root(
    kind: str,
    instance: GibbsInstance,
    h: int,
    leaf_config: SpinConfig,
    tie_rule: str = "plus",
    rng: np.random.Generator | None = None,
) -> int:
    """Sign of the statistic; ties resolved by ``plus`` or a fair ``coin``."""
    value = evaluate_estimator(kind, instance, h, leaf_config)
    if value > 0:
        return 1
    if value < 0:
        return -1
    if tie_rule == "plus":
        return 1
    if tie_rule == "coin":
        if rng is None:
            raise ValueError("tie_rule='coin' needs an rng stream")
        return 1 if rng.random() < 0.5 else -1
    raise ValueError(f"unknown tie_rule {tie_rule!r}")


def flip_moment_gap(instance: GibbsInstance, h: int) -> float:
    """First-moment gap of the flip statistic between the two root
    conditionings, for this fixed coupling assignment:
    2 * sum over depth-h vertices of the path product of gamma^2."""
    verts = instance.tree.level(h)
    if verts.size == 0:
        return 0.0
    zero, log_prod = root_product_table(instance)
    live = ~zero[verts]
    return 2.0 * float(np.exp(log_prod[verts][live]).sum()) if live.any() else 0.0


def flip_second_moment(instance: GibbsInstance, h: int) -> float:
    """Second moment of the flip statistic under the unconditioned measure,
    for this fixed coupling assignment.

    Sum over ordered pairs (u, v) of depth-h vertices of
    prod_{path(u,v)} gamma^2 * prod_{path(root, u^v)} gamma^2, evaluated via
    cached root products: each term is P_u * P_v / P_{u^v} in log space.
    """
    tree = instance.tree
    leaves = tree.level(h)
    if leaves.size == 0:
        return 0.0
    zero, log_prod = root_product_table(instance)

    # ancestors of every leaf, depth-aligned: A[i, d] = ancestor at depth d
    m = leaves.size
    ancestry = np.empty((m, h + 1), dtype=np.int64)
    ancestry[:, h] = leaves
    for d in range(h, 0, -1):
        ancestry[:, d - 1] = tree.parent[ancestry[:, d]]

    equal = ancestry[:, None, :] == ancestry[None, :, :]
    meet_depth = np.cumprod(equal, axis=2).sum(axis=2) - 1  # depth of u ^ v
    meet = np.take_along_axis(
        np.broadcast_to(ancestry[:, None, :], (m, m, h + 1)),
        meet_depth[:, :, None],
        axis=2,
    )[:, :, 0]

    term_zero = zero[leaves][:, None] | zero[leaves][None, :]
    log_terms = log_prod[leaves][:, None] + log_prod[leaves][None, :] - log_prod[meet]
    return float(np.where(term_zero, 0.0, np.exp(log_terms)).sum())


@dataclass(frozen=True)
class RatioBound:
    """Averaged moment ratio of the flip statistic and its guaranteed floor."""

    ratio: float
    floor: float


def delta_ary_ratio_bound(delta: int, beta: float, phi, h: int) -> RatioBound:
    """Moment ratio (E[gap])^2 / (4 E[<F^2>]) on the complete delta-ary tree,
    averaged over coupling draws, with E[gamma^2] = 1/delta_ks.

    Only defined above threshold (delta > delta_ks).  The ratio simplifies to
    1 / sum_{l=0..h} (delta_ks/delta)^l (1 - delta^{l-h}), which always sits
    at or above the floor delta_margin/(1+delta_margin) = 1 - delta_ks/delta.
    """
    if h < 1:
        raise ValueError("h must be >= 1")
    report = expected_gamma_sq(GibbsParams(beta, phi))
    delta_ks = report.delta_ks
    if not delta > delta_ks:
        raise ValueError(
            f"degree {delta} must exceed delta_ks = {delta_ks}; the bound is "
            "vacuous at or below threshold"
        )
    r = delta_ks / delta
    ell = np.arange(h + 1)
    denom = float((r**ell * (1.0 - float(delta) ** (ell - h))).sum())
    ratio = 1.0 / denom
    floor = 1.0 - r
    if ratio < floor - 1e-12:
        raise AssertionError(f"moment ratio {ratio} fell below its floor {floor}")
    return RatioBound(ratio=ratio, floor=floor)


def gw_ratio_bound(zeta: OffspringDistribution, beta: float, phi) -> float:
    """Reconstruction floor delta/(M(1+delta)) for a Galton-Watson tree,
    where 1+delta = mean/delta_ks and M = second_moment/mean^2."""
    report = expected_gamma_sq(GibbsParams(beta, phi))
    delta_ks = report.delta_ks
    d = zeta.mean
    if not d > delta_ks:
        raise ValueError(
            f"offspring mean {d} must exceed delta_ks = {delta_ks}; the bound "
            "is vacuous at or below threshold"
        )
    margin = d / delta_ks - 1.0
    m = zeta.second_moment / d**2
    return margin / (m * (1.0 + margin))
