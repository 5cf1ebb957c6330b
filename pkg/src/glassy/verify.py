"""Randomised self-checks of the exact identities and inequalities.

Every check draws small random instances, evaluates one side of an identity
or bound by exhaustive enumeration and the other through the library path
under test, and records the worst deviation.  All randomness derives from the
run seed, so a failure line pinpoints a reproducible instance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import CouplingDistribution, sample_couplings_array
from .inference import (
    GibbsInstance,
    brute_force_gibbs,
    downup_marginal_exact,
    root_posterior,
    tv_leaf_conditional_exact,
)
from .influence import down_coupling_simulate, influences, tv_upper_bound
from .model import CouplingAssignment, GibbsParams, RootedTree, SpinConfig, path_edges
from .seeds import mix64
from .distributions import expected_gamma_sq, xi_lambda4
from .estimators import flip_moment_gap, flip_second_moment, leaf_weights

__all__ = ["CheckResult", "run_verification", "CHECK_NAMES"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    instances: int
    max_dev: float
    tol: float
    passed: bool
    failures: tuple[str, ...]

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status}  {self.name:32s} instances={self.instances:<4d} "
            f"max_dev={self.max_dev:.3e}  tol={self.tol:.1e}"
        )


def _random_phi(rng: np.random.Generator) -> CouplingDistribution:
    roll = rng.integers(0, 5)
    if roll == 0:
        return CouplingDistribution.standard_gaussian()
    if roll == 1:
        return CouplingDistribution.rademacher()
    if roll == 2:
        return CouplingDistribution.point_mass(float(rng.uniform(-2, 2)))
    if roll == 3:
        return CouplingDistribution.two_point(
            float(rng.uniform(-2, 0)), float(rng.uniform(0, 2)), float(rng.uniform(0.1, 0.9))
        )
    values = rng.uniform(-2, 2, size=3)
    probs = rng.uniform(0.1, 1.0, size=3)
    probs = probs / probs.sum()
    return CouplingDistribution.finite_table(values, probs)


def _random_instance(
    inst_seed: int, max_vertices: int = 10, beta_hi: float = 4.0
) -> tuple[GibbsInstance, CouplingDistribution, str]:
    rng = np.random.default_rng(inst_seed)
    n = int(rng.integers(2, max_vertices + 1))
    parent = np.full(n, -1, dtype=np.int64)
    for v in range(1, n):
        parent[v] = rng.integers(0, v)
    tree = RootedTree(parent)
    beta = float(rng.uniform(0.0, beta_hi))
    phi = _random_phi(rng)
    couplings = CouplingAssignment(sample_couplings_array(phi, tree.edge_count, rng))
    inst = GibbsInstance(tree, beta, couplings)
    descriptor = f"seed={inst_seed} n={n} beta={beta:.4g} phi={phi.describe()}"
    return inst, phi, descriptor


def _signed_edge_products(instance: GibbsInstance, edges: list[int], fault: str | None) -> float:
    signed = influences(instance).signed_gamma
    if fault == "negate_signed_gamma":
        signed = -signed
    out = 1.0
    for child in edges:
        out *= float(signed[child - 1])
    return out


def _spin_matrix(n: int) -> np.ndarray:
    k = np.arange(1 << n, dtype=np.int64)
    return (1 - 2 * ((k[:, None] >> np.arange(n)[None, :]) & 1)).astype(np.int8)


# -- individual checks -------------------------------------------------------


def _check_indicator_product(seed, sizes, fault):
    tol, devs, fails = 1e-12, [], []
    for i in range(sizes):
        inst_seed = mix64(seed, 1, i)
        inst, _, desc = _random_instance(inst_seed, max_vertices=10, beta_hi=2.5)
        indicator = brute_force_gibbs(
            GibbsInstance(inst.tree, 2.0 * inst.beta, inst.couplings), hamiltonian="indicator"
        )
        product = brute_force_gibbs(inst, hamiltonian="product")
        dev = float(np.abs(indicator.probs - product.probs).max())
        devs.append(dev)
        if dev > tol:
            fails.append(desc)
    return "indicator-product-reparam", tol, devs, fails


def _check_tensor_identity(seed, sizes, fault):
    tol, devs, fails = 1e-10, [], []
    rng = np.random.default_rng(mix64(seed, 2))
    for i in range(sizes):
        beta = float(rng.uniform(0.0, 6.0))
        phi = _random_phi(rng)
        params = GibbsParams(beta, phi)
        dev = abs(xi_lambda4(params) - expected_gamma_sq(params).expected_gamma_sq)
        devs.append(dev)
        if dev > tol:
            fails.append(f"seed={seed} beta={beta:.4g} phi={phi.describe()}")
    return "tensor-eigenvalue-identity", tol, devs, fails


def _check_recursion_vs_enumeration(seed, sizes, fault):
    tol, devs, fails = 1e-10, [], []
    for i in range(sizes):
        inst_seed = mix64(seed, 3, i)
        inst, _, desc = _random_instance(inst_seed)
        rng = np.random.default_rng(mix64(inst_seed, 1))
        candidates = np.arange(1, inst.tree.n)
        k = int(rng.integers(0, candidates.size + 1))
        support = rng.choice(candidates, size=k, replace=False)
        values = 2 * rng.integers(0, 2, size=k) - 1
        boundary = SpinConfig(support, values)
        posterior = root_posterior(inst, boundary)
        exact = brute_force_gibbs(inst, condition=boundary).marginal(0)
        dev = abs(posterior.p_plus - exact.p_plus)
        devs.append(dev)
        if dev > tol:
            fails.append(desc + f" |K|={k}")
    return "recursion-vs-enumeration", tol, devs, fails


def _check_pairwise_influence(seed, sizes, fault):
    tol, devs, fails = 1e-12, [], []
    for i in range(sizes):
        inst_seed = mix64(seed, 4, i)
        inst, _, desc = _random_instance(inst_seed, max_vertices=9)
        tree = inst.tree
        gamma = influences(inst).gamma
        dist = brute_force_gibbs(inst)
        spins = _spin_matrix(tree.n)
        rng = np.random.default_rng(mix64(inst_seed, 1))
        u = int(rng.integers(0, tree.n))
        rest = np.setdiff1d(np.arange(tree.n), [u])
        m_size = int(rng.integers(0, min(3, rest.size - 1) + 1)) if rest.size > 1 else 0
        pinned_set = rng.choice(rest, size=m_size, replace=False)
        free = np.setdiff1d(rest, pinned_set)
        for tau_bits in range(1 << m_size):
            tau = 1 - 2 * ((tau_bits >> np.arange(m_size)) & 1)
            cond = dist.conditioned(SpinConfig(pinned_set, tau)) if m_size else dist
            plus = cond.conditioned(SpinConfig([u], [1]))
            minus = cond.conditioned(SpinConfig([u], [-1]))
            p_plus_w = plus.probs @ (spins == 1)
            p_minus_w = minus.probs @ (spins == 1)
            tv_w = np.abs(p_plus_w - p_minus_w)
            for w in free:
                bound = 1.0
                for child in path_edges(tree, u, int(w)):
                    bound *= float(gamma[child - 1])
                dev = float(tv_w[w] - bound)
                devs.append(dev)
                if dev > tol:
                    fails.append(desc + f" u={u} w={w} M={pinned_set.tolist()}")
    return "pairwise-influence-bound", tol, devs, fails


def _level_instance(inst_seed: int, max_vertices: int = 12):
    inst, phi, desc = _random_instance(inst_seed, max_vertices=max_vertices)
    rng = np.random.default_rng(mix64(inst_seed, 2))
    h = int(rng.integers(1, inst.tree.height + 1))
    return inst, h, desc + f" h={h}"


def _downup_tv(inst: GibbsInstance, h: int) -> float:
    plus = downup_marginal_exact(inst, h, 1)
    minus = downup_marginal_exact(inst, h, -1)
    return abs(plus.p_plus - minus.p_plus)


def _check_leaf_tv_bound(seed, sizes, fault):
    tol, devs, fails = 1e-12, [], []
    for i in range(sizes):
        inst, h, desc = _level_instance(mix64(seed, 5, i))
        dev = tv_leaf_conditional_exact(inst, h) - tv_upper_bound(inst, h)
        devs.append(dev)
        if dev > tol:
            fails.append(desc)
    return "leaf-tv-sqrt-bound", tol, devs, fails


def _check_downup_sqrt_bound(seed, sizes, fault):
    tol, devs, fails = 1e-12, [], []
    for i in range(sizes):
        inst, h, desc = _level_instance(mix64(seed, 6, i))
        # the down-up TV is a difference of marginals near 1/2 and carries
        # ~1e-16 absolute error; pad it before the square root
        dev = tv_leaf_conditional_exact(inst, h) - math.sqrt(_downup_tv(inst, h) + 1e-15)
        devs.append(dev)
        if dev > tol:
            fails.append(desc)
    return "downup-sqrt-bound", tol, devs, fails


def _check_downup_sum_bound(seed, sizes, fault):
    tol, devs, fails = 1e-12, [], []
    for i in range(sizes):
        inst, h, desc = _level_instance(mix64(seed, 7, i))
        dev = _downup_tv(inst, h) - tv_upper_bound(inst, h) ** 2
        devs.append(dev)
        if dev > tol:
            fails.append(desc)
    return "downup-sum-bound", tol, devs, fails


def _check_single_flip_influence(seed, sizes, fault):
    tol, devs, fails = 1e-12, [], []
    for i in range(sizes):
        inst, h, desc = _level_instance(mix64(seed, 8, i), max_vertices=9)
        tree = inst.tree
        leaves = tree.level(h)
        if leaves.size == 0 or leaves.size > 8:
            continue
        gamma = influences(inst).gamma
        for u_idx, u in enumerate(leaves):
            bound = 1.0
            for child in path_edges(tree, 0, int(u)):
                bound *= float(gamma[child - 1])
            worst = 0.0
            for eta_bits in range(1 << leaves.size):
                eta = 1 - 2 * ((eta_bits >> np.arange(leaves.size)) & 1)
                flipped = eta.copy()
                flipped[u_idx] = -flipped[u_idx]
                p1 = root_posterior(inst, SpinConfig(leaves, eta)).p_plus
                p2 = root_posterior(inst, SpinConfig(leaves, flipped)).p_plus
                worst = max(worst, abs(p1 - p2))
            dev = worst - bound
            devs.append(dev)
            if dev > tol:
                fails.append(desc + f" u={u}")
    return "single-flip-influence-bound", tol, devs, fails


def _check_down_coupling_product(seed, sizes, fault):
    trials = 20000
    devs, fails = [], []
    tol = 0.0  # per-instance tolerance is 4 stderr; dev is the excess over it
    for i in range(sizes):
        inst, h, desc = _level_instance(mix64(seed, 9, i))
        tree = inst.tree
        gamma = influences(inst).gamma
        freq = down_coupling_simulate(inst, h, trials, mix64(seed, 9, i, 1))
        for v, f in freq.items():
            target = 1.0
            for child in path_edges(tree, 0, v):
                target *= float(gamma[child - 1])
            stderr = math.sqrt(max(target * (1 - target), 1e-12) / trials)
            dev = abs(f - target) - 4.0 * stderr
            devs.append(dev)
            if dev > tol:
                fails.append(desc + f" v={v}")
    return "down-coupling-product", tol, devs, fails


def _check_conditional_magnetization(seed, sizes, fault):
    tol, devs, fails = 1e-10, [], []
    for i in range(sizes):
        inst_seed = mix64(seed, 10, i)
        inst, _, desc = _random_instance(inst_seed)
        tree = inst.tree
        dist = brute_force_gibbs(inst)
        rng = np.random.default_rng(mix64(inst_seed, 3))
        u = int(rng.integers(0, tree.n))
        w = int(rng.integers(0, tree.n))
        s = int(2 * rng.integers(0, 2) - 1)
        conditioned = dist.conditioned(SpinConfig([u], [s]))
        exact = conditioned.expectation(conditioned.spins(w).astype(np.float64))
        predicted = s * _signed_edge_products(inst, path_edges(tree, u, w), fault)
        dev = abs(exact - predicted)
        devs.append(dev)
        if dev > tol:
            fails.append(desc + f" u={u} w={w} s={s}")
    return "conditional-magnetization-product", tol, devs, fails


def _check_pair_correlation(seed, sizes, fault):
    tol, devs, fails = 1e-10, [], []
    for i in range(sizes):
        inst_seed = mix64(seed, 11, i)
        inst, _, desc = _random_instance(inst_seed)
        tree = inst.tree
        dist = brute_force_gibbs(inst)
        rng = np.random.default_rng(mix64(inst_seed, 4))
        u = int(rng.integers(0, tree.n))
        v = int(rng.integers(0, tree.n))
        su = dist.spins(u).astype(np.float64)
        sv = dist.spins(v).astype(np.float64)
        exact = dist.expectation(su * sv)
        predicted = _signed_edge_products(inst, path_edges(tree, u, v), fault)
        dev = abs(exact - predicted)
        devs.append(dev)
        if dev > tol:
            fails.append(desc + f" u={u} v={v}")
    return "pair-correlation-product", tol, devs, fails


def _check_flip_moments(seed, sizes, fault):
    tol, devs, fails = 1e-10, [], []
    for i in range(sizes):
        inst, h, desc = _level_instance(mix64(seed, 12, i))
        tree = inst.tree
        leaves, weights = leaf_weights("flip_majority", inst, h)
        if fault == "negate_signed_gamma":
            weights = weights * (-1.0) ** h  # per-edge sign flip along depth-h paths
        spins = _spin_matrix(tree.n)
        f_vals = spins[:, leaves].astype(np.float64) @ weights
        dist = brute_force_gibbs(inst)
        plus = dist.conditioned(SpinConfig([0], [1]))
        minus = dist.conditioned(SpinConfig([0], [-1]))
        gap_exact = plus.expectation(f_vals) - minus.expectation(f_vals)
        second_exact = dist.expectation(f_vals**2)
        scale = max(1.0, abs(gap_exact), abs(second_exact))
        dev = max(
            abs(gap_exact - flip_moment_gap(inst, h)),
            abs(second_exact - flip_second_moment(inst, h)),
        ) / scale
        devs.append(dev)
        if dev > tol:
            fails.append(desc)
    return "flip-moment-identities", tol, devs, fails


_CHECKS = (
    _check_indicator_product,
    _check_tensor_identity,
    _check_recursion_vs_enumeration,
    _check_pairwise_influence,
    _check_leaf_tv_bound,
    _check_downup_sqrt_bound,
    _check_downup_sum_bound,
    _check_single_flip_influence,
    _check_down_coupling_product,
    _check_conditional_magnetization,
    _check_pair_correlation,
    _check_flip_moments,
)

CHECK_NAMES = (
    "indicator-product-reparam",
    "tensor-eigenvalue-identity",
    "recursion-vs-enumeration",
    "pairwise-influence-bound",
    "leaf-tv-sqrt-bound",
    "downup-sqrt-bound",
    "downup-sum-bound",
    "single-flip-influence-bound",
    "down-coupling-product",
    "conditional-magnetization-product",
    "pair-correlation-product",
    "flip-moment-identities",
)


def run_verification(
    seed: int = 0, sizes: int = 25, fault: str | None = None
) -> list[CheckResult]:
    """Run every check on ``sizes`` random instances each; empty for sizes=0."""
    if sizes < 0:
        raise ValueError("sizes must be non-negative")
    if sizes == 0:
        return []
    results = []
    for check in _CHECKS:
        name, tol, devs, fails = check(seed, sizes, fault)
        max_dev = max(devs) if devs else 0.0
        results.append(
            CheckResult(
                name=name,
                instances=len(devs),
                max_dev=float(max_dev),
                tol=tol,
                passed=not fails,
                failures=tuple(fails[:5]),
            )
        )
    return results
