"""Coupling and offspring distributions, and the threshold quantities they induce.

The reconstruction threshold for degree-style parameters is

    delta_ks(beta, phi) = 1 / E[tanh^2(beta * J / 2)],    J ~ phi,

with the convention that a vanishing expectation (e.g. beta = 0) maps to the
+inf sentinel rather than an error.  The integrand is always evaluated as
tanh^2(beta*J/2), never through exp(beta*J) directly, so it cannot overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.special import expit

if TYPE_CHECKING:  # pragma: no cover
    from .model import GibbsParams

__all__ = [
    "CouplingDistribution",
    "OffspringDistribution",
    "KsReport",
    "expected_gamma_sq",
    "xi_lambda4",
    "classic_ks_degree",
    "critical_beta",
    "sample_coupling",
    "sample_couplings_array",
    "sample_offspring",
    "sample_offspring_array",
]

_PROB_TOL = 1e-12
DEFAULT_QUADRATURE_NODES = 200

_hermgauss_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _hermgauss(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Hermite rule rewritten for a standard normal variable.

    Returns points j_i and weights w_i with sum_i w_i f(j_i) ~ E[f(J)],
    J ~ N(0,1), via the change of variable j = sqrt(2) x.
    """
    cached = _hermgauss_cache.get(nodes)
    if cached is None:
        x, w = np.polynomial.hermite.hermgauss(nodes)
        cached = (math.sqrt(2.0) * x, w / math.sqrt(math.pi))
        _hermgauss_cache[nodes] = cached
    return cached


@dataclass(frozen=True)
class CouplingDistribution:
    """Distribution phi of the random edge coupling J.

    ``kind`` is one of standard_gaussian, rademacher, point_mass, two_point,
    finite_table.  Discrete kinds carry their atoms in (values, probabilities).
    """

    kind: str
    values: tuple[float, ...] = ()
    probabilities: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in (
            "standard_gaussian",
            "rademacher",
            "point_mass",
            "two_point",
            "finite_table",
        ):
            raise ValueError(f"unknown coupling kind {self.kind!r}")
        if self.kind == "standard_gaussian":
            if self.values or self.probabilities:
                raise ValueError("gaussian coupling takes no atoms")
            return
        if len(self.values) != len(self.probabilities) or not self.values:
            raise ValueError("discrete coupling needs aligned, non-empty atoms")
        p = np.asarray(self.probabilities, dtype=np.float64)
        if (p < 0).any():
            raise ValueError("probabilities must be non-negative")
        if abs(float(p.sum()) - 1.0) > _PROB_TOL:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        if not np.isfinite(np.asarray(self.values, dtype=np.float64)).all():
            raise ValueError("atom values must be finite")

    # -- constructors ------------------------------------------------------

    @classmethod
    def standard_gaussian(cls) -> "CouplingDistribution":
        return cls("standard_gaussian")

    @classmethod
    def rademacher(cls) -> "CouplingDistribution":
        return cls("rademacher", (1.0, -1.0), (0.5, 0.5))

    @classmethod
    def point_mass(cls, j0: float) -> "CouplingDistribution":
        return cls("point_mass", (float(j0),), (1.0,))

    @classmethod
    def two_point(cls, j_minus: float, j_plus: float, p: float) -> "CouplingDistribution":
        """Takes j_plus with probability p and j_minus otherwise."""
        return cls("two_point", (float(j_minus), float(j_plus)), (1.0 - p, p))

    @classmethod
    def finite_table(cls, values, probabilities) -> "CouplingDistribution":
        return cls(
            "finite_table",
            tuple(float(v) for v in values),
            tuple(float(p) for p in probabilities),
        )

    # -- queries -----------------------------------------------------------

    @property
    def is_discrete(self) -> bool:
        return self.kind != "standard_gaussian"

    def atoms(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.is_discrete:
            raise ValueError("gaussian coupling has no atoms")
        return (
            np.asarray(self.values, dtype=np.float64),
            np.asarray(self.probabilities, dtype=np.float64),
        )

    def describe(self) -> str:
        if self.kind == "standard_gaussian":
            return "gaussian"
        if self.kind == "rademacher":
            return "rademacher"
        if self.kind == "point_mass":
            return f"point:{self.values[0]:g}"
        if self.kind == "two_point":
            return f"two-point:{self.values[0]:g},{self.values[1]:g},{self.probabilities[1]:g}"
        pairs = ",".join(f"{v:g}:{p:g}" for v, p in zip(self.values, self.probabilities))
        return f"table:{pairs}"


@dataclass(frozen=True)
class OffspringDistribution:
    """Child-count distribution zeta with finite second moment."""

    kind: str
    mean: float
    second_moment: float
    values: tuple[int, ...] = ()
    probabilities: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("fixed", "poisson", "finite_table"):
            raise ValueError(f"unknown offspring kind {self.kind!r}")
        if not (self.mean > 0 and np.isfinite(self.mean)):
            raise ValueError("offspring mean must be positive and finite")
        if not np.isfinite(self.second_moment):
            raise ValueError("offspring second moment must be finite")
        if self.second_moment < self.mean**2 - 1e-9:
            raise ValueError("second moment below mean^2 is impossible")

    @classmethod
    def fixed(cls, delta: int) -> "OffspringDistribution":
        delta = int(delta)
        if delta < 1:
            raise ValueError("fixed offspring count must be >= 1")
        return cls("fixed", float(delta), float(delta) ** 2, (delta,), (1.0,))

    @classmethod
    def poisson(cls, d: float) -> "OffspringDistribution":
        d = float(d)
        if d <= 0:
            raise ValueError("poisson mean must be positive")
        return cls("poisson", d, d + d * d)

    @classmethod
    def finite_table(cls, values, probabilities) -> "OffspringDistribution":
        vals = tuple(int(v) for v in values)
        probs = tuple(float(p) for p in probabilities)
        if len(vals) != len(probs) or not vals:
            raise ValueError("offspring table needs aligned, non-empty atoms")
        if any(v < 0 for v in vals):
            raise ValueError("offspring counts must be non-negative")
        p = np.asarray(probs)
        if (p < 0).any() or abs(float(p.sum()) - 1.0) > _PROB_TOL:
            raise ValueError("offspring probabilities must be >= 0 and sum to 1")
        v = np.asarray(vals, dtype=np.float64)
        return cls("finite_table", float(v @ p), float((v * v) @ p), vals, probs)


@dataclass(frozen=True)
class KsReport:
    """Threshold report: E[tanh^2(beta J/2)] and its inverse delta_ks."""

    delta_ks: float
    expected_gamma_sq: float
    method: str
    quadrature_nodes: int
    estimated_error: float


def _gamma_sq(beta: float, j: np.ndarray) -> np.ndarray:
    return np.tanh(0.5 * beta * j) ** 2


def expected_gamma_sq(
    params: "GibbsParams",
    method: str = "auto",
    *,
    quadrature_nodes: int = DEFAULT_QUADRATURE_NODES,
    mc_samples: int = 10**6,
    rng: np.random.Generator | None = None,
) -> KsReport:
    """E[tanh^2(beta*J/2)] together with delta_ks = its inverse.

    Discrete phi uses the exact finite sum; the standard gaussian uses
    Gauss-Hermite quadrature; ``monte_carlo`` averages over i.i.d. draws and
    reports the standard error in ``estimated_error``.
    """
    beta, phi = params.beta, params.phi
    if not np.isfinite(beta):
        raise ValueError("beta must be finite")
    if method == "auto":
        method = "closed_form" if phi.is_discrete else "quadrature"

    if method == "closed_form":
        if not phi.is_discrete:
            raise ValueError("closed_form requires a discrete coupling distribution")
        values, probs = phi.atoms()
        mean = float(_gamma_sq(beta, values) @ probs)
        report = KsReport(_invert(mean), mean, "closed_form", 0, 0.0)
    elif method == "quadrature":
        if phi.is_discrete:
            raise ValueError("quadrature applies to the gaussian coupling only")
        if quadrature_nodes < 8:
            raise ValueError("quadrature_nodes must be at least 8")
        j, w = _hermgauss(quadrature_nodes)
        mean = float(_gamma_sq(beta, j) @ w)
        j2, w2 = _hermgauss(max(8, quadrature_nodes // 2))
        err = abs(mean - float(_gamma_sq(beta, j2) @ w2))
        report = KsReport(_invert(mean), mean, "quadrature", quadrature_nodes, err)
    elif method == "monte_carlo":
        if rng is None:
            raise ValueError("monte_carlo requires an rng stream")
        draws = sample_couplings_array(phi, mc_samples, rng)
        g = _gamma_sq(beta, draws)
        mean = float(g.mean())
        stderr = float(g.std(ddof=1) / math.sqrt(mc_samples)) if mc_samples > 1 else math.inf
        report = KsReport(_invert(mean), mean, "monte_carlo", 0, stderr)
    else:
        raise ValueError(f"unknown method {method!r}")
    return report


def _invert(expected: float) -> float:
    return math.inf if expected == 0.0 else 1.0 / expected


def xi_lambda4(
    params: "GibbsParams", *, quadrature_nodes: int = DEFAULT_QUADRATURE_NODES
) -> float:
    """lambda_4 of the averaged tensor-square of the broadcasting matrix.

    The tensor square of the edge matrix has three distinct entries
    a = e^{2bJ}/(1+e^{bJ})^2, b = e^{bJ}/(1+e^{bJ})^2, c = 1/(1+e^{bJ})^2;
    after entrywise averaging, the relevant eigenvalue is a - 2b + c.  This
    equals E[tanh^2(beta J/2)] identically, which the tests pin down.
    """
    beta, phi = params.beta, params.phi
    if not np.isfinite(beta):
        raise ValueError("beta must be finite")
    if phi.is_discrete:
        j, w = phi.atoms()
    else:
        if quadrature_nodes < 8:
            raise ValueError("quadrature_nodes must be at least 8")
        j, w = _hermgauss(quadrature_nodes)
    s = expit(beta * j)  # e^{bJ}/(1+e^{bJ}), saturation-safe
    a = float((s * s) @ w)
    b = float((s * (1.0 - s)) @ w)
    c = float(((1.0 - s) * (1.0 - s)) @ w)
    return a - 2.0 * b + c


def classic_ks_degree(transition_lambda2: float) -> float:
    """Degree threshold lambda2^-2 of a deterministic broadcasting matrix."""
    lam = abs(transition_lambda2)
    if lam > 1.0:
        raise ValueError("|lambda2| must lie in [0, 1] for a stochastic matrix")
    if lam == 0.0:
        return math.inf
    return lam**-2


def critical_beta(
    phi: CouplingDistribution,
    degree: float,
    bracket: tuple[float, float] = (1e-8, 50.0),
    tol: float = 1e-10,
    *,
    quadrature_nodes: int = DEFAULT_QUADRATURE_NODES,
) -> float:
    """Inverse temperature where delta_ks(beta, phi) crosses ``degree``.

    Bisection on beta -> E[tanh^2(beta J/2)] - 1/degree, run to full float
    resolution; requires the bracket to straddle the root and degree > 1.
    The residual check scales with the degree, since a double can only pin
    delta_ks to relative (not absolute) precision.
    """
    from .model import GibbsParams

    if degree <= 1:
        raise ValueError("degree must exceed 1")

    def residual(beta: float) -> float:
        report = expected_gamma_sq(
            GibbsParams(beta, phi), quadrature_nodes=quadrature_nodes
        )
        return report.expected_gamma_sq - 1.0 / degree

    lo, hi = bracket
    flo, fhi = residual(lo), residual(hi)
    if flo > 0 or fhi < 0:
        raise ValueError(
            f"bracket {bracket} does not straddle the threshold for degree {degree}"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if residual(mid) <= 0:
            lo = mid
        else:
            hi = mid
    beta_star = 0.5 * (lo + hi)
    report = expected_gamma_sq(GibbsParams(beta_star, phi), quadrature_nodes=quadrature_nodes)
    if abs(report.delta_ks - degree) > tol * max(1.0, degree):
        raise ValueError(
            f"bisection stalled: delta_ks({beta_star}) = {report.delta_ks}, "
            f"target {degree} +- {tol} relative"
        )
    return beta_star


# -- samplers (explicit per-caller streams; no shared mutable RNG) ----------


def sample_coupling(phi: CouplingDistribution, rng: np.random.Generator) -> float:
    return float(sample_couplings_array(phi, 1, rng)[0])


def sample_couplings_array(
    phi: CouplingDistribution, size: int, rng: np.random.Generator
) -> np.ndarray:
    """i.i.d. draws from phi, one numpy call per batch."""
    if phi.kind == "standard_gaussian":
        return rng.standard_normal(size)
    if phi.kind == "point_mass":
        return np.full(size, phi.values[0])
    if phi.kind == "rademacher":
        return (2.0 * rng.integers(0, 2, size=size) - 1.0).astype(np.float64)
    values, probs = phi.atoms()
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    return values[np.searchsorted(cdf, rng.random(size), side="right")]


def sample_offspring(zeta: OffspringDistribution, rng: np.random.Generator) -> int:
    return int(sample_offspring_array(zeta, 1, rng)[0])


def sample_offspring_array(
    zeta: OffspringDistribution, size: int, rng: np.random.Generator
) -> np.ndarray:
    if zeta.kind == "fixed":
        return np.full(size, zeta.values[0], dtype=np.int64)
    if zeta.kind == "poisson":
        return rng.poisson(zeta.mean, size=size).astype(np.int64)
    values = np.asarray(zeta.values, dtype=np.int64)
    cdf = np.cumsum(np.asarray(zeta.probabilities))
    cdf[-1] = 1.0
    return values[np.searchsorted(cdf, rng.random(size), side="right")]
