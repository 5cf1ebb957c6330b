"""Phase-scan and estimator-benchmark engines with reproducible seeding.

One scan cell = one (beta, degree, height) triple.  Each trial inside a cell
draws fresh couplings (and a fresh tree for Galton-Watson cells), broadcasts
once with a uniform root, and evaluates the root-posterior gap given the
depth-h spins; the cell averages are therefore joint Monte Carlo estimates
over measure and broadcast randomness (and tree randomness when applicable).

Seeding: cell_seed = mix64(master_seed, beta_index, degree_index, h_index);
trial i inside a cell draws from the stream mix64(cell_seed, i).  Aggregation
runs in trial-index order and cells are self-contained, so output files are
byte-identical for any worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .broadcast import _propagate_batch
from .distributions import (
    CouplingDistribution,
    OffspringDistribution,
    expected_gamma_sq,
    sample_couplings_array,
)
from .estimators import (
    ESTIMATOR_KINDS,
    flip_moment_gap,
    flip_second_moment,
    leaf_weights,
)
from .inference import GibbsInstance, _log_ratio_batch
from .model import CouplingAssignment, GibbsParams, RootedTree
from .seeds import mix64, trial_rng
from .treegen import DEFAULT_MAX_VERTICES, TreeBudgetError, TreeSpec, build_tree

__all__ = [
    "ScanConfig",
    "ScanResult",
    "BenchResult",
    "SCAN_CSV_HEADER",
    "BENCH_CSV_HEADER",
    "run_scan",
    "run_estimator_bench",
    "write_scan_csv",
    "write_bench_csv",
    "parse_scan_csv",
    "resolve_threads",
]

SCAN_CSV_HEADER = "beta,degree,h,tv_mean,tv_stderr,truncation_rate,n_trials,delta_ks,seed"
BENCH_CSV_HEADER = (
    "beta,degree,h,kind,accuracy,acc_stderr,n_trials,"
    "gap_mean,second_moment_mean,moment_ratio,delta_ks,seed"
)

THREADS_ENV_VAR = "GLASSY_THREADS"


@dataclass(frozen=True)
class ScanConfig:
    """Grid description for a phase scan or estimator benchmark."""

    model: str  # "delta_ary" | "galton_watson"
    phi: CouplingDistribution
    beta_grid: tuple[float, ...]
    degree_grid: tuple[float, ...]
    h_grid: tuple[int, ...]
    trials_per_cell: int
    master_seed: int
    output_path: str | None = None
    offspring_kind: str = "poisson"
    offspring_table: OffspringDistribution | None = None
    max_vertices: int = DEFAULT_MAX_VERTICES
    threads: int = 1

    def __post_init__(self):
        if self.model not in ("delta_ary", "galton_watson"):
            raise ValueError(f"unknown model {self.model!r}")
        if not (self.beta_grid and self.degree_grid and self.h_grid):
            raise ValueError("all grids must be non-empty")
        if self.trials_per_cell < 1:
            raise ValueError("trials_per_cell must be >= 1")
        if any(h < 1 for h in self.h_grid):
            raise ValueError("heights must be >= 1")
        if self.model == "delta_ary":
            for d in self.degree_grid:
                if d < 1 or d != int(d):
                    raise ValueError(f"delta_ary degree {d} must be a positive integer")
        else:
            if self.offspring_kind not in ("fixed", "poisson", "table"):
                raise ValueError(f"unknown offspring kind {self.offspring_kind!r}")
            if self.offspring_kind == "table" and self.offspring_table is None:
                raise ValueError("offspring_kind='table' needs offspring_table")

    def offspring_for_degree(self, degree: float) -> OffspringDistribution:
        if self.offspring_kind == "fixed":
            return OffspringDistribution.fixed(int(degree))
        if self.offspring_kind == "poisson":
            return OffspringDistribution.poisson(degree)
        return self.offspring_table

    def cells(self):
        for bi, beta in enumerate(self.beta_grid):
            for di, degree in enumerate(self.degree_grid):
                for hi, h in enumerate(self.h_grid):
                    yield bi, di, hi, float(beta), float(degree), int(h)


@dataclass(frozen=True)
class ScanResult:
    beta: float
    degree: float
    h: int
    tv_mean: float
    tv_stderr: float
    truncation_rate: float
    n_trials: int
    delta_ks: float
    seed: int


@dataclass(frozen=True)
class BenchResult:
    beta: float
    degree: float
    h: int
    kind: str
    accuracy: float
    acc_stderr: float
    n_trials: int
    gap_mean: float
    second_moment_mean: float
    moment_ratio: float
    delta_ks: float
    seed: int


def resolve_threads(requested: int) -> int:
    """Requested worker count, capped by the GLASSY_THREADS env override."""
    threads = max(1, int(requested))
    env = os.environ.get(THREADS_ENV_VAR)
    if env:
        try:
            cap = int(env)
        except ValueError as exc:
            raise ValueError(f"{THREADS_ENV_VAR} must be an integer, got {env!r}") from exc
        threads = max(1, min(threads, cap))
    return threads


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    mean = float(values.mean())
    if values.size < 2:
        return mean, math.inf
    return mean, float(values.std(ddof=1) / math.sqrt(values.size))


# -- TV scan -------------------------------------------------------------------


def _tv_trials_delta_ary(
    tree: RootedTree, beta: float, phi: CouplingDistribution, trials: int, cell_seed: int
) -> np.ndarray:
    """Joint TV trial values on a fixed tree: fresh couplings per trial,
    one broadcast per coupling draw."""
    n = tree.n
    h = tree.height
    values = np.empty(trials)
    chunk = max(1, min(4096, (1 << 22) // max(n, 1)))
    a = np.empty((chunk, n - 1))
    u = np.empty((chunk, n))
    for lo in range(0, trials, chunk):
        hi = min(lo + chunk, trials)
        b = hi - lo
        for i in range(lo, hi):
            rng = trial_rng(cell_seed, i)
            a[i - lo] = sample_couplings_array(phi, n - 1, rng)
            u[i - lo] = rng.random(n)
        ab = beta * a[:b]
        spins = _propagate_batch(tree, expit(ab), u[:b], np.where(u[:b, 0] < 0.5, 1, -1))
        pinned = np.zeros((b, n), dtype=np.int8)
        verts = tree.level(h)
        pinned[:, verts] = spins[:, verts]
        values[lo:hi] = np.abs(np.tanh(0.5 * _log_ratio_batch(tree, ab, pinned)))
    return values


def _tv_trial_gw(
    spec: TreeSpec, beta: float, phi: CouplingDistribution, rng: np.random.Generator
) -> tuple[float, bool]:
    """One joint TV trial on a fresh Galton-Watson tree.

    Stream order: offspring counts level by level, then couplings in
    child-index order, then one uniform per vertex.  A tree that dies before
    depth h contributes the degenerate value 0; a tree that hits the vertex
    budget contributes 0 and is counted as truncated.
    """
    try:
        tree = build_tree(spec, rng)
    except TreeBudgetError:
        return 0.0, True
    verts = tree.level(spec.height)
    if verts.size == 0:
        return 0.0, False
    a = beta * sample_couplings_array(phi, tree.edge_count, rng)
    u = rng.random(tree.n)
    spins = _propagate_batch(tree, expit(a)[None, :], u[None, :], np.where(u[:1] < 0.5, 1, -1))
    pinned = np.zeros((1, tree.n), dtype=np.int8)
    pinned[:, verts] = spins[:, verts]
    log_ratio = _log_ratio_batch(tree, a, pinned)
    return float(abs(math.tanh(0.5 * log_ratio[0]))), False


def _scan_cell(config: ScanConfig, beta: float, degree: float, h: int, cell_seed: int,
               delta_ks: float) -> ScanResult:
    trials = config.trials_per_cell
    truncated = 0
    if config.model == "delta_ary":
        tree = build_tree(TreeSpec.delta_ary(int(degree), h))
        values = _tv_trials_delta_ary(tree, beta, config.phi, trials, cell_seed)
    else:
        spec = TreeSpec.galton_watson(
            config.offspring_for_degree(degree), h, config.max_vertices
        )
        values = np.empty(trials)
        for i in range(trials):
            values[i], was_truncated = _tv_trial_gw(
                spec, beta, config.phi, trial_rng(cell_seed, i)
            )
            truncated += was_truncated
    mean, stderr = _mean_stderr(values)
    return ScanResult(
        beta=beta,
        degree=degree,
        h=h,
        tv_mean=mean,
        tv_stderr=stderr,
        truncation_rate=truncated / trials,
        n_trials=trials,
        delta_ks=delta_ks,
        seed=cell_seed,
    )


def run_scan(config: ScanConfig) -> list[ScanResult]:
    """Run every cell of the grid; rows come back in grid order."""
    delta_ks_by_beta = {
        beta: expected_gamma_sq(GibbsParams(beta, config.phi)).delta_ks
        for beta in config.beta_grid
    }
    cells = list(config.cells())
    threads = resolve_threads(config.threads)

    def work(cell):
        bi, di, hi, beta, degree, h = cell
        cell_seed = mix64(config.master_seed, bi, di, hi)
        return _scan_cell(config, beta, degree, h, cell_seed, delta_ks_by_beta[beta])

    if threads == 1:
        rows = [work(cell) for cell in cells]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(work, cells))
    if config.output_path:
        write_scan_csv(rows, config.output_path)
    return rows


# -- estimator benchmark --------------------------------------------------------


def _bench_cell(
    config: ScanConfig,
    kinds: tuple[str, ...],
    beta: float,
    degree: float,
    h: int,
    cell_seed: int,
    delta_ks: float,
) -> list[BenchResult]:
    trials = config.trials_per_cell
    correct = {kind: 0 for kind in kinds}
    want_moments = "flip_majority" in kinds
    gaps = np.empty(trials) if want_moments else None
    seconds = np.empty(trials) if want_moments else None
    fixed_tree = (
        build_tree(TreeSpec.delta_ary(int(degree), h))
        if config.model == "delta_ary"
        else None
    )
    spec = (
        TreeSpec.galton_watson(config.offspring_for_degree(degree), h, config.max_vertices)
        if config.model == "galton_watson"
        else None
    )
    evaluated = 0
    for i in range(trials):
        rng = trial_rng(cell_seed, i)
        if fixed_tree is not None:
            tree = fixed_tree
        else:
            try:
                tree = build_tree(spec, rng)
            except TreeBudgetError:
                if want_moments:
                    gaps[i] = 0.0
                    seconds[i] = 0.0
                continue
        j = sample_couplings_array(config.phi, tree.edge_count, rng)
        instance = GibbsInstance(tree, beta, CouplingAssignment(j))
        u = rng.random(tree.n)
        root = 1 if u[0] < 0.5 else -1
        spins = _propagate_batch(
            tree, expit(beta * j)[None, :], u[None, :], np.array([root], dtype=np.int8)
        )[0]
        leaves = tree.level(h)
        if want_moments:
            gaps[i] = flip_moment_gap(instance, h)
            seconds[i] = flip_second_moment(instance, h)
        if leaves.size == 0:
            continue
        evaluated += 1
        tau = spins[leaves].astype(np.float64)
        for kind in kinds:
            _, weights = leaf_weights(kind, instance, h)
            value = math.fsum(weights * tau)  # exact ties stay exactly zero
            guess = 1 if value >= 0 else -1  # ties resolve to +1
            correct[kind] += guess == root
    rows = []
    for kind in kinds:
        denom = max(evaluated, 1)
        acc = correct[kind] / denom
        stderr = math.sqrt(acc * (1.0 - acc) / denom) if denom > 1 else math.inf
        if kind == "flip_majority" and want_moments:
            gap_mean = float(gaps.mean())
            second_mean = float(seconds.mean())
            ratio = gap_mean**2 / (4.0 * second_mean) if second_mean > 0 else 0.0
        else:
            gap_mean = second_mean = ratio = float("nan")
        rows.append(
            BenchResult(
                beta=beta,
                degree=degree,
                h=h,
                kind=kind,
                accuracy=acc,
                acc_stderr=stderr,
                n_trials=evaluated,
                gap_mean=gap_mean,
                second_moment_mean=second_mean,
                moment_ratio=ratio,
                delta_ks=delta_ks,
                seed=cell_seed,
            )
        )
    return rows


def run_estimator_bench(
    config: ScanConfig, kinds: tuple[str, ...] = ESTIMATOR_KINDS
) -> list[BenchResult]:
    """Empirical root-recovery accuracy per estimator kind, cell by cell.

    All kinds are evaluated on the same broadcast samples (same per-trial
    streams), so rows are directly comparable across kinds.
    """
    for kind in kinds:
        if kind not in ESTIMATOR_KINDS:
            raise ValueError(f"unknown estimator kind {kind!r}")
    delta_ks_by_beta = {
        beta: expected_gamma_sq(GibbsParams(beta, config.phi)).delta_ks
        for beta in config.beta_grid
    }
    cells = list(config.cells())
    threads = resolve_threads(config.threads)

    def work(cell):
        bi, di, hi, beta, degree, h = cell
        cell_seed = mix64(config.master_seed, bi, di, hi)
        return _bench_cell(config, tuple(kinds), beta, degree, h, cell_seed,
                           delta_ks_by_beta[beta])

    if threads == 1:
        nested = [work(cell) for cell in cells]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            nested = list(pool.map(work, cells))
    rows = [row for group in nested for row in group]
    if config.output_path:
        write_bench_csv(rows, config.output_path)
    return rows


# -- CSV io ---------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_scan_csv(rows: list[ScanResult], path: str) -> None:
    lines = [SCAN_CSV_HEADER]
    for r in rows:
        lines.append(
            f"{_fmt(r.beta)},{_fmt(r.degree)},{r.h},{_fmt(r.tv_mean)},"
            f"{_fmt(r.tv_stderr)},{_fmt(r.truncation_rate)},{r.n_trials},"
            f"{_fmt(r.delta_ks)},{r.seed}"
        )
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_bench_csv(rows: list[BenchResult], path: str) -> None:
    lines = [BENCH_CSV_HEADER]
    for r in rows:
        lines.append(
            f"{_fmt(r.beta)},{_fmt(r.degree)},{r.h},{r.kind},{_fmt(r.accuracy)},"
            f"{_fmt(r.acc_stderr)},{r.n_trials},{_fmt(r.gap_mean)},"
            f"{_fmt(r.second_moment_mean)},{_fmt(r.moment_ratio)},"
            f"{_fmt(r.delta_ks)},{r.seed}"
        )
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


class CsvFormatError(ValueError):
    def __init__(self, path: str, line_number: int, message: str):
        super().__init__(f"{path}:{line_number}: {message}")
        self.line_number = line_number


def parse_scan_csv(path: str) -> list[ScanResult]:
    """Parse rows written by write_scan_csv; lossless for 17-digit floats."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != SCAN_CSV_HEADER:
        raise CsvFormatError(path, 1, "missing or unexpected scan CSV header")
    if len(lines) < 2:
        raise CsvFormatError(path, 1, "CSV has a header but no data rows")
    rows = []
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 9:
            raise CsvFormatError(path, number, f"expected 9 fields, found {len(parts)}")
        try:
            rows.append(
                ScanResult(
                    beta=float(parts[0]),
                    degree=float(parts[1]),
                    h=int(parts[2]),
                    tv_mean=float(parts[3]),
                    tv_stderr=float(parts[4]),
                    truncation_rate=float(parts[5]),
                    n_trials=int(parts[6]),
                    delta_ks=float(parts[7]),
                    seed=int(parts[8]),
                )
            )
        except ValueError as exc:
            raise CsvFormatError(path, number, str(exc)) from exc
    if not rows:
        raise CsvFormatError(path, 2, "no data rows")
    return rows
