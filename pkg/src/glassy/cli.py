"""Command-line driver: threshold tables, phase scans, estimator benchmarks,
the verification suite, and SVG plotting.

Exit codes: 0 on success, 1 when a verification check fails, 2 on usage or
I/O errors.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .distributions import CouplingDistribution, OffspringDistribution, expected_gamma_sq
from .model import GibbsParams
from .scan import (
    BENCH_CSV_HEADER,
    SCAN_CSV_HEADER,
    CsvFormatError,
    ScanConfig,
    parse_scan_csv,
    run_estimator_bench,
    run_scan,
)
from .svg import render_scan_svg
from .verify import run_verification

_SCAN_NOTES = """\
Estimator notes: every cell averages the root-posterior gap |p(+1|tau) -
p(-1|tau)| over joint trials, where each trial draws fresh couplings (and a
fresh tree for galton_watson), then runs exactly one broadcast with a uniform
root.  Tree, coupling, and broadcast randomness are averaged in a single
joint expectation; this is an unbiased estimate of the expected conditional
total-variation distance at depth h.  Galton-Watson trees that die out before
depth h contribute the degenerate value 0; trees that would exceed
--max-vertices also contribute 0 and are counted in truncation_rate.
Config file: key=value lines with the long flag names (e.g. beta-grid=...);
command-line flags win over file values."""


def _parse_phi(text: str) -> CouplingDistribution:
    if text == "gaussian":
        return CouplingDistribution.standard_gaussian()
    if text == "rademacher":
        return CouplingDistribution.rademacher()
    if text.startswith("point:"):
        return CouplingDistribution.point_mass(float(text[6:]))
    if text.startswith("two-point:"):
        fields = text[len("two-point:"):].split(",")
        if len(fields) != 3:
            raise ValueError("two-point coupling needs J1,J2,p")
        j1, j2, p = (float(f) for f in fields)
        return CouplingDistribution.two_point(j1, j2, p)
    if text.startswith("table:"):
        values, probs = _parse_table(text[6:])
        return CouplingDistribution.finite_table(values, probs)
    raise ValueError(
        f"unknown coupling distribution {text!r} "
        "(expected gaussian|rademacher|point:J|two-point:J1,J2,p|table:v:p,...)"
    )


def _parse_table(text: str) -> tuple[list[float], list[float]]:
    values, probs = [], []
    for pair in text.split(","):
        v, _, p = pair.partition(":")
        if not p:
            raise ValueError(f"table entry {pair!r} must look like value:prob")
        values.append(float(v))
        probs.append(float(p))
    return values, probs


def _parse_grid(text: str, cast=float) -> tuple:
    try:
        return tuple(cast(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise ValueError(f"bad grid {text!r}: {exc}") from exc


def _add_common_scan_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--model", choices=("delta_ary", "galton_watson"), default=None)
    sub.add_argument("--phi", default=None, help="gaussian|rademacher|point:J|two-point:J1,J2,p")
    sub.add_argument("--beta", type=float, default=None, help="single inverse temperature")
    sub.add_argument("--beta-grid", default=None, help="comma-separated betas")
    sub.add_argument("--degree", type=float, default=None, help="single degree (Delta or d)")
    sub.add_argument("--degree-grid", default=None, help="comma-separated degrees")
    sub.add_argument("--height", type=int, default=None, help="single height")
    sub.add_argument("--height-grid", default=None, help="comma-separated heights")
    sub.add_argument("--trials", type=int, default=None, help="trials per cell")
    sub.add_argument("--seed", type=int, default=None, help="master seed")
    sub.add_argument("--out", default=None, help="output CSV path")
    sub.add_argument("--threads", type=int, default=None,
                     help="worker threads (GLASSY_THREADS caps this)")
    sub.add_argument("--offspring", default=None,
                     help="fixed|poisson|table:v:p,... (galton_watson only)")
    sub.add_argument("--max-vertices", type=int, default=None,
                     help="vertex budget per sampled tree")
    sub.add_argument("--config", default=None, help="key=value file; flags win")
    sub.add_argument("--fig", default=None,
                     help="also render a matplotlib figure to this path")


_SCAN_DEFAULTS = {
    "model": "delta_ary",
    "phi": "rademacher",
    "beta-grid": None,
    "degree-grid": None,
    "height-grid": None,
    "trials": "1000",
    "seed": "0",
    "out": None,
    "threads": "1",
    "offspring": "poisson",
    "max-vertices": "5000000",
}


def _load_config_file(path: str) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for number, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{number}: expected key=value, got {line!r}")
            out[key.strip().replace("_", "-")] = value.strip()
    return out


def _build_scan_config(args) -> ScanConfig:
    settings = dict(_SCAN_DEFAULTS)
    if args.config:
        settings.update(_load_config_file(args.config))

    def pick(flag_value, key):
        if flag_value is not None:
            return str(flag_value)
        return settings.get(key)

    def pick_grid(flag_grid, flag_single, key):
        # any flag beats any file value; within a source, grid beats single
        if flag_grid is not None:
            return str(flag_grid)
        if flag_single is not None:
            return str(flag_single)
        return settings.get(f"{key}-grid") or settings.get(key)

    beta_text = pick_grid(args.beta_grid, args.beta, "beta")
    degree_text = pick_grid(args.degree_grid, args.degree, "degree")
    height_text = pick_grid(args.height_grid, args.height, "height")
    if not (beta_text and degree_text and height_text):
        raise ValueError("beta, degree and height grids are all required")

    offspring_text = pick(args.offspring, "offspring")
    offspring_kind, offspring_table = offspring_text, None
    if offspring_text.startswith("table:"):
        values, probs = _parse_table(offspring_text[6:])
        offspring_kind = "table"
        offspring_table = OffspringDistribution.finite_table(
            [int(v) for v in values], probs
        )

    model = pick(args.model, "model")
    degree_grid = _parse_grid(degree_text)
    if model == "galton_watson" and offspring_kind == "table":
        degree_grid = (offspring_table.mean,)

    return ScanConfig(
        model=model,
        phi=_parse_phi(pick(args.phi, "phi")),
        beta_grid=_parse_grid(beta_text),
        degree_grid=degree_grid,
        h_grid=_parse_grid(height_text, int),
        trials_per_cell=int(pick(args.trials, "trials")),
        master_seed=int(pick(args.seed, "seed")),
        output_path=pick(args.out, "out"),
        offspring_kind=offspring_kind,
        offspring_table=offspring_table,
        max_vertices=int(pick(args.max_vertices, "max-vertices")),
        threads=int(pick(args.threads, "threads")),
    )


def _render_matplotlib(rows, path: str, ylabel: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    series: dict[tuple, list] = {}
    for r in rows:
        key = (r.beta, r.degree) + ((r.kind,) if hasattr(r, "kind") else ())
        series.setdefault(key, []).append(r)
    for key, pts in sorted(series.items()):
        pts.sort(key=lambda r: r.h)
        xs = [p.h for p in pts]
        if hasattr(pts[0], "tv_mean"):
            ys = [p.tv_mean for p in pts]
            err = [p.tv_stderr for p in pts]
        else:
            ys = [p.accuracy for p in pts]
            err = [p.acc_stderr for p in pts]
        label = f"beta={key[0]:g}, degree={key[1]:g}" + (
            f", {key[2]}" if len(key) > 2 else ""
        )
        ax.errorbar(xs, ys, yerr=err, marker="o", capsize=3, label=label)
    ax.set_xlabel("height h")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


# -- subcommands -----------------------------------------------------------------


def _cmd_threshold(args) -> int:
    phi = _parse_phi(args.phi)
    betas = _parse_grid(args.beta_grid)
    rng = np.random.default_rng(args.seed) if args.method == "monte_carlo" else None
    lines = ["beta,expected_gamma_sq,delta_ks,method"]
    for beta in betas:
        method = args.method
        if method == "auto":
            method = "closed_form" if phi.is_discrete else "quadrature"
        report = expected_gamma_sq(
            GibbsParams(beta, phi),
            method,
            quadrature_nodes=args.nodes,
            mc_samples=args.mc_samples,
            rng=rng,
        )
        lines.append(
            f"{beta:.17g},{report.expected_gamma_sq:.17g},{report.delta_ks:.17g},"
            f"{report.method}"
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_scan(args) -> int:
    config = _build_scan_config(args)
    rows = run_scan(config)
    if not config.output_path:
        sys.stdout.write(SCAN_CSV_HEADER + "\n")
        for r in rows:
            sys.stdout.write(
                f"{r.beta:.17g},{r.degree:.17g},{r.h},{r.tv_mean:.17g},"
                f"{r.tv_stderr:.17g},{r.truncation_rate:.17g},{r.n_trials},"
                f"{r.delta_ks:.17g},{r.seed}\n"
            )
    if args.fig:
        _render_matplotlib(rows, args.fig, "tv_mean")
    return 0


def _cmd_estimator_bench(args) -> int:
    config = _build_scan_config(args)
    kinds = tuple(k.strip() for k in args.kinds.split(",") if k.strip())
    rows = run_estimator_bench(config, kinds)
    if not config.output_path:
        sys.stdout.write(BENCH_CSV_HEADER + "\n")
        for r in rows:
            sys.stdout.write(
                f"{r.beta:.17g},{r.degree:.17g},{r.h},{r.kind},{r.accuracy:.17g},"
                f"{r.acc_stderr:.17g},{r.n_trials},{r.gap_mean:.17g},"
                f"{r.second_moment_mean:.17g},{r.moment_ratio:.17g},"
                f"{r.delta_ks:.17g},{r.seed}\n"
            )
    if args.fig:
        _render_matplotlib(rows, args.fig, "P(correct root)")
    return 0


def _cmd_verify(args) -> int:
    results = run_verification(seed=args.seed, sizes=args.sizes, fault=args.inject_fault)
    for result in results:
        print(result.line())
        if not result.passed:
            for failure in result.failures:
                print(f"      failing instance: {failure}")
    failed = [r for r in results if not r.passed]
    if failed:
        print(f"{len(failed)} of {len(results)} checks FAILED (seed={args.seed})")
        return 1
    print(f"all {len(results)} checks passed (seed={args.seed}, sizes={args.sizes})")
    return 0


def _cmd_plot(args) -> int:
    rows = parse_scan_csv(args.csv)
    text = render_scan_svg(rows, title=args.title)
    with open(args.out, "w") as fh:
        fh.write(text)
    expected = len({(r.beta, r.degree) for r in rows})
    print(f"wrote {args.out} ({expected} series, {len(rows)} points)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glassy",
        description="Spin broadcasting on trees with random edge couplings: "
        "thresholds, phase scans, estimator benchmarks, verification, plotting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_thresh = sub.add_parser("threshold", help="tabulate E[Gamma^2] and delta_ks over betas")
    p_thresh.add_argument("--phi", required=True)
    p_thresh.add_argument("--beta-grid", required=True)
    p_thresh.add_argument(
        "--method",
        choices=("auto", "closed_form", "quadrature", "monte_carlo"),
        default="auto",
    )
    p_thresh.add_argument("--nodes", type=int, default=200, help="quadrature node count")
    p_thresh.add_argument("--mc-samples", type=int, default=10**6)
    p_thresh.add_argument("--seed", type=int, default=0)
    p_thresh.add_argument("--out", default=None)
    p_thresh.set_defaults(func=_cmd_threshold)

    p_scan = sub.add_parser(
        "scan",
        help="TV phase scan over a (beta, degree, height) grid",
        epilog=_SCAN_NOTES,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    _add_common_scan_flags(p_scan)
    p_scan.set_defaults(func=_cmd_scan)

    p_bench = sub.add_parser(
        "estimator-bench",
        help="root-recovery accuracy of the leaf estimators",
        epilog=_SCAN_NOTES,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    _add_common_scan_flags(p_bench)
    p_bench.add_argument(
        "--kinds",
        default="majority,parity_flipped_majority,sign_weighted_majority,flip_majority",
    )
    p_bench.set_defaults(func=_cmd_estimator_bench)

    p_verify = sub.add_parser("verify", help="run the randomized oracle suite")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--sizes", type=int, default=25,
                          help="instances per check (0 = empty report)")
    p_verify.add_argument("--inject-fault", default=None, help=argparse.SUPPRESS)
    p_verify.set_defaults(func=_cmd_verify)

    p_plot = sub.add_parser("plot", help="render a scan CSV as a standalone SVG")
    p_plot.add_argument("csv", help="CSV produced by the scan subcommand")
    p_plot.add_argument("--out", required=True, help="output SVG path")
    p_plot.add_argument("--title", default="")
    p_plot.set_defaults(func=_cmd_plot)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CsvFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
