"""Minimal hand-written SVG line charts (no plotting library involved).

Renders tv_mean against height, one polyline per (beta, degree) series with
vertical standard-error bars, as a standalone SVG text file.
"""

from __future__ import annotations

from .scan import ScanResult

__all__ = ["render_scan_svg"]

_PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f",
)

_WIDTH, _HEIGHT = 780, 520
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 190, 30, 55


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    step = (hi - lo) / count
    return [lo + i * step for i in range(count + 1)]


def render_scan_svg(rows: list[ScanResult], title: str = "") -> str:
    """SVG document for the given scan rows."""
    if not rows:
        raise ValueError("no rows to plot")
    series: dict[tuple[float, float], list[ScanResult]] = {}
    for r in rows:
        series.setdefault((r.beta, r.degree), []).append(r)
    for key in series:
        series[key] = sorted(series[key], key=lambda r: r.h)

    hs = [r.h for r in rows]
    x_lo, x_hi = min(hs), max(hs)
    if x_lo == x_hi:
        x_lo, x_hi = x_lo - 1, x_hi + 1
    y_lo = 0.0
    y_hi = max(
        0.05,
        max(r.tv_mean + (r.tv_stderr if r.tv_stderr < float("inf") else 0.0) for r in rows),
    ) * 1.08

    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B

    def sx(h: float) -> float:
        return _MARGIN_L + (h - x_lo) / (x_hi - x_lo) * plot_w

    def sy(v: float) -> float:
        return _MARGIN_T + plot_h - (v - y_lo) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="#333" stroke-width="1"/>',
    ]
    if title:
        parts.append(
            f'<text x="{_WIDTH / 2:.1f}" y="20" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{title}</text>'
        )

    for tick in sorted({int(round(t)) for t in _ticks(x_lo, x_hi)}):
        if tick < x_lo or tick > x_hi:
            continue
        x = sx(tick)
        parts.append(
            f'<line x1="{x:.1f}" y1="{_MARGIN_T + plot_h}" x2="{x:.1f}" '
            f'y2="{_MARGIN_T + plot_h + 5}" stroke="#333"/>'
        )
        parts.append(
            f'<text x="{x:.1f}" y="{_MARGIN_T + plot_h + 20}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{tick}</text>'
        )
    for tick in _ticks(y_lo, y_hi):
        y = sy(tick)
        parts.append(
            f'<line x1="{_MARGIN_L - 5}" y1="{y:.1f}" x2="{_MARGIN_L}" y2="{y:.1f}" '
            'stroke="#333"/>'
        )
        parts.append(
            f'<text x="{_MARGIN_L - 9}" y="{y + 4:.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{tick:.3g}</text>'
        )
    parts.append(
        f'<text x="{_MARGIN_L + plot_w / 2:.1f}" y="{_HEIGHT - 12}" text-anchor="middle" '
        'font-family="sans-serif" font-size="12">height h</text>'
    )
    parts.append(
        f'<text x="18" y="{_MARGIN_T + plot_h / 2:.1f}" text-anchor="middle" '
        'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 18 {_MARGIN_T + plot_h / 2:.1f})">tv_mean</text>'
    )

    for idx, ((beta, degree), pts) in enumerate(sorted(series.items())):
        color = _PALETTE[idx % len(_PALETTE)]
        coords = [(sx(r.h), sy(r.tv_mean)) for r in pts]
        for r, (x, y) in zip(pts, coords):
            if 0.0 < r.tv_stderr < float("inf"):
                y1, y2 = sy(r.tv_mean + r.tv_stderr), sy(r.tv_mean - r.tv_stderr)
                parts.append(
                    f'<line x1="{x:.1f}" y1="{y1:.1f}" x2="{x:.1f}" y2="{y2:.1f}" '
                    f'stroke="{color}" stroke-width="1"/>'
                )
                for yc in (y1, y2):
                    parts.append(
                        f'<line x1="{x - 3:.1f}" y1="{yc:.1f}" x2="{x + 3:.1f}" '
                        f'y2="{yc:.1f}" stroke="{color}" stroke-width="1"/>'
                    )
        if len(coords) > 1:
            path = " ".join(f"{x:.1f},{y:.1f}" for x, y in coords)
            parts.append(
                f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.6"/>'
            )
        for x, y in coords:
            parts.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="3" fill="{color}"/>')
        legend_y = _MARGIN_T + 16 + 18 * idx
        legend_x = _WIDTH - _MARGIN_R + 14
        parts.append(
            f'<line x1="{legend_x}" y1="{legend_y - 4}" x2="{legend_x + 22}" '
            f'y2="{legend_y - 4}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{legend_x + 28}" y="{legend_y}" font-family="sans-serif" '
            f'font-size="11">beta={beta:g}, degree={degree:g}</text>'
        )

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
