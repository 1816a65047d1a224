"""Report figures: hand-emitted SVG line plots plus matplotlib PNG renders."""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_WIDTH, _HEIGHT = 800, 500
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 160, 40, 50
_COLORS = ("#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _scale(values: Sequence[float]) -> tuple[float, float]:
    lo, hi = min(values), max(values)
    if hi == lo:
        hi = lo + 1.0
    return lo, hi


def line_svg(path: str, x: Sequence[float], series: list[tuple[str, Sequence[float]]],
             title: str = "", xlabel: str = "", ylabel: str = "") -> None:
    """Fixed-viewport line plot with one polyline per series and a text legend."""
    xs = list(x)
    xlo, xhi = _scale(xs)
    all_y = [v for _, ys in series for v in ys]
    ylo, yhi = _scale(all_y)
    px0, px1 = _MARGIN_L, _WIDTH - _MARGIN_R
    py0, py1 = _HEIGHT - _MARGIN_B, _MARGIN_T

    def sx(v: float) -> float:
        return px0 + (v - xlo) / (xhi - xlo) * (px1 - px0)

    def sy(v: float) -> float:
        return py0 + (v - ylo) / (yhi - ylo) * (py1 - py0)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<line x1="{px0}" y1="{py0}" x2="{px1}" y2="{py0}" stroke="black"/>',
        f'<line x1="{px0}" y1="{py0}" x2="{px0}" y2="{py1}" stroke="black"/>',
        f'<text x="{(px0 + px1) / 2:.1f}" y="20" text-anchor="middle" '
        f'font-size="16">{title}</text>',
        f'<text x="{(px0 + px1) / 2:.1f}" y="{_HEIGHT - 12}" text-anchor="middle" '
        f'font-size="13">{xlabel}</text>',
        f'<text x="18" y="{(py0 + py1) / 2:.1f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 18 {(py0 + py1) / 2:.1f})">{ylabel}</text>',
    ]
    for bound, px in ((xlo, px0), (xhi, px1)):
        parts.append(f'<text x="{px}" y="{py0 + 18}" text-anchor="middle" '
                     f'font-size="12">{bound:g}</text>')
    for bound, py in ((ylo, py0), (yhi, py1)):
        parts.append(f'<text x="{px0 - 8}" y="{py + 4:.1f}" text-anchor="end" '
                     f'font-size="12">{bound:g}</text>')
    for i, (label, ys) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        points = " ".join(f"{sx(vx):.2f},{sy(vy):.2f}" for vx, vy in zip(xs, ys))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" '
                     f'points="{points}"/>')
        ly = _MARGIN_T + 20 * i
        parts.append(f'<line x1="{px1 + 12}" y1="{ly}" x2="{px1 + 36}" y2="{ly}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{px1 + 42}" y="{ly + 4}" font-size="12">{label}</text>')
    parts.append("</svg>")
    with open(path, "w", newline="\n") as f:
        f.write("\n".join(parts) + "\n")


def line_png(path: str, x: Sequence[float], series: list[tuple[str, Sequence[float]]],
             title: str = "", xlabel: str = "", ylabel: str = "") -> None:
    fig, ax = plt.subplots(figsize=(8, 5))
    for i, (label, ys) in enumerate(series):
        ax.plot(x, ys, label=label, color=_COLORS[i % len(_COLORS)], marker="o", ms=3)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(loc="best")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
