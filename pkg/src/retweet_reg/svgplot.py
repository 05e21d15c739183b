"""Dependency-free SVG rendering of actual-vs-predicted series.

One polyline plus one circle per sample for each series, so the circle
count of every series group equals the number of plotted rows. Output is
a pure function of its inputs; no timestamps, no randomness.
"""

from .errors import ValidationError

SERIES_COLORS = (
    "#222222",  # actual
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
)

WIDTH = 880
HEIGHT = 440
MARGIN_LEFT = 70
MARGIN_RIGHT = 20
MARGIN_TOP = 40
MARGIN_BOTTOM = 45


def _slug(label: str) -> str:
    return "".join(ch if ch.isalnum() else "-" for ch in label.lower())


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def scatter_svg(series, title: str = "") -> str:
    """Render an SVG document from [(label, values), ...]; all series
    must share one length, plotted against sample position 0..n-1."""
    if not series:
        raise ValidationError("nothing to plot")
    n = len(series[0][1])
    if n == 0:
        raise ValidationError("cannot plot empty series")
    for label, values in series:
        if len(values) != n:
            raise ValidationError(
                f"series {label!r} has {len(values)} values, expected {n}"
            )
    lo = min(min(values) for _, values in series)
    hi = max(max(values) for _, values in series)
    if lo == hi:
        lo, hi = lo - 1.0, hi + 1.0
    span = hi - lo
    lo -= 0.05 * span
    hi += 0.05 * span

    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def sx(i: int) -> float:
        return MARGIN_LEFT + (plot_w * i / (n - 1) if n > 1 else plot_w / 2)

    def sy(v: float) -> float:
        return MARGIN_TOP + plot_h * (1.0 - (v - lo) / (hi - lo))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
    ]
    if title:
        out.append(
            f'<text x="{WIDTH / 2:.0f}" y="22" text-anchor="middle" '
            f'font-family="sans-serif" font-size="15">{title}</text>'
        )
    # axes
    x0, y0 = MARGIN_LEFT, MARGIN_TOP + plot_h
    out.append(
        f'<line x1="{x0}" y1="{MARGIN_TOP}" x2="{x0}" y2="{y0}" stroke="#888888"/>'
    )
    out.append(
        f'<line x1="{x0}" y1="{y0}" x2="{x0 + plot_w}" y2="{y0}" stroke="#888888"/>'
    )
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        v = lo + frac * (hi - lo)
        y = sy(v)
        out.append(
            f'<line x1="{x0 - 4}" y1="{_fmt(y)}" x2="{x0}" y2="{_fmt(y)}" stroke="#888888"/>'
        )
        out.append(
            f'<text x="{x0 - 8}" y="{_fmt(y + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{v:.1f}</text>'
        )
    for i in sorted({0, n // 2, n - 1}):
        x = sx(i)
        out.append(
            f'<line x1="{_fmt(x)}" y1="{y0}" x2="{_fmt(x)}" y2="{y0 + 4}" stroke="#888888"/>'
        )
        out.append(
            f'<text x="{_fmt(x)}" y="{y0 + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{i}</text>'
        )
    out.append(
        f'<text x="{x0 + plot_w / 2:.0f}" y="{HEIGHT - 8}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">sample</text>'
    )

    # legend along the top edge
    lx = float(MARGIN_LEFT)
    for idx, (label, _) in enumerate(series):
        color = SERIES_COLORS[idx % len(SERIES_COLORS)]
        out.append(
            f'<rect x="{_fmt(lx)}" y="{MARGIN_TOP - 14}" width="10" height="10" fill="{color}"/>'
        )
        out.append(
            f'<text x="{_fmt(lx + 14)}" y="{MARGIN_TOP - 5}" font-family="sans-serif" '
            f'font-size="11">{label}</text>'
        )
        lx += 14 + 7.0 * len(label) + 18

    for idx, (label, values) in enumerate(series):
        color = SERIES_COLORS[idx % len(SERIES_COLORS)]
        points = " ".join(f"{_fmt(sx(i))},{_fmt(sy(v))}" for i, v in enumerate(values))
        out.append(f'<g class="series-{_slug(label)}">')
        out.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1" points="{points}"/>'
        )
        for i, v in enumerate(values):
            out.append(
                f'<circle cx="{_fmt(sx(i))}" cy="{_fmt(sy(v))}" r="2.5" fill="{color}"/>'
            )
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
