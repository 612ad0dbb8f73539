"""Selection-frequency bar charts as standalone SVG."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

PANEL_W, PANEL_H = 320, 240
MARGIN_L, MARGIN_B, MARGIN_T = 44, 40, 28


def _panel(x0: float, title: str, freqs: list[tuple[str, float]]) -> list[str]:
    plot_w = PANEL_W - MARGIN_L - 12
    plot_h = PANEL_H - MARGIN_B - MARGIN_T
    left, top = x0 + MARGIN_L, MARGIN_T
    bottom = top + plot_h
    out = [f'<text x="{x0 + PANEL_W / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>']
    out.append(f'<line x1="{left:.1f}" y1="{top:.1f}" x2="{left:.1f}" y2="{bottom:.1f}" stroke="black"/>')
    out.append(f'<line x1="{left:.1f}" y1="{bottom:.1f}" x2="{left + plot_w:.1f}" y2="{bottom:.1f}" stroke="black"/>')
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = bottom - tick * plot_h
        out.append(f'<line x1="{left - 4:.1f}" y1="{y:.1f}" x2="{left:.1f}" y2="{y:.1f}" stroke="black"/>')
        out.append(f'<text x="{left - 6:.1f}" y="{y + 4:.1f}" text-anchor="end" font-size="10">{tick:.2f}</text>')
    if not freqs:
        out.append(
            f'<text x="{left + plot_w / 2:.1f}" y="{top + plot_h / 2:.1f}" text-anchor="middle" '
            f'font-size="12" fill="gray">no variables selected</text>'
        )
        return out
    slot = plot_w / len(freqs)
    bar_w = 0.6 * slot
    for i, (name, f) in enumerate(freqs):
        f = min(max(float(f), 0.0), 1.0)
        h = f * plot_h
        x = left + i * slot + (slot - bar_w) / 2
        out.append(
            f'<rect x="{x:.1f}" y="{bottom - h:.1f}" width="{bar_w:.1f}" height="{h:.1f}" '
            f'fill="steelblue" data-name="{escape(name)}" data-frequency="{f:.4f}"/>'
        )
        out.append(f'<text x="{x + bar_w / 2:.1f}" y="{bottom - h - 4:.1f}" text-anchor="middle" font-size="10">{100 * f:.2f}%</text>')
        out.append(f'<text x="{x + bar_w / 2:.1f}" y="{bottom + 14:.1f}" text-anchor="middle" font-size="10">{escape(name)}</text>')
    out.append(
        f'<text x="{left + plot_w / 2:.1f}" y="{bottom + 32:.1f}" text-anchor="middle" font-size="10">'
        "relative frequency of selection</text>"
    )
    return out


def render_svg(freq_by_margin: list[list[tuple[str, float]]], titles=None) -> str:
    titles = titles or [f"Margin {v + 1}" for v in range(len(freq_by_margin))]
    width = PANEL_W * len(freq_by_margin)
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL_H}" '
        f'viewBox="0 0 {width} {PANEL_H}" font-family="sans-serif">',
        f'<rect x="0" y="0" width="{width}" height="{PANEL_H}" fill="white"/>',
    ]
    for v, freqs in enumerate(freq_by_margin):
        parts.extend(_panel(v * PANEL_W, titles[v], freqs))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_plot(result, path) -> None:
    """Write one panel per margin with the selected covariates' frequencies.

    ``result`` is a BrbvsResult or its JSON dictionary.
    """
    data = result if isinstance(result, dict) else result.to_dict()
    panels = [sorted(ms["freq"].items(), key=lambda kv: data["names"].index(kv[0])) for ms in data["margins"]]
    Path(path).write_text(render_svg(panels))
