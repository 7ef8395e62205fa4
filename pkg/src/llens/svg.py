"""Static SVG plots of zero constellations.

Output depends only on the report contents: coordinates are written with a fixed
number of decimals and elements are emitted in a fixed order.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

from llens.zeros import PolygonReport

SIZE = 480
MARGIN = 40


def _fmt(x: float) -> str:
    text = f"{x:.3f}"
    return "0.000" if text == "-0.000" else text


def _extent(report: PolygonReport) -> float:
    pts = [complex(z) for z in report.scaled] + [complex(z) for z in report.target]
    biggest = max((max(abs(z.real), abs(z.imag)) for z in pts), default=1.0)
    return 1.25 * biggest if biggest > 0 else 1.0


def constellation_svg(report: PolygonReport, title: str | None = None) -> str:
    """Scaled zeros (filled) over the target polygon (hollow), with both axes drawn.

    The horizontal axis is Re(s) - 1/2 after scaling, so the critical line is the
    vertical axis through the centre.
    """
    half = _extent(report)
    inner = SIZE - 2 * MARGIN

    def px(z: complex) -> tuple[str, str]:
        x = MARGIN + (z.real + half) / (2 * half) * inner
        y = MARGIN + (half - z.imag) / (2 * half) * inner
        return _fmt(x), _fmt(y)

    mid = _fmt(SIZE / 2)
    lo, hi = _fmt(MARGIN), _fmt(SIZE - MARGIN)
    heading = title or f"N={report.N} p_N={report.p_N} m={report.m} orientation={report.orientation}"
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">',
        f'<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>',
        f'<text x="{mid}" y="24" font-family="monospace" font-size="13" text-anchor="middle">{escape(heading)}</text>',
        f'<line class="real-axis" x1="{lo}" y1="{mid}" x2="{hi}" y2="{mid}" stroke="#888" stroke-width="1"/>',
        f'<line class="critical-line" x1="{mid}" y1="{lo}" x2="{mid}" y2="{hi}" stroke="#c33" stroke-width="1"/>',
    ]
    ring = [complex(z) for z in report.target]
    outer = [z for z in ring if abs(z) > 0]
    if len(outer) > 1:
        path = " ".join(",".join(px(z)) for z in outer)
        out.append(f'<polygon class="target" points="{path}" fill="none" stroke="#36c" stroke-dasharray="4 3"/>')
    for z in ring:
        x, y = px(z)
        out.append(f'<circle class="target-vertex" cx="{x}" cy="{y}" r="6" fill="none" stroke="#36c"/>')
    for z in report.scaled:
        x, y = px(complex(z))
        out.append(f'<circle class="zero" cx="{x}" cy="{y}" r="3.5" fill="black"/>')
    out.append(
        f'<text x="{mid}" y="{_fmt(SIZE - 12)}" font-family="monospace" font-size="11" text-anchor="middle">'
        f'hausdorff={report.hausdorff:.4f} target={report.target_name}</text>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"
