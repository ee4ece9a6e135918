"""Deterministic SVG and CSV renderers for forests, circle domains, reports.

All numeric output is formatted with fixed precision so identical inputs
produce byte-identical files.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

__all__ = [
    "degree_table_csv",
    "render",
    "residual_history_csv",
    "svg_circle_domain",
    "svg_curves",
    "svg_forest_slice",
    "svg_witness_overlay",
]

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2"]


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _svg_header(xs: np.ndarray, ys: np.ndarray, size: int = 800) -> tuple[str, float]:
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    w = max(x1 - x0, 1e-9)
    h = max(y1 - y0, 1e-9)
    pad = 0.05 * max(w, h)
    header = (
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="{_fmt(x0 - pad)} {_fmt(y0 - pad)} {_fmt(w + 2 * pad)} {_fmt(h + 2 * pad)}" '
        f'width="{size}" height="{size}">'
        f'<g transform="scale(1,-1) translate(0,{_fmt(-(y0 + y1))})">'
    )
    return header, max(w, h)


def _polyline(vertices: np.ndarray, color: str, width: float) -> str:
    pts = " ".join(f"{_fmt(v.real)},{_fmt(v.imag)}" for v in vertices)
    first = vertices[0]
    return (
        f'<polyline fill="none" stroke="{color}" stroke-width="{_fmt(width)}" '
        f'points="{pts} {_fmt(first.real)},{_fmt(first.imag)}"/>'
    )


def svg_curves(curves, colors=None, size: int = 800) -> str:
    """Closed polylines on a common canvas."""
    allv = np.concatenate([np.asarray(c, dtype=np.complex128) for c in curves])
    header, scale = _svg_header(allv.real, allv.imag, size)
    parts = [header]
    for i, c in enumerate(curves):
        color = (colors or _PALETTE)[i % len(colors or _PALETTE)]
        parts.append(_polyline(np.asarray(c, dtype=np.complex128), color, scale / 600))
    parts.append("</g></svg>")
    return "".join(parts)


def svg_forest_slice(forest, depth: int, size: int = 800) -> str:
    """One depth slice of a puzzle forest, pieces colored by local degree."""
    pieces = forest.by_depth[depth]
    allv = np.concatenate([p.boundary.vertices for p in pieces])
    header, scale = _svg_header(allv.real, allv.imag, size)
    parts = [header]
    for p in sorted(pieces, key=lambda p: p.id):
        deg = p.local_degree or 1
        color = _PALETTE[(deg - 1) % len(_PALETTE)]
        parts.append(_polyline(p.boundary.vertices, color, scale / 600))
    parts.append("</g></svg>")
    return "".join(parts)


def svg_circle_domain(domain, extra_curves=(), size: int = 800) -> str:
    """Circles and point components of a circle domain."""
    pts = []
    for c in domain.circles:
        pts.extend([c.center - c.radius - 1j * c.radius, c.center + c.radius + 1j * c.radius])
    pts.extend(domain.point_components or [0j])
    allv = np.asarray(pts, dtype=np.complex128)
    header, scale = _svg_header(allv.real, allv.imag, size)
    parts = [header]
    for i, c in enumerate(domain.circles):
        parts.append(
            f'<circle cx="{_fmt(c.center.real)}" cy="{_fmt(c.center.imag)}" '
            f'r="{_fmt(c.radius)}" fill="none" stroke="{_PALETTE[i % len(_PALETTE)]}" '
            f'stroke-width="{_fmt(scale / 600)}"/>'
        )
    for p in domain.point_components:
        parts.append(
            f'<circle cx="{_fmt(p.real)}" cy="{_fmt(p.imag)}" r="{_fmt(scale / 300)}" '
            f'fill="#000000"/>'
        )
    for i, cv in enumerate(extra_curves):
        parts.append(_polyline(np.asarray(cv, dtype=np.complex128), "#aaaaaa", scale / 800))
    parts.append("</g></svg>")
    return "".join(parts)


def svg_witness_overlay(curve_vertices, witness_pair, size: int = 800) -> str:
    """A curve with a measured witness pair drawn as a chord."""
    v = np.asarray(curve_vertices, dtype=np.complex128)
    header, scale = _svg_header(v.real, v.imag, size)
    p, q = witness_pair
    parts = [
        header,
        _polyline(v, _PALETTE[0], scale / 600),
        f'<line x1="{_fmt(p.real)}" y1="{_fmt(p.imag)}" x2="{_fmt(q.real)}" '
        f'y2="{_fmt(q.imag)}" stroke="#d62728" stroke-width="{_fmt(scale / 400)}"/>',
        f'<circle cx="{_fmt(p.real)}" cy="{_fmt(p.imag)}" r="{_fmt(scale / 250)}" fill="#d62728"/>',
        f'<circle cx="{_fmt(q.real)}" cy="{_fmt(q.imag)}" r="{_fmt(scale / 250)}" fill="#d62728"/>',
        "</g></svg>",
    ]
    return "".join(parts)


def degree_table_csv(rows: list[dict]) -> str:
    """Chain-degree matrix (one row per end, one column per p)."""
    buf = io.StringIO()
    if not rows:
        return "piece_id\n"
    p_max = len(rows[0].get("degrees", []))
    buf.write("piece_id,classification,preperiod,n," + ",".join(f"p{p}" for p in range(1, p_max + 1)) + "\n")
    for row in rows:
        degs = ",".join("" if d is None else str(d) for d in row["degrees"])
        buf.write(
            f'{row["piece_id"]},{row["classification"]},{row["preperiod"]},{row["n"]},{degs}\n'
        )
    return buf.getvalue()


def residual_history_csv(history: list[float]) -> str:
    buf = io.StringIO()
    buf.write("round,max_circularity\n")
    for i, h in enumerate(history, start=1):
        buf.write(f"{i},{h:.12e}\n")
    return buf.getvalue()


def render(report: dict, out_dir: str | Path, forest=None, domain=None) -> list[Path]:
    """Write SVG/CSV/JSON files for the sections present in a report dict.

    Returns the written paths.  Deterministic bytes for a fixed report.
    """
    import json

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def write(name: str, text: str):
        path = out / name
        path.write_text(text)
        written.append(path)

    write("report.json", json.dumps(report, sort_keys=True, indent=1))

    deg = report.get("degree_tables", {})
    if "rows" in deg:
        write("degrees.csv", degree_table_csv(deg["rows"]))
    unif = report.get("uniformization", {})
    if "residual_history" in unif:
        write("residuals.csv", residual_history_csv(unif["residual_history"]))
    if "circle_domain" in unif:
        from .uniformize import Circle, CircleDomain

        cd = unif["circle_domain"]
        dom = CircleDomain(
            circles=[Circle(complex(c["c"][0], c["c"][1]), c["r"]) for c in cd["circles"]],
            point_components=[complex(p[0], p[1]) for p in cd["points"]],
        )
        write("circles.svg", svg_circle_domain(dom))
    if forest is not None:
        for depth in range(1, forest.depth + 1):
            write(f"forest_depth{depth}.svg", svg_forest_slice(forest, depth))
    return written
