"""Static SVG renderings of trajectories and drill fields.

Output is plain text built with fixed number formatting, so the same
solution always produces byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .avoidance import Obstacle
from .dynamics import TimeGrid, trajectory_samples
from .geometry import vertices

SIZE = 480
MARGIN = 24
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _f(v: float) -> str:
    s = f"{v:.2f}".rstrip("0").rstrip(".")
    return "0" if s == "-0" else s


@dataclass
class Canvas:
    """Square drawing area mapping a world box to pixels (y up)."""

    lo: np.ndarray
    span: float
    items: list[str] = field(default_factory=list)

    @classmethod
    def fit(cls, points: np.ndarray, pad: float = 0.05) -> Canvas:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        pts = pts[np.all(np.isfinite(pts), axis=1)]
        if not len(pts):
            pts = np.zeros((1, 2))
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        span = float(max(hi - lo)) or 1.0
        center = (lo + hi) / 2
        span *= 1.0 + 2 * pad
        return cls(center - span / 2, span)

    def px(self, x: float, y: float) -> tuple[str, str]:
        scale = (SIZE - 2 * MARGIN) / self.span
        return _f(MARGIN + (x - self.lo[0]) * scale), _f(SIZE - MARGIN - (y - self.lo[1]) * scale)

    def polyline(self, pts, stroke: str, width: float = 1.5, dash: str | None = None) -> None:
        coords = " ".join(",".join(self.px(x, y)) for x, y in pts)
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.items.append(f'<polyline points="{coords}" fill="none" stroke="{stroke}" '
                          f'stroke-width="{_f(width)}"{extra}/>')

    def polygon(self, pts, stroke: str, fill: str = "none", opacity: float = 1.0) -> None:
        coords = " ".join(",".join(self.px(x, y)) for x, y in pts)
        self.items.append(f'<polygon points="{coords}" fill="{fill}" fill-opacity="{_f(opacity)}" '
                          f'stroke="{stroke}" stroke-width="1"/>')

    def circle(self, x: float, y: float, r: float, stroke: str, fill: str = "none", opacity: float = 1.0) -> None:
        cx, cy = self.px(x, y)
        rr = _f(r * (SIZE - 2 * MARGIN) / self.span)
        self.items.append(f'<circle cx="{cx}" cy="{cy}" r="{rr}" fill="{fill}" fill-opacity="{_f(opacity)}" '
                          f'stroke="{stroke}" stroke-width="1"/>')

    def marker(self, x: float, y: float, shape: str, color: str, size: float = 4.0) -> None:
        cx, cy = (float(v) for v in self.px(x, y))
        s = size
        if shape == "x":
            d = f"M{_f(cx - s)},{_f(cy - s)}L{_f(cx + s)},{_f(cy + s)}M{_f(cx - s)},{_f(cy + s)}L{_f(cx + s)},{_f(cy - s)}"
        elif shape == "asterisk":
            d = (f"M{_f(cx - s)},{_f(cy)}L{_f(cx + s)},{_f(cy)}"
                 f"M{_f(cx - s / 2)},{_f(cy - s)}L{_f(cx + s / 2)},{_f(cy + s)}"
                 f"M{_f(cx - s / 2)},{_f(cy + s)}L{_f(cx + s / 2)},{_f(cy - s)}")
        elif shape == "diamond":
            d = f"M{_f(cx)},{_f(cy - s)}L{_f(cx + s)},{_f(cy)}L{_f(cx)},{_f(cy + s)}L{_f(cx - s)},{_f(cy)}Z"
        elif shape == "square":
            d = f"M{_f(cx - s)},{_f(cy - s)}h{_f(2 * s)}v{_f(2 * s)}h{_f(-2 * s)}Z"
        elif shape == "circle":
            self.items.append(f'<circle cx="{_f(cx)}" cy="{_f(cy)}" r="{_f(s)}" fill="none" stroke="{color}"/>')
            return
        else:
            raise ValueError(f"unknown marker {shape!r}")
        self.items.append(f'<path d="{d}" fill="none" stroke="{color}" stroke-width="1.2"/>')

    def text(self, x_px: float, y_px: float, label: str) -> None:
        safe = label.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
        self.items.append(f'<text x="{_f(x_px)}" y="{_f(y_px)}" font-family="sans-serif" font-size="11">{safe}</text>')

    def render(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
                f'viewBox="0 0 {SIZE} {SIZE}">')
        body = "\n".join(["<rect width=\"100%\" height=\"100%\" fill=\"white\"/>", *self.items])
        return f"{head}\n{body}\n</svg>\n"


def trajectory_svg(start, controls, grid: TimeGrid, obstacles: Sequence[Obstacle] = (),
                   avoid_times: Sequence[float] = (), added_times: Sequence[float] = (),
                   samples: int = 400, title: str = "") -> str:
    """Vehicle path with obstacles, ``x`` at avoidance points and diamonds at added ones."""
    times = np.linspace(0.0, grid.horizon, samples)
    path = trajectory_samples(start, controls, grid, times)[:, :2]
    pts = [path]
    for o in obstacles:
        c = np.asarray(o.centers)
        pts += [c - o.radius, c + o.radius]
    cv = Canvas.fit(np.vstack(pts))
    for o in obstacles:
        for x, y in o.centers:
            cv.circle(x, y, o.radius, "#555555", "#999999", 0.5)
    cv.polyline(path, PALETTE[0])
    s0 = np.asarray(start.as_array() if hasattr(start, "as_array") else start, dtype=float)
    cv.marker(s0[0], s0[1], "circle", "black")
    cv.polyline([s0[:2], s0[:2] + s0[2:]], "black", 1.0, "3,3")
    cv.marker(path[-1, 0], path[-1, 1], "square", "black")
    added = set(float(t) for t in added_times)
    if len(avoid_times):
        at = trajectory_samples(start, controls, grid, np.asarray(sorted(avoid_times)))
        for t, (x, y) in zip(sorted(avoid_times), at[:, :2]):
            cv.marker(x, y, "diamond" if float(t) in added else "x", PALETTE[1])
    if title:
        cv.text(MARGIN, MARGIN - 8, title)
    return cv.render()


def drill_svg(instance, controls: Sequence, trace, title: str = "") -> str:
    """Zone, defender paths with intercept polygons at every attacker step,
    attacker paths with asterisks (and warning polygons in Drill 2)."""
    geo = instance.geometry
    times = instance.attacker_grid.nodes
    dense = np.linspace(0.0, instance.control_grid.horizon, 300)
    paths = []
    for i, d in enumerate(instance.defenders):
        paths.append(trajectory_samples(d.start, controls[i], instance.control_grid, dense)[:, :2])
    att = np.stack([trace.p, trace.q], axis=-1)  # (attackers, N_a + 1, 2)
    zone = vertices((0.0, 0.0), geo.zone_radius, geo.zone_sides)
    cv = Canvas.fit(np.vstack([zone, *paths, att.reshape(-1, 2)]))
    cv.polygon(zone, "#333333", "#cccccc", 0.6)
    for i, path in enumerate(paths):
        color = PALETTE[i % len(PALETTE)]
        for k in range(1, len(times)):
            c = trace.defender_positions[i, k]
            cv.polygon(vertices(c, geo.intercept_radius, geo.intercept_sides), color, color, 0.08)
        cv.polyline(path, color)
        cv.marker(path[0, 0], path[0, 1], "circle", color)
    warn = trace.modes.shape[-1] == 2
    for j in range(att.shape[0]):
        color = PALETTE[(len(paths) + j) % len(PALETTE)]
        cv.polyline(att[j], color, 1.0, "4,2")
        for k in range(att.shape[1]):
            if warn and k >= 1:
                cv.polygon(vertices(att[j, k], geo.warning_radius, geo.warning_sides), color, "none")
            cv.marker(att[j, k, 0], att[j, k, 1], "asterisk", color, 3.5)
    if title:
        cv.text(MARGIN, MARGIN - 8, title)
    return cv.render()

