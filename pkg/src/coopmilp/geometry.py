"""Regular polygons described by their inscribed radius.

Face ``m`` (1-based) of an ``M``-gon has outward normal
``(sin(2*pi*m/M), cos(2*pi*m/M))``; a point ``p`` lies inside the polygon of
inscribed radius ``R`` about ``c`` when ``n_m . (p - c) <= R`` for every face.
"""

from __future__ import annotations

import math

import numpy as np


def face_normals(sides: int) -> np.ndarray:
    if sides < 3:
        raise ValueError(f"a polygon needs at least 3 sides, got {sides}")
    ang = 2.0 * math.pi * np.arange(1, sides + 1) / sides
    n = np.column_stack([np.sin(ang), np.cos(ang)])
    n[np.abs(n) < 1e-14] = 0.0  # exact zeros at multiples of pi/2
    return n


def face_margins(point, center, radius: float, sides: int) -> np.ndarray:
    """``n_m . (point - center) - radius`` for each face; all <= 0 means inside."""
    d = np.asarray(point, dtype=float) - np.asarray(center, dtype=float)
    return face_normals(sides) @ d - radius


def in_polygon(point, center, radius: float, sides: int) -> bool:
    return bool(np.all(face_margins(point, center, radius, sides) <= 0.0))


def vertices(center, radius: float, sides: int) -> np.ndarray:
    """Polygon corners, ordered so consecutive faces share a vertex."""
    normals = face_normals(sides)
    out = []
    for m in range(sides):
        n1, n2 = normals[m], normals[(m + 1) % sides]
        M = np.vstack([n1, n2])
        out.append(np.linalg.solve(M, [radius, radius]))
    return np.asarray(out) + np.asarray(center, dtype=float)
