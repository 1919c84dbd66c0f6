"""Kernel density fields over 2D layouts and contour polygon extraction.

Densities use an isotropic Gaussian kernel on a regular grid whose bounds
enclose the points with a 5% margin. Contours come from marching squares
with linear edge interpolation; the grid is framed with a below-level
border during tracing so every polyline closes, with frame crossings
collapsed onto the boundary.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyInput, LevelOutOfRange, NonFiniteWeight
from .layout import ProjectionLayout

DEFAULT_GRID = 128
DEFAULT_LEVEL_FRACTIONS = (0.25, 0.5, 0.75)


@dataclass(eq=False)
class DensityField:
    grid: np.ndarray            # (H, W) values, row y, column x
    bounds: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax
    bandwidth: float
    weighted: bool

    def xs(self) -> np.ndarray:
        xmin, _, xmax, _ = self.bounds
        return np.linspace(xmin, xmax, self.grid.shape[1])

    def ys(self) -> np.ndarray:
        _, ymin, _, ymax = self.bounds
        return np.linspace(ymin, ymax, self.grid.shape[0])

    def cell_area(self) -> float:
        xs, ys = self.xs(), self.ys()
        return float((xs[1] - xs[0]) * (ys[1] - ys[0]))


@dataclass(eq=False)
class ContourSet:
    levels: list[float]
    polylines: dict[float, list[np.ndarray]]  # level -> closed (k, 2) rings
    set_id: Optional[str] = None
    flags: frozenset[str] = field(default_factory=frozenset)

    def to_json(self) -> dict:
        return {
            "setId": self.set_id,
            "levels": [float(v) for v in self.levels],
            "polylines": {
                str(level): [ring.tolist() for ring in rings]
                for level, rings in self.polylines.items()
            },
            "flags": sorted(self.flags),
        }


def _bounds_with_margin(points: np.ndarray) -> tuple[float, float, float, float]:
    xmin, ymin = points.min(axis=0)
    xmax, ymax = points.max(axis=0)
    spans = [max(xmax - xmin, 0.0), max(ymax - ymin, 0.0)]
    pads = [0.05 * s if s > 0 else 1.0 for s in spans]
    return (float(xmin - pads[0]), float(ymin - pads[1]),
            float(xmax + pads[0]), float(ymax + pads[1]))


def scott_bandwidth(points: np.ndarray) -> float:
    """Scott's rule n^(-1/6) times the average per-axis std."""
    n = points.shape[0]
    sigma = float(points.std(axis=0).mean())
    if sigma < 1e-12:
        spans = points.max(axis=0) - points.min(axis=0)
        sigma = float(max(spans.max(), 1.0)) * 0.1
    return sigma * n ** (-1.0 / 6.0)


def kde_density(points: Sequence[Sequence[float]] | np.ndarray,
                weights: Optional[Sequence[float]] = None,
                grid_size: int = DEFAULT_GRID,
                bandwidth: Optional[float] = None) -> DensityField:
    """Gaussian kernel density over a grid_size x grid_size grid.

    With weights, each kernel is scaled by its weight and the field is
    normalized by the weight sum, so uniform weights reproduce the
    unweighted field.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] != 2:
        raise EmptyInput("need at least one 2D point")
    if weights is None:
        w = np.ones(pts.shape[0])
        weighted = False
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (pts.shape[0],) or not np.all(np.isfinite(w)):
            raise NonFiniteWeight("weights must be finite, one per point")
        weighted = True
    h = bandwidth if bandwidth is not None else scott_bandwidth(pts)
    bounds = _bounds_with_margin(pts)
    xs = np.linspace(bounds[0], bounds[2], grid_size)
    ys = np.linspace(bounds[1], bounds[3], grid_size)
    dx = xs[None, :] - pts[:, 0:1]            # (n, W)
    dy = ys[None, :] - pts[:, 1:2]            # (n, H)
    kx = np.exp(-0.5 * (dx / h) ** 2)
    ky = np.exp(-0.5 * (dy / h) ** 2)
    grid = (ky * w[:, None]).T @ kx           # (H, W)
    grid /= w.sum() * 2.0 * np.pi * h * h
    return DensityField(grid=grid, bounds=bounds, bandwidth=float(h),
                        weighted=weighted)


# -- marching squares ----------------------------------------------------------


def _frame(values: np.ndarray, xs: np.ndarray, ys: np.ndarray, fill: float,
           ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Surround the grid with a below-level frame at the boundary
    coordinates so all isolines close on the boundary."""
    framed = np.full((values.shape[0] + 2, values.shape[1] + 2), fill)
    framed[1:-1, 1:-1] = values
    fx = np.concatenate([[xs[0]], xs, [xs[-1]]])
    fy = np.concatenate([[ys[0]], ys, [ys[-1]]])
    return framed, fx, fy


def _interp(pa: tuple[float, float], pb: tuple[float, float],
            va: float, vb: float, level: float) -> tuple[float, float]:
    if vb == va:
        t = 0.5
    else:
        t = (level - va) / (vb - va)
    t = min(max(t, 0.0), 1.0)
    return (pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1]))


def _cell_segments(corners, values, level):
    """Isoline segments for one cell; saddles resolved by the center value."""
    idx = 0
    for bit, v in enumerate(values):
        if v >= level:
            idx |= 1 << bit
    if idx in (0, 15):
        return []
    p00, p10, p11, p01 = corners          # bl, br, tr, tl
    v00, v10, v11, v01 = values
    bottom = _interp(p00, p10, v00, v10, level)
    right = _interp(p10, p11, v10, v11, level)
    top = _interp(p01, p11, v01, v11, level)
    left = _interp(p00, p01, v00, v01, level)
    table = {
        1: [(left, bottom)], 2: [(bottom, right)], 3: [(left, right)],
        4: [(right, top)], 6: [(bottom, top)], 7: [(left, top)],
        8: [(top, left)], 9: [(top, bottom)], 11: [(top, right)],
        12: [(right, left)], 13: [(right, bottom)], 14: [(bottom, left)],
    }
    if idx in (5, 10):
        center_above = (v00 + v10 + v11 + v01) / 4.0 >= level
        if idx == 5:
            segs = [(left, top), (right, bottom)] if center_above \
                else [(left, bottom), (right, top)]
        else:
            segs = [(bottom, left), (top, right)] if center_above \
                else [(bottom, right), (top, left)]
        return segs
    return table[idx]


def _stitch(segments: list[tuple[tuple, tuple]]) -> list[np.ndarray]:
    """Join segments end-to-start into closed rings."""
    def key(pt):
        return (round(pt[0] * 1e9), round(pt[1] * 1e9))

    start_map: dict = {}
    for seg in segments:
        start_map.setdefault(key(seg[0]), []).append(seg)
    unused = {id(seg) for seg in segments}
    rings = []
    for seg in segments:
        if id(seg) not in unused:
            continue
        unused.discard(id(seg))
        ring = [seg[0], seg[1]]
        while key(ring[-1]) != key(ring[0]):
            nxts = start_map.get(key(ring[-1]), [])
            nxt = next((s for s in nxts if id(s) in unused), None)
            if nxt is None:
                break  # open chain; drop it rather than emit a broken ring
            unused.discard(id(nxt))
            ring.append(nxt[1])
        if key(ring[-1]) == key(ring[0]) and len(ring) > 3:
            ring[-1] = ring[0]
            cleaned = [ring[0]]
            for pt in ring[1:]:
                if key(pt) != key(cleaned[-1]):
                    cleaned.append(pt)
            if key(cleaned[-1]) != key(cleaned[0]):
                cleaned.append(cleaned[0])
            if len(cleaned) > 3:
                rings.append(np.asarray(cleaned))
    return rings


def extract_contours(field: DensityField, levels: Sequence[float],
                     set_id: Optional[str] = None,
                     strict: bool = True) -> ContourSet:
    """Marching-squares isolines at each level.

    Levels outside the field's (min, max) raise `LevelOutOfRange` when
    strict; otherwise they yield no polylines and flag the result.
    """
    values = field.grid
    vmin, vmax = float(values.min()), float(values.max())
    flags: set[str] = set()
    polylines: dict[float, list[np.ndarray]] = {}
    xs, ys = field.xs(), field.ys()
    for level in levels:
        if not (vmin < level < vmax):
            if strict:
                raise LevelOutOfRange(
                    f"level {level} outside field range ({vmin}, {vmax})")
            flags.add("level_out_of_range")
            polylines[float(level)] = []
            continue
        framed, fx, fy = _frame(values, xs, ys, fill=level - 1.0)
        inside = framed >= level
        case = (inside[:-1, :-1] * 1 + inside[:-1, 1:] * 2
                + inside[1:, 1:] * 4 + inside[1:, :-1] * 8)
        segments = []
        for r, c in zip(*np.nonzero((case != 0) & (case != 15))):
            corners = ((fx[c], fy[r]), (fx[c + 1], fy[r]),
                       (fx[c + 1], fy[r + 1]), (fx[c], fy[r + 1]))
            vals = (framed[r, c], framed[r, c + 1],
                    framed[r + 1, c + 1], framed[r + 1, c])
            segments.extend(_cell_segments(corners, vals, level))
        polylines[float(level)] = _stitch(segments)
    return ContourSet(levels=[float(v) for v in levels], polylines=polylines,
                      set_id=set_id, flags=frozenset(flags))


def set_contours(layout: ProjectionLayout, set_members: dict[str, list[str]],
                 grid_size: int = DEFAULT_GRID,
                 level_fractions: Sequence[float] = DEFAULT_LEVEL_FRACTIONS,
                 ) -> list[ContourSet]:
    """Independent per-set density contours at fractions of each field's max."""
    out = []
    for set_id in sorted(set_members):
        ids = [i for i in set_members[set_id] if i in layout]
        if not ids:
            continue
        pts = layout.coords(ids)
        dens = kde_density(pts, grid_size=grid_size)
        vmax = float(dens.grid.max())
        levels = [f * vmax for f in level_fractions]
        out.append(extract_contours(dens, levels, set_id=set_id, strict=False))
    return out
