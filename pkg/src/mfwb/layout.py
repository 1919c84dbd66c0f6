"""2D projection layouts: id -> (x, y), plus degeneracy flags."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import MissingPoint


@dataclass(eq=False)
class ProjectionLayout:
    positions: dict[str, tuple[float, float]]
    flags: frozenset[str] = field(default_factory=frozenset)

    def __len__(self) -> int:
        return len(self.positions)

    def __contains__(self, point_id: str) -> bool:
        return point_id in self.positions

    def coords(self, order: Sequence[str]) -> np.ndarray:
        """(n, 2) array in the given id order."""
        missing = [i for i in order if i not in self.positions]
        if missing:
            raise MissingPoint(f"layout missing ids {missing[:5]!r}")
        return np.array([self.positions[i] for i in order], dtype=np.float64)

    def diameter(self) -> float:
        pts = np.array(list(self.positions.values()), dtype=np.float64)
        if len(pts) < 2:
            return 0.0
        span = pts.max(axis=0) - pts.min(axis=0)
        return float(np.hypot(span[0], span[1]))

    def to_json(self) -> dict:
        return {
            "positions": {i: [float(x), float(y)]
                          for i, (x, y) in self.positions.items()},
            "flags": sorted(self.flags),
        }

    @classmethod
    def from_coords(cls, order: Iterable[str], coords: np.ndarray,
                    flags: Iterable[str] = ()) -> "ProjectionLayout":
        coords = np.asarray(coords, dtype=np.float64)
        positions = {pid: (float(coords[i, 0]), float(coords[i, 1]))
                     for i, pid in enumerate(order)}
        return cls(positions, frozenset(flags))

    @classmethod
    def from_json(cls, doc: Mapping) -> "ProjectionLayout":
        positions = {i: (float(x), float(y))
                     for i, (x, y) in doc["positions"].items()}
        return cls(positions, frozenset(doc.get("flags", ())))
