"""Concept axes: 1D layouts of image points by similarity to concept texts.

A one-end axis min-max-normalizes cosine similarity to a single concept
over the displayed cohort; a two-end axis contrasts two concepts. Each
axis carries per-set mean boxes, a fixed-bin histogram, and, for adjacent
axis pairs, per-instance links.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateCohortWarning, MfwbError
from .store import EmbeddingDataset, Modality


@dataclass(frozen=True)
class ConceptAxisSpec:
    concept_a: str
    concept_b: Optional[str] = None  # two-end when present
    length: float = 100.0

    def __post_init__(self):
        if self.length <= 0:
            raise MfwbError("axis length must be positive")
        if self.concept_b is not None and self.concept_b == self.concept_a:
            raise MfwbError("two-end axis needs two distinct concepts")

    @property
    def kind(self) -> str:
        return "one-end" if self.concept_b is None else "two-end"


@dataclass(eq=False)
class ConceptAxisLayout:
    spec: ConceptAxisSpec
    positions: dict[str, float]
    set_boxes: dict[str, float]
    histogram: list[int]
    pair_links: list[tuple[str, float, float]] = field(default_factory=list)
    flags: frozenset[str] = field(default_factory=frozenset)

    def to_json(self) -> dict:
        return {
            "kind": self.spec.kind,
            "concepts": [c for c in (self.spec.concept_a, self.spec.concept_b)
                         if c is not None],
            "length": self.spec.length,
            "positions": {k: float(v) for k, v in self.positions.items()},
            "setBoxes": {k: float(v) for k, v in self.set_boxes.items()},
            "histogram": self.histogram,
            "pairLinks": [[pid, p1, p2] for pid, p1, p2 in self.pair_links],
            "flags": sorted(self.flags),
        }


def _cohort_similarities(dataset: EmbeddingDataset, concept: str,
                         cohort_ids: Sequence[str]) -> np.ndarray:
    entry = dataset.concept(concept)
    cvec = dataset.get(entry.text_point_id).vector
    return np.array([float(dataset.get(i).vector @ cvec) for i in cohort_ids])


def _one_end_scaled(sims: np.ndarray, length: float) -> tuple[np.ndarray, bool]:
    lo, hi = float(sims.min()), float(sims.max())
    if hi - lo < 1e-15:
        warnings.warn("cohort has no similarity spread; axis positions "
                      "collapse to the midpoint", DegenerateCohortWarning)
        return np.full(len(sims), length / 2.0), True
    return length * (sims - lo) / (hi - lo), False


def one_end_position(dataset: EmbeddingDataset, point_id: str,
                     spec: ConceptAxisSpec, cohort_ids: Sequence[str]) -> float:
    """Min-max normalized similarity to the concept, scaled to the axis."""
    sims = _cohort_similarities(dataset, spec.concept_a, cohort_ids)
    scaled, _ = _one_end_scaled(sims, spec.length)
    idx = list(cohort_ids).index(point_id)
    return float(scaled[idx])


def _two_end_scaled(mu_a: np.ndarray, mu_b: np.ndarray, length: float,
                    ) -> tuple[np.ndarray, bool]:
    total = mu_a + mu_b
    degenerate = total <= 1e-15
    safe_total = np.where(degenerate, 1.0, total)
    pos = length * (0.5 + 0.5 * (mu_a - mu_b) / safe_total)
    pos = np.where(degenerate, length / 2.0, pos)
    return pos, bool(degenerate.any())


def two_end_position(dataset: EmbeddingDataset, point_id: str,
                     spec: ConceptAxisSpec, cohort_ids: Sequence[str]) -> float:
    """Contrast position between the two concept ends, in [0, length]."""
    if spec.concept_b is None:
        raise MfwbError("two_end_position needs a two-end axis spec")
    sims_a = _cohort_similarities(dataset, spec.concept_a, cohort_ids)
    sims_b = _cohort_similarities(dataset, spec.concept_b, cohort_ids)
    mu_a, _ = _one_end_scaled(sims_a, spec.length)
    mu_b, _ = _one_end_scaled(sims_b, spec.length)
    pos, degenerate = _two_end_scaled(mu_a, mu_b, spec.length)
    if degenerate:
        warnings.warn("a point has zero pull toward both ends; placed at "
                      "the midpoint", DegenerateCohortWarning)
    idx = list(cohort_ids).index(point_id)
    return float(pos[idx])


def _histogram(positions: np.ndarray, length: float, bins: int) -> list[int]:
    """Left-closed bins over [0, length]; the final bin is right-closed."""
    idx = np.floor(positions * bins / length).astype(int)
    idx = np.clip(idx, 0, bins - 1)
    counts = np.bincount(idx, minlength=bins)
    return [int(c) for c in counts]


def axis_layout(dataset: EmbeddingDataset, specs: Sequence[ConceptAxisSpec],
                bins: int = 20) -> list[ConceptAxisLayout]:
    """Positions, set boxes, and histograms for each axis over the
    dataset's image points (the displayed cohort)."""
    cohort = [p.id for p in dataset.by_modality(Modality.IMAGE)]
    if not cohort:
        raise MfwbError("no image points to lay out")
    layouts = []
    for spec in specs:
        flags: set[str] = set()
        sims_a = _cohort_similarities(dataset, spec.concept_a, cohort)
        if spec.concept_b is None:
            pos, degen = _one_end_scaled(sims_a, spec.length)
            if degen:
                flags.add("degenerate_cohort")
        else:
            sims_b = _cohort_similarities(dataset, spec.concept_b, cohort)
            mu_a, da = _one_end_scaled(sims_a, spec.length)
            mu_b, db = _one_end_scaled(sims_b, spec.length)
            pos, dz = _two_end_scaled(mu_a, mu_b, spec.length)
            if da or db:
                flags.add("degenerate_cohort")
            if dz:
                flags.add("degenerate_midpoint")
        positions = {pid: float(pos[i]) for i, pid in enumerate(cohort)}
        boxes: dict[str, list[float]] = {}
        for pid in cohort:
            sid = dataset.get(pid).set_id
            if sid is not None:
                boxes.setdefault(sid, []).append(positions[pid])
        set_boxes = {sid: float(np.mean(vals)) for sid, vals in sorted(boxes.items())}
        layouts.append(ConceptAxisLayout(
            spec=spec, positions=positions, set_boxes=set_boxes,
            histogram=_histogram(pos, spec.length, bins), flags=frozenset(flags)))
    for left, right in zip(layouts, layouts[1:]):
        shared = sorted(set(left.positions) & set(right.positions))
        right.pair_links = [(pid, left.positions[pid], right.positions[pid])
                            for pid in shared]
    return layouts
