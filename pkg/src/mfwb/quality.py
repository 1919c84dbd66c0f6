"""Projection fidelity metrics and the round-based evaluation protocol.

Trustworthiness penalizes intruders in projected k-neighborhoods;
continuity penalizes original neighbors missing from them. Both are
rank-based, in [0, 1], and support restricting each point's candidate
neighbors (same- or opposite-modality variants).

References
----------
Venna & Kaski, Neighborhood preservation in nonlinear projection
methods: an experimental study (2001).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import KTooLarge, NormalizerNonpositive, SetTooSmall
from .layout import ProjectionLayout
from .store import EmbeddingDataset, Modality

__all__ = [
    "trustworthiness", "continuity", "zscore_outliers",
    "evaluate_protocol", "QualityReport", "modal_quality",
]


def _neighbor_order(dist_row: np.ndarray, cand: np.ndarray,
                    tiebreak: np.ndarray) -> np.ndarray:
    """Candidate indices sorted by (distance, tiebreak key)."""
    keys = np.lexsort((tiebreak[cand], dist_row[cand]))
    return cand[keys]


def trustworthiness(d_high: np.ndarray, d_low: np.ndarray, k: int,
                    candidates: Optional[np.ndarray] = None,
                    include: Optional[np.ndarray] = None,
                    tiebreak: Optional[np.ndarray] = None) -> float:
    """T(k) = 1 - sum of excess original ranks of projected-neighborhood
    intruders, normalized by the worst case.

    Parameters
    ----------
    d_high, d_low : (N, N) distance matrices over the same point order.
    k : neighborhood size; must leave `2n - 3k + 1 > 0` for every scored
        point with n candidate neighbors (else the normalizer is undefined).
    candidates : optional (N, N) bool mask of allowed neighbors per row;
        defaults to everything but self.
    include : optional (N,) bool mask of points to score (all by default).
    tiebreak : optional (N,) sort keys applied after distance; defaults to
        index order. Applied identically in both spaces.
    """
    d_high = np.asarray(d_high, dtype=np.float64)
    d_low = np.asarray(d_low, dtype=np.float64)
    n = d_high.shape[0]
    if d_high.shape != (n, n) or d_low.shape != (n, n):
        raise ValueError("distance matrices must be square and same shape")
    if candidates is None:
        candidates = ~np.eye(n, dtype=bool)
    if include is None:
        include = np.ones(n, dtype=bool)
    if tiebreak is None:
        tiebreak = np.arange(n)

    penalty = 0.0
    normalizer = 0.0
    for i in np.flatnonzero(include):
        cand = np.flatnonzero(candidates[i])
        n_i = len(cand)
        if k >= n_i:
            raise KTooLarge(f"k={k} but point {i} has only {n_i} candidates")
        worst = 2 * n_i - 3 * k + 1
        if worst <= 0:
            raise NormalizerNonpositive(
                f"k={k} undefined for candidate count {n_i} (2n-3k+1 <= 0)")
        order_high = _neighbor_order(d_high[i], cand, tiebreak)
        order_low = _neighbor_order(d_low[i], cand, tiebreak)
        rank_high = {j: r + 1 for r, j in enumerate(order_high)}
        knn_high = set(order_high[:k].tolist())
        for j in order_low[:k]:
            if int(j) not in knn_high:
                penalty += rank_high[int(j)] - k
        normalizer += k * worst / 2.0
    if normalizer == 0.0:
        raise NormalizerNonpositive("no points scored")
    return 1.0 - penalty / normalizer


def continuity(d_high: np.ndarray, d_low: np.ndarray, k: int,
               candidates: Optional[np.ndarray] = None,
               include: Optional[np.ndarray] = None,
               tiebreak: Optional[np.ndarray] = None) -> float:
    """Dual of trustworthiness: the two spaces exchange roles."""
    return trustworthiness(d_low, d_high, k,
                           candidates=candidates, include=include,
                           tiebreak=tiebreak)


def zscore_outliers(dataset: EmbeddingDataset, set_id: str) -> dict[str, float]:
    """Within-set outlier scores.

    For each member, take its mean cosine distance to the other members;
    z-scores standardize those means (population std). All-equal means
    give all-zero scores.
    """
    members = [p for p in dataset.points if p.set_id == set_id]
    if len(members) < 3:
        raise SetTooSmall(f"set {set_id!r} has {len(members)} members, need >= 3")
    mat = np.stack([p.vector for p in members])
    d = 1.0 - mat @ mat.T
    np.fill_diagonal(d, 0.0)
    m = d.sum(axis=1) / (len(members) - 1)
    std = float(m.std())  # population std
    if std < 1e-15:
        z = np.zeros(len(members))
    else:
        z = (m - m.mean()) / std
    return {p.id: float(z[i]) for i, p in enumerate(members)}


# -- modality-filtered metric bundles ----------------------------------------


def _feasible_rows(candidate_counts: np.ndarray, k: int) -> np.ndarray:
    return (candidate_counts > k) & (2 * candidate_counts - 3 * k + 1 > 0)


def modal_populations(is_image: np.ndarray, k: int, mode: str) -> tuple[np.ndarray, np.ndarray, str]:
    """Candidate mask and scored-point mask for one metric variant.

    This is the single place that decides which points the inter-/intra-
    modal metrics average over. `mode` is "inter" or "intra"; the scored
    population is every point whose candidate pool supports k, so datasets
    with a tiny modality (e.g. a handful of concept texts) are scored over
    the feasible side only. The returned tag names that population.
    """
    n = len(is_image)
    if mode == "inter":
        candidates = is_image[None, :] != is_image[:, None]
    elif mode == "intra":
        candidates = (is_image[None, :] == is_image[:, None]) & ~np.eye(n, dtype=bool)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    counts = candidates.sum(axis=1)
    include = _feasible_rows(counts, k)
    if not include.any():
        raise NormalizerNonpositive(f"{mode}-modal metric undefined at k={k}")
    img_in = bool((include & is_image).any())
    txt_in = bool((include & ~is_image).any())
    tag = "both" if (img_in and txt_in) else ("image" if img_in else "text")
    return candidates, include, tag


def modal_quality(d_high: np.ndarray, d_low: np.ndarray,
                  is_image: np.ndarray, k: int,
                  tiebreak: Optional[np.ndarray] = None) -> dict[str, float | str]:
    """All four metrics (inter/intra x trust/continuity) for one layout."""
    out: dict[str, float | str] = {}
    for mode, t_key, c_key, pop_key in (
            ("inter", "interTrust", "interCont", "interPopulation"),
            ("intra", "intraTrust", "intraCont", "intraPopulation")):
        cand, include, tag = modal_populations(is_image, k, mode)
        out[t_key] = trustworthiness(d_high, d_low, k, cand, include, tiebreak)
        out[c_key] = continuity(d_high, d_low, k, cand, include, tiebreak)
        out[pop_key] = tag
    return out


# -- round-based protocol -----------------------------------------------------


@dataclass
class QualityReport:
    k: int
    inter_trust: float
    inter_cont: float
    intra_trust: float
    intra_cont: float
    rounds: int
    populations: dict[str, str] = field(default_factory=dict)
    per_round: Optional[list[dict]] = None

    def to_json(self) -> dict:
        doc = {
            "k": self.k,
            "interTrust": self.inter_trust,
            "interCont": self.inter_cont,
            "intraTrust": self.intra_trust,
            "intraCont": self.intra_cont,
            "rounds": self.rounds,
            "populations": self.populations,
        }
        if self.per_round is not None:
            doc["perRound"] = self.per_round
        return doc

    def table(self, name: str = "") -> str:
        """Aligned plain-text table, one row per method."""
        header = (f"{'':12s}  {'Inter-modal':>17s}  {'Intra-modal':>17s}\n"
                  f"{'':12s}  {f'T({self.k})':>8s} {f'C({self.k})':>8s}  "
                  f"{f'T({self.k})':>8s} {f'C({self.k})':>8s}")
        row = (f"{name:12s}  {self.inter_trust:8.4f} {self.inter_cont:8.4f}  "
               f"{self.intra_trust:8.4f} {self.intra_cont:8.4f}")
        return header + "\n" + row


def _round_seeds(seed: int, rounds: int) -> list[int]:
    children = np.random.SeedSequence(seed).spawn(rounds)
    return [int(c.generate_state(1, dtype=np.uint64)[0] % (2 ** 63)) for c in children]


def subset_for_round(dataset: EmbeddingDataset, sample_size: int,
                     rng: np.random.Generator) -> EmbeddingDataset:
    """Sampled images plus every concept text point, as a new dataset."""
    image_ids = [p.id for p in dataset.by_modality(Modality.IMAGE)]
    if sample_size > len(image_ids):
        raise KTooLarge(f"sample size {sample_size} > {len(image_ids)} images")
    picked = rng.choice(len(image_ids), size=sample_size, replace=False)
    keep = {image_ids[i] for i in picked}
    keep.update(c.text_point_id for c in dataset.concepts)
    points = tuple(p for p in dataset.points if p.id in keep)
    return EmbeddingDataset(dataset.dimension, points, dataset.concepts)


def dataset_distance_matrices(dataset: EmbeddingDataset,
                              layout: ProjectionLayout) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(d_high, d_low, is_image, tiebreak) in image-then-text order."""
    images = dataset.by_modality(Modality.IMAGE)
    texts = dataset.by_modality(Modality.TEXT)
    ordered = images + texts
    ids = [p.id for p in ordered]
    mat = np.stack([p.vector for p in ordered])
    d_high = 1.0 - mat @ mat.T
    np.fill_diagonal(d_high, 0.0)
    coords = layout.coords(ids)
    diff = coords[:, None, :] - coords[None, :, :]
    d_low = np.sqrt((diff ** 2).sum(axis=-1))
    is_image = np.array([p.modality is Modality.IMAGE for p in ordered])
    order_ids = sorted(range(len(ids)), key=lambda i: ids[i])
    tiebreak = np.empty(len(ids), dtype=np.int64)
    for rank, i in enumerate(order_ids):
        tiebreak[i] = rank
    return d_high, d_low, is_image, tiebreak


def evaluate_protocol(dataset: EmbeddingDataset, projector_id: str,
                      rounds: int, sample_size: int, k: int, seed: int,
                      run_projector: Optional[Callable] = None,
                      keep_rounds: bool = True) -> QualityReport:
    """Average the four metrics over seeded rounds.

    Each round samples `sample_size` images (without replacement), adds all
    concept text points, projects with the requested method, and scores the
    layout. `run_projector(projector_id, dataset, seed)` defaults to the
    built-in dispatch; rounds are independent and their seeds derive from
    the master seed.
    """
    if run_projector is None:
        from .projectors import run_projector as run_projector  # avoid cycle
    per_round = []
    sums = {m: 0.0 for m in ("interTrust", "interCont", "intraTrust", "intraCont")}
    populations: dict[str, str] = {}
    for round_seed in _round_seeds(seed, rounds):
        rng = np.random.Generator(np.random.PCG64(round_seed))
        subset = subset_for_round(dataset, sample_size, rng)
        layout = run_projector(projector_id, subset, round_seed)
        d_high, d_low, is_image, tiebreak = dataset_distance_matrices(subset, layout)
        metrics = modal_quality(d_high, d_low, is_image, k, tiebreak)
        populations = {"inter": str(metrics.pop("interPopulation")),
                       "intra": str(metrics.pop("intraPopulation"))}
        per_round.append({m: float(v) for m, v in metrics.items()})
        for m in sums:
            sums[m] += float(metrics[m])
    return QualityReport(
        k=k,
        inter_trust=sums["interTrust"] / rounds,
        inter_cont=sums["interCont"] / rounds,
        intra_trust=sums["intraTrust"] / rounds,
        intra_cont=sums["intraCont"] / rounds,
        rounds=rounds,
        populations=populations,
        per_round=per_round if keep_rounds else None,
    )
