"""Reference projectors: PCA, metric MDS (SMACOF), and fusion baselines.

The fusion baselines project the merged distance matrix directly:
DCM runs metric SMACOF on it, NDCM alternates SMACOF steps with an
isotonic (pool-adjacent-violators) fit so only the rank order of the
merged distances constrains the layout.
"""
from __future__ import annotations

import warnings
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import isotonic_regression

from .errors import InvalidDistanceMatrix, RankDeficientWarning, TooFewPoints
from .fusion import build_merged_matrix
from .layout import ProjectionLayout
from .store import EmbeddingDataset

STRESS_REL_TOL = 1e-7
MAX_ITER = 512


def pca_project(dataset: EmbeddingDataset) -> ProjectionLayout:
    """Top-2 principal components of the mean-centered vectors.

    Component signs are fixed so each component's largest-magnitude loading
    is positive. With fewer than 2 informative directions the missing
    coordinates are zero and the layout carries a `rank_deficient` flag.
    """
    if len(dataset) < 3:
        raise TooFewPoints(f"PCA needs >= 3 points, have {len(dataset)}")
    x = dataset.matrix()
    centered = x - x.mean(axis=0)
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    tol = max(centered.shape) * np.finfo(np.float64).eps * (s[0] if s.size else 0.0)
    n_effective = int((s > tol).sum())
    coords = np.zeros((len(dataset), 2))
    flags = []
    for c in range(min(2, n_effective)):
        component = vt[c]
        if component[np.argmax(np.abs(component))] < 0:
            component = -component
        coords[:, c] = centered @ component
    if n_effective < 2:
        warnings.warn("fewer than 2 informative directions; projection is "
                      "rank deficient", RankDeficientWarning)
        flags.append("rank_deficient")
    return ProjectionLayout.from_coords(dataset.ids(), coords, flags)


def _check_distance_matrix(d: np.ndarray) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64)
    n = d.shape[0]
    if d.ndim != 2 or d.shape != (n, n):
        raise InvalidDistanceMatrix("distance matrix must be square")
    if not np.allclose(d, d.T, atol=1e-9):
        raise InvalidDistanceMatrix("distance matrix must be symmetric")
    if np.abs(np.diag(d)).max(initial=0.0) > 1e-12:
        raise InvalidDistanceMatrix("distance matrix must have zero diagonal")
    if d.min() < 0:
        raise InvalidDistanceMatrix("distance matrix must be non-negative")
    return (d + d.T) / 2.0


def _pdist(x: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - x[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=-1))


def _raw_stress(target: np.ndarray, p: np.ndarray, iu: tuple) -> float:
    return float(((target[iu] - p[iu]) ** 2).sum())


def _guttman_step(target: np.ndarray, x: np.ndarray, p: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(p > 0, target / np.where(p > 0, p, 1.0), 0.0)
    b = -ratio
    np.fill_diagonal(b, 0.0)
    np.fill_diagonal(b, -b.sum(axis=1))
    return b @ x / n


def smacof(distances: np.ndarray, seed: int,
           max_iter: int = MAX_ITER, rel_tol: float = STRESS_REL_TOL,
           disparity_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
           ) -> tuple[np.ndarray, list[float]]:
    """Iterative stress majorization from a seeded random start.

    Returns the (n, 2) configuration and the per-iteration stress trace
    (raw stress against the active targets, evaluated before each update).
    `disparity_fn`, when given, maps the current projected distances
    (upper-triangle vector) to the targets for the next step - the
    non-metric hook. Without it the targets are the input distances.
    """
    d = _check_distance_matrix(distances)
    n = d.shape[0]
    iu = np.triu_indices(n, 1)
    rng = np.random.Generator(np.random.PCG64(seed))
    scale = d.max() if d.max() > 0 else 1.0
    x = rng.standard_normal((n, 2)) * scale / max(n, 2) ** 0.5

    stresses: list[float] = []
    target = d
    prev = None
    for _ in range(max_iter):
        p = _pdist(x)
        if disparity_fn is not None:
            flat = disparity_fn(p[iu])
            target = np.zeros_like(d)
            target[iu] = flat
            target = target + target.T
        stress = _raw_stress(target, p, iu)
        stresses.append(stress)
        if prev is not None:
            if prev <= 0.0 or (prev - stress) < rel_tol * prev:
                break
        prev = stress
        x = _guttman_step(target, x, p)
    return x, stresses


def mds_project(distances: np.ndarray, seed: int,
                ids: Optional[Sequence[str]] = None) -> ProjectionLayout:
    """Metric MDS: minimize raw stress toward the given distances."""
    x, _ = smacof(distances, seed)
    if ids is None:
        ids = [str(i) for i in range(x.shape[0])]
    return ProjectionLayout.from_coords(ids, x)


def dcm_project(dataset: EmbeddingDataset, seed: int = 0) -> ProjectionLayout:
    """Metric SMACOF on the merged distance matrix (all blocks weighted equally)."""
    merged = build_merged_matrix(dataset)
    x, _ = smacof(merged.full(), seed)
    return ProjectionLayout.from_coords(merged.order, x)


def isotonic_fit(order: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Pool-adjacent-violators: best non-decreasing fit of values[order],
    returned in original positions."""
    y = values[order].astype(np.float64)
    fitted_sorted = isotonic_regression(y).x
    fitted = np.empty(len(y))
    fitted[order] = fitted_sorted
    return fitted


def ndcm_project(dataset: EmbeddingDataset, seed: int = 0,
                 monotone_fit: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                 ) -> ProjectionLayout:
    """Non-metric fusion: SMACOF whose targets are re-fit each iteration.

    The targets are the isotonic regression of the current projected
    distances onto the rank order of the merged matrix's off-diagonal
    entries, rescaled to the merged targets' norm, so only rank order
    constrains the layout while its scale stays pinned. `monotone_fit`
    overrides the whole disparity computation (testing hook).
    """
    merged = build_merged_matrix(dataset)
    m = merged.full()
    iu = np.triu_indices(m.shape[0], 1)
    flat_m = m[iu]
    order = np.lexsort((np.arange(len(flat_m)), flat_m))
    target_norm = np.linalg.norm(flat_m)

    def disparities(p_flat: np.ndarray) -> np.ndarray:
        fitted = isotonic_fit(order, p_flat)
        norm_fit = np.linalg.norm(fitted)
        if norm_fit == 0.0:
            return p_flat
        # pin the disparity norm so the layout cannot contract toward zero
        return fitted * (target_norm / norm_fit)

    x, _ = smacof(m, seed, disparity_fn=monotone_fit or disparities)
    return ProjectionLayout.from_coords(merged.order, x)
