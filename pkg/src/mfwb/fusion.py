"""Cosine distances and the mean-normalized merged distance matrix.

The merged matrix stacks the image-image, image-text, and text-text cosine
distance blocks into one symmetric matrix, with each block divided by its
mean so intra- and cross-modal scales become commensurate. Square blocks
use the off-diagonal mean (the diagonal is structurally zero); the cross
block uses the mean over all entries.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMeanWarning, TooFewPoints
from .layout import ProjectionLayout
from .store import EmbeddingDataset, Modality

DEGENERATE_MEAN = 1e-9


def cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    """1 - <u, v> for unit vectors; range [0, 2]."""
    return 1.0 - float(np.dot(u, v))


def pairwise_cosine(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    # clamp tiny negative float noise; true range on unit vectors is [0, 2]
    return np.maximum(1.0 - rows @ cols.T, 0.0)


def _self_cosine(mat: np.ndarray) -> np.ndarray:
    d = 1.0 - mat @ mat.T
    np.fill_diagonal(d, 0.0)
    # symmetrize away float asymmetry from the matmul
    d = (d + d.T) / 2.0
    return np.maximum(d, 0.0)


@dataclass(eq=False)
class MergedDistanceMatrix:
    n_image: int
    n_text: int
    ii: np.ndarray            # (n_image, n_image), normalized
    tt: np.ndarray            # (n_text, n_text), normalized
    it: np.ndarray            # (n_image, n_text), normalized; TI = IT.T
    means: dict[str, float]   # pre-normalization divisors actually applied
    order: tuple[str, ...]    # image ids then text ids

    @property
    def n_total(self) -> int:
        return self.n_image + self.n_text

    def full(self) -> np.ndarray:
        """Assemble [[II, IT], [TI, TT]]."""
        top = np.hstack([self.ii, self.it])
        bottom = np.hstack([self.it.T, self.tt])
        return np.vstack([top, bottom])

    @property
    def ti(self) -> np.ndarray:
        return self.it.T

    def modalities(self) -> np.ndarray:
        """Per-row modality tags aligned with `order` (True = image)."""
        return np.array([True] * self.n_image + [False] * self.n_text)


def _offdiag_mean(mat: np.ndarray) -> float:
    n = mat.shape[0]
    if n < 2:
        return 0.0
    total = float(mat.sum())  # diagonal is zero
    return total / (n * (n - 1))


def _normalize_block(block: np.ndarray, mean: float, name: str) -> tuple[np.ndarray, float]:
    if mean < DEGENERATE_MEAN:
        warnings.warn(f"{name} submatrix mean ~0; left unnormalized",
                      DegenerateMeanWarning)
        return block, 1.0
    return block / mean, mean


def build_merged_matrix(dataset: EmbeddingDataset) -> MergedDistanceMatrix:
    """Pairwise cosine distances per block, each divided by its mean."""
    images = dataset.by_modality(Modality.IMAGE)
    texts = dataset.by_modality(Modality.TEXT)
    if len(images) < 2 or len(texts) < 2:
        raise TooFewPoints(
            f"need at least 2 points per modality, have {len(images)} image / "
            f"{len(texts)} text")
    img_mat = np.stack([p.vector for p in images])
    txt_mat = np.stack([p.vector for p in texts])

    ii = _self_cosine(img_mat)
    tt = _self_cosine(txt_mat)
    it = pairwise_cosine(img_mat, txt_mat)

    ii, mean_ii = _normalize_block(ii, _offdiag_mean(ii), "II")
    tt, mean_tt = _normalize_block(tt, _offdiag_mean(tt), "TT")
    it, mean_it = _normalize_block(it, float(it.mean()), "IT")

    order = tuple(p.id for p in images) + tuple(p.id for p in texts)
    return MergedDistanceMatrix(
        n_image=len(images), n_text=len(texts),
        ii=ii, tt=tt, it=it,
        means={"meanII": mean_ii, "meanTT": mean_tt, "meanIT": mean_it},
        order=order,
    )


def pairwise_projected_distances(layout: ProjectionLayout,
                                 order: tuple[str, ...] | list[str]) -> np.ndarray:
    """Euclidean distances between 2D coordinates in merged-matrix order."""
    coords = layout.coords(order)
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=-1))


def matrix_export_doc(merged: MergedDistanceMatrix, vector_file: str) -> dict:
    """JSON header naming the blocks of the exported full matrix."""
    n_i, n_t = merged.n_image, merged.n_text
    return {
        "vector_ref": {"file": vector_file},
        "shape": [n_i + n_t, n_i + n_t],
        "blocks": {
            "II": {"rows": [0, n_i], "cols": [0, n_i]},
            "IT": {"rows": [0, n_i], "cols": [n_i, n_i + n_t]},
            "TI": {"rows": [n_i, n_i + n_t], "cols": [0, n_i]},
            "TT": {"rows": [n_i, n_i + n_t], "cols": [n_i, n_i + n_t]},
        },
        "means": merged.means,
        "order": list(merged.order),
    }
