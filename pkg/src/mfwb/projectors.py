"""Single dispatch point for every projector the workbench exposes."""
from __future__ import annotations

from typing import Optional

import numpy as np

from .baselines import dcm_project, mds_project, ndcm_project, pca_project
from .errors import MfwbError
from .layout import ProjectionLayout
from .mfm import MfmConfig, train_mfm
from .store import EmbeddingDataset, Modality

PROJECTOR_IDS = ("MFM", "PCA", "MDS", "DCM", "NDCM")

# protocol rounds retrain from scratch; keep each round affordable
PROTOCOL_MFM_EPOCHS = 300


def _cosine_matrix(dataset: EmbeddingDataset) -> tuple[np.ndarray, list[str]]:
    images = dataset.by_modality(Modality.IMAGE)
    texts = dataset.by_modality(Modality.TEXT)
    ordered = images + texts
    ids = [p.id for p in ordered]
    mat = np.stack([p.vector for p in ordered])
    d = 1.0 - mat @ mat.T
    np.fill_diagonal(d, 0.0)
    return np.maximum((d + d.T) / 2.0, 0.0), ids


def run_projector(projector_id: str, dataset: EmbeddingDataset, seed: int,
                  mfm_config: Optional[MfmConfig] = None) -> ProjectionLayout:
    pid = projector_id.upper()
    if pid == "MFM":
        config = mfm_config or MfmConfig(epochs=PROTOCOL_MFM_EPOCHS)
        config = MfmConfig(**{**config.__dict__, "seed": seed})
        _, layout, _ = train_mfm(dataset, config)
        return layout
    if pid == "PCA":
        return pca_project(dataset)
    if pid == "MDS":
        d, ids = _cosine_matrix(dataset)
        return mds_project(d, seed, ids)
    if pid == "DCM":
        return dcm_project(dataset, seed)
    if pid == "NDCM":
        return ndcm_project(dataset, seed)
    raise MfwbError(f"unknown projector {projector_id!r}; "
                    f"expected one of {PROJECTOR_IDS}")
