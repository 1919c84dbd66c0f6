"""Modal fusion workbench: probing and steering of multi-modal embeddings."""

from .store import (
    ConceptEntry,
    EmbeddingDataset,
    EmbeddingPoint,
    Modality,
    knn_query,
    load_dataset,
    sample_per_concept,
    save_dataset,
)
from .fusion import MergedDistanceMatrix, build_merged_matrix, cosine_distance, \
    pairwise_projected_distances
from .layout import ProjectionLayout
from .mfm import MfmConfig, ProjectionModel, forward, gradient_check, \
    ordinal_loss, pearson_loss, total_loss, train_mfm
from .baselines import dcm_project, mds_project, ndcm_project, pca_project
from .quality import QualityReport, continuity, evaluate_protocol, \
    trustworthiness, zscore_outliers
from .axis import ConceptAxisLayout, ConceptAxisSpec, axis_layout, \
    one_end_position, two_end_position
from .density import ContourSet, DensityField, extract_contours, kde_density
from .alignment import AdapterConfig, AdapterModel, AlignmentDirective, \
    TripletBatch, apply_adapter, build_triplets, rerank, train_adapter, \
    verify_alignment, weighted_embedding
from .synth import synth_benchmark

__version__ = "0.1.0"
