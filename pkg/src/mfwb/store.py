"""Multi-modal embedding datasets: ingestion, persistence, and queries.

A dataset is an immutable collection of unit-normalized embedding vectors
tagged with a modality (text or image), optional labels / set membership,
and a list of named concepts pointing at text-modality points. Manifests
are JSON documents; vectors live inline or in a sidecar binary file.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateId,
    InsufficientImages,
    KTooLarge,
    MalformedManifest,
    UnknownConcept,
    UnknownId,
    ZeroVector,
)

MAGIC = b"MFWB"
BINARY_VERSION = 1
NORM_TOL = 1e-6


class Modality(str, Enum):
    TEXT = "Text"
    IMAGE = "Image"


@dataclass(eq=False)
class EmbeddingPoint:
    id: str
    modality: Modality
    vector: np.ndarray
    label: Optional[str] = None
    set_id: Optional[str] = None
    asset_uri: Optional[str] = None


@dataclass(frozen=True)
class ConceptEntry:
    name: str
    text_point_id: str


@dataclass(eq=False)
class EmbeddingDataset:
    dimension: int
    points: tuple[EmbeddingPoint, ...]
    concepts: tuple[ConceptEntry, ...] = ()
    _index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        index = {}
        for i, p in enumerate(self.points):
            if p.id in index:
                raise DuplicateId(f"duplicate point id {p.id!r}")
            if p.vector.shape != (self.dimension,):
                raise DimensionMismatch(
                    f"point {p.id!r} has dimension {p.vector.shape[0]}, "
                    f"dataset dimension is {self.dimension}"
                )
            index[p.id] = i
        object.__setattr__(self, "_index", index)
        for c in self.concepts:
            p = self.get(c.text_point_id)
            if p.modality is not Modality.TEXT:
                raise MalformedManifest(
                    f"concept {c.name!r} points at non-text point {c.text_point_id!r}"
                )

    def __len__(self) -> int:
        return len(self.points)

    def __contains__(self, point_id: str) -> bool:
        return point_id in self._index

    def get(self, point_id: str) -> EmbeddingPoint:
        try:
            return self.points[self._index[point_id]]
        except KeyError:
            raise UnknownId(f"unknown point id {point_id!r}") from None

    def ids(self) -> list[str]:
        return [p.id for p in self.points]

    def by_modality(self, modality: Modality) -> list[EmbeddingPoint]:
        return [p for p in self.points if p.modality is modality]

    def concept(self, name: str) -> ConceptEntry:
        for c in self.concepts:
            if c.name == name:
                return c
        raise UnknownConcept(f"unknown concept {name!r}")

    def matrix(self, ids: Optional[Sequence[str]] = None) -> np.ndarray:
        """Stack vectors (rows follow `ids`, or dataset order)."""
        if ids is None:
            return np.stack([p.vector for p in self.points])
        return np.stack([self.get(i).vector for i in ids])

    def with_points(self, points: Iterable[EmbeddingPoint]) -> "EmbeddingDataset":
        """New dataset version with the given point list, same concepts."""
        return EmbeddingDataset(self.dimension, tuple(points), self.concepts)

    def extended(self, new_points: Iterable[EmbeddingPoint]) -> "EmbeddingDataset":
        return self.with_points(tuple(self.points) + tuple(new_points))


def _normalize(vec: np.ndarray, point_id: str) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm < 1e-12:
        raise ZeroVector(f"point {point_id!r} has zero vector; cannot normalize")
    return vec / norm


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise MalformedManifest(msg)


def read_vector_file(path: Path) -> np.ndarray:
    """Read the MFWB binary vector format: magic, version, count, dim, f32 rows."""
    raw = path.read_bytes()
    if len(raw) < 16 or raw[:4] != MAGIC:
        raise MalformedManifest(f"{path}: not a MFWB vector file")
    version, count, dim = struct.unpack_from("<III", raw, 4)
    if version != BINARY_VERSION:
        raise MalformedManifest(f"{path}: unsupported vector file version {version}")
    expected = 16 + 4 * count * dim
    if len(raw) != expected:
        raise MalformedManifest(f"{path}: truncated vector file")
    data = np.frombuffer(raw, dtype="<f4", offset=16)
    return data.reshape(count, dim).astype(np.float64)


def write_vector_file(path: Path, rows: np.ndarray) -> None:
    rows = np.asarray(rows, dtype=np.float64)
    count, dim = rows.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", BINARY_VERSION, count, dim))
        fh.write(rows.astype("<f4").tobytes())


def parse_manifest(doc: dict, base_dir: Optional[Path] = None) -> EmbeddingDataset:
    """Build a dataset from a parsed manifest document.

    Vectors are L2-normalized on ingestion; inconsistent dimensions,
    duplicate ids, and zero vectors are rejected.
    """
    _require(isinstance(doc, dict), "manifest must be a JSON object")
    _require("dimension" in doc, "manifest missing 'dimension'")
    dimension = doc["dimension"]
    _require(isinstance(dimension, int) and dimension > 0,
             "'dimension' must be a positive integer")
    raw_points = doc.get("points")
    _require(isinstance(raw_points, list), "manifest missing 'points' list")

    vector_files: dict[str, np.ndarray] = {}

    def ref_rows(ref: dict) -> np.ndarray:
        _require(isinstance(ref, dict) and "file" in ref and "row" in ref,
                 "vector_ref must carry 'file' and 'row'")
        key = ref["file"]
        if key not in vector_files:
            path = Path(key)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            vector_files[key] = read_vector_file(path)
        return vector_files[key]

    points = []
    for raw in raw_points:
        _require(isinstance(raw, dict), "each point must be an object")
        _require("id" in raw and isinstance(raw["id"], str), "point missing string 'id'")
        pid = raw["id"]
        mod_raw = raw.get("modality")
        _require(mod_raw in (Modality.TEXT.value, Modality.IMAGE.value),
                 f"point {pid!r}: modality must be 'Text' or 'Image'")
        if "vector" in raw:
            vec_raw = raw["vector"]
            _require(isinstance(vec_raw, list), f"point {pid!r}: 'vector' must be a list")
            vec = np.asarray(vec_raw, dtype=np.float64)
        elif "vector_ref" in raw:
            rows = ref_rows(raw["vector_ref"])
            row = raw["vector_ref"]["row"]
            _require(isinstance(row, int) and 0 <= row < rows.shape[0],
                     f"point {pid!r}: vector_ref row out of range")
            vec = rows[row].copy()
        else:
            raise MalformedManifest(f"point {pid!r}: needs 'vector' or 'vector_ref'")
        if not np.all(np.isfinite(vec)):
            raise MalformedManifest(f"point {pid!r}: vector has non-finite entries")
        if vec.shape[0] != dimension:
            raise DimensionMismatch(
                f"point {pid!r} has dimension {vec.shape[0]}, expected {dimension}")
        points.append(EmbeddingPoint(
            id=pid,
            modality=Modality(mod_raw),
            vector=_normalize(vec, pid),
            label=raw.get("label"),
            set_id=raw.get("setId"),
            asset_uri=raw.get("assetUri"),
        ))

    concepts = []
    for raw in doc.get("concepts", []):
        _require(isinstance(raw, dict) and "name" in raw and "textPointId" in raw,
                 "each concept needs 'name' and 'textPointId'")
        concepts.append(ConceptEntry(raw["name"], raw["textPointId"]))

    ids = {p.id for p in points}
    for c in concepts:
        if c.text_point_id not in ids:
            raise MalformedManifest(
                f"concept {c.name!r} references unknown point {c.text_point_id!r}")
    return EmbeddingDataset(dimension, tuple(points), tuple(concepts))


def load_dataset(source: str | Path) -> EmbeddingDataset:
    """Load a dataset from a manifest file path."""
    path = Path(source)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise MalformedManifest(f"manifest not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise MalformedManifest(f"{path}: invalid JSON ({exc})") from None
    return parse_manifest(doc, base_dir=path.parent)


def dataset_to_manifest(dataset: EmbeddingDataset,
                        vector_file: Optional[str] = None) -> dict:
    """Manifest document for a dataset; inline float64 vectors by default."""
    points = []
    for row, p in enumerate(dataset.points):
        entry: dict = {"id": p.id, "modality": p.modality.value}
        if vector_file is None:
            entry["vector"] = [float(x) for x in p.vector]
        else:
            entry["vector_ref"] = {"file": vector_file, "row": row}
        if p.label is not None:
            entry["label"] = p.label
        if p.set_id is not None:
            entry["setId"] = p.set_id
        if p.asset_uri is not None:
            entry["assetUri"] = p.asset_uri
        points.append(entry)
    return {
        "dimension": dataset.dimension,
        "points": points,
        "concepts": [{"name": c.name, "textPointId": c.text_point_id}
                     for c in dataset.concepts],
    }


def save_dataset(dataset: EmbeddingDataset, path: str | Path,
                 binary_vectors: bool = False) -> None:
    """Persist a dataset as a manifest.

    Inline vectors keep full float64 precision (lossless round trip);
    `binary_vectors` writes a float32 sidecar in the MFWB format instead.
    """
    path = Path(path)
    vector_file = None
    if binary_vectors:
        vector_file = path.stem + ".bin"
        write_vector_file(path.parent / vector_file, dataset.matrix())
    doc = dataset_to_manifest(dataset, vector_file)
    path.write_text(json.dumps(doc, sort_keys=True))


def cosine_distances_to(dataset: EmbeddingDataset, query_vec: np.ndarray,
                        ids: Sequence[str]) -> np.ndarray:
    mat = dataset.matrix(ids)
    return 1.0 - mat @ query_vec


def knn_query(dataset: EmbeddingDataset, query_id: str, k: int,
              modality_filter: Optional[Modality] = None) -> list[tuple[str, float]]:
    """k nearest points to `query_id` by cosine distance.

    Ascending distance, ties broken by id; the query point is excluded.
    """
    query = dataset.get(query_id)
    eligible = [p for p in dataset.points
                if p.id != query_id
                and (modality_filter is None or p.modality is modality_filter)]
    if k < 1 or k > len(eligible):
        raise KTooLarge(f"k={k} but only {len(eligible)} eligible points")
    dists = [(1.0 - float(p.vector @ query.vector), p.id) for p in eligible]
    dists.sort()
    return [(pid, d) for d, pid in dists[:k]]


def assign_nearest_concept(dataset: EmbeddingDataset,
                           concept_names: Sequence[str],
                           point_ids: Sequence[str]) -> dict[str, str]:
    """Zero-shot assignment: each point gets the nearest concept by cosine."""
    concept_vecs = []
    for name in concept_names:
        entry = dataset.concept(name)
        concept_vecs.append((name, dataset.get(entry.text_point_id).vector))
    assignment = {}
    for pid in point_ids:
        vec = dataset.get(pid).vector
        best = min(concept_vecs, key=lambda cv: (1.0 - float(cv[1] @ vec), cv[0]))
        assignment[pid] = best[0]
    return assignment


def sample_per_concept(dataset: EmbeddingDataset, concepts: Sequence[str],
                       n: int) -> EmbeddingDataset:
    """Probe sample: union of the n images closest to each concept.

    Sampled image points are tagged (setId) with their nearest concept among
    `concepts`, so the setIds partition the sample. The concepts' text points
    ride along so the subset supports cross-modal operations.
    """
    images = dataset.by_modality(Modality.IMAGE)
    if n < 1 or n > len(images):
        raise InsufficientImages(f"requested {n} images per concept, have {len(images)}")
    selected: set[str] = set()
    text_ids = []
    for name in concepts:
        entry = dataset.concept(name)
        text_ids.append(entry.text_point_id)
        cvec = dataset.get(entry.text_point_id).vector
        ranked = sorted((1.0 - float(p.vector @ cvec), p.id) for p in images)
        selected.update(pid for _, pid in ranked[:n])
    assignment = assign_nearest_concept(dataset, concepts, sorted(selected))
    points = []
    for p in dataset.points:
        if p.id in selected:
            points.append(replace(p, set_id=assignment[p.id]))
        elif p.id in text_ids:
            points.append(p)
    kept_concepts = tuple(c for c in dataset.concepts if c.name in set(concepts))
    return EmbeddingDataset(dataset.dimension, tuple(points), kept_concepts)
