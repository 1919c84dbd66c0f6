"""Steering directives, triplet-based adapter fine-tuning, and re-ranking.

A directive captures a drag intent: pull a point toward a set (away from
the others), or move one set closer to / farther from another. Directives
compile to triplet batches; a small adapter on top of the frozen
embeddings is trained with hinge loss until the intent's mean-distance
inequality holds. Adapted vectors are re-normalized to the unit sphere,
so every downstream distance stays cosine.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch

from .errors import (
    DegenerateDirective,
    DimensionMismatch,
    EmptySet,
    MfwbError,
    NonFiniteLoss,
    UnknownId,
    ZeroResultant,
)
from .store import MAGIC, BINARY_VERSION, EmbeddingDataset, Modality

NEIGHBORHOOD_SIZE = 10  # per-anchor context pool for set-set objectives


@dataclass(frozen=True)
class AlignmentDirective:
    kind: str                                  # "point-set" | "set-set"
    point_id: Optional[str] = None
    target_set_id: Optional[str] = None
    repelled_set_ids: Optional[tuple[str, ...]] = None
    source_set_id: Optional[str] = None
    reference_set_id: Optional[str] = None
    direction: Optional[str] = None            # "closer" | "farther"
    origin_view: str = "projection"            # metadata only

    @classmethod
    def point_set(cls, point_id: str, target_set_id: str,
                  repelled_set_ids: Optional[Sequence[str]] = None,
                  origin_view: str = "projection") -> "AlignmentDirective":
        return cls(kind="point-set", point_id=point_id,
                   target_set_id=target_set_id,
                   repelled_set_ids=tuple(repelled_set_ids) if repelled_set_ids else None,
                   origin_view=origin_view)

    @classmethod
    def set_set(cls, source_set_id: str, reference_set_id: str,
                direction: str, origin_view: str = "projection") -> "AlignmentDirective":
        if direction not in ("closer", "farther"):
            raise MfwbError(f"direction must be 'closer' or 'farther', got {direction!r}")
        if source_set_id == reference_set_id:
            raise DegenerateDirective("source and reference sets must differ")
        return cls(kind="set-set", source_set_id=source_set_id,
                   reference_set_id=reference_set_id, direction=direction,
                   origin_view=origin_view)

    def to_json(self) -> dict:
        if self.kind == "point-set":
            doc = {"type": "point-set", "pointId": self.point_id,
                   "targetSetId": self.target_set_id}
            if self.repelled_set_ids:
                doc["repelledSetIds"] = list(self.repelled_set_ids)
        else:
            doc = {"type": "set-set", "sourceSetId": self.source_set_id,
                   "referenceSetId": self.reference_set_id,
                   "direction": self.direction}
        doc["originView"] = self.origin_view
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "AlignmentDirective":
        kind = doc.get("type")
        view = doc.get("originView", "projection")
        if kind == "point-set":
            return cls.point_set(doc["pointId"], doc["targetSetId"],
                                 doc.get("repelledSetIds"), view)
        if kind == "set-set":
            return cls.set_set(doc["sourceSetId"], doc["referenceSetId"],
                               doc["direction"], view)
        raise MfwbError(f"unknown directive type {kind!r}")


@dataclass
class TripletBatch:
    triplets: list[tuple[str, str, str]]   # (anchor, positive, negative)
    margin: float = 0.2


@dataclass
class AdapterConfig:
    epochs: int = 200
    learning_rate: float = 1e-3
    margin: float = 0.2
    max_triplets: int = 256
    seed: int = 0
    hidden: Optional[int] = None  # residual tanh layer width, linear when None


@dataclass(eq=False)
class AdapterModel:
    """Map applied to every embedding, identity at initialization.

    Linear mode is a single d x d affine map started at the identity;
    `hidden` adds a residual tanh branch whose output layer starts at
    zero, so the initial model is still an exact no-op. Outputs are
    re-normalized to unit norm when applied.
    """
    dimension: int
    weights: list[np.ndarray]
    hidden: Optional[int] = None
    train_config: dict = field(default_factory=dict)

    @classmethod
    def identity(cls, dimension: int, hidden: Optional[int] = None) -> "AdapterModel":
        weights = [np.eye(dimension), np.zeros(dimension)]
        if hidden is not None:
            rng = np.random.Generator(np.random.PCG64(0))
            weights += [rng.uniform(-1, 1, (hidden, dimension)) / np.sqrt(dimension),
                        np.zeros(hidden),
                        np.zeros((dimension, hidden))]
        return cls(dimension, weights, hidden)

    def raw_apply(self, x: np.ndarray) -> np.ndarray:
        w, b = self.weights[0], self.weights[1]
        out = x @ w.T + b
        if self.hidden is not None:
            wh, bh, wo = self.weights[2:]
            out = out + np.tanh(x @ wh.T + bh) @ wo.T
        return out

    def apply(self, x: np.ndarray) -> np.ndarray:
        out = self.raw_apply(x)
        norms = np.linalg.norm(out, axis=-1, keepdims=True)
        if np.any(norms < 1e-12):
            raise ZeroResultant("adapter collapsed a vector to zero")
        return out / norms


def _set_members(dataset: EmbeddingDataset, set_id: str) -> list[str]:
    members = [p.id for p in dataset.points if p.set_id == set_id]
    if not members:
        raise EmptySet(f"set {set_id!r} has no members")
    return members


def _all_set_ids(dataset: EmbeddingDataset) -> list[str]:
    return sorted({p.set_id for p in dataset.points if p.set_id is not None})


def _nearest_outside(dataset: EmbeddingDataset, anchor_id: str,
                     excluded: set[str], count: int) -> list[str]:
    anchor = dataset.get(anchor_id)
    ranked = sorted(
        (1.0 - float(p.vector @ anchor.vector), p.id)
        for p in dataset.points
        if p.id != anchor_id and p.id not in excluded)
    return [pid for _, pid in ranked[:count]]


def build_triplets(directive: AlignmentDirective, dataset: EmbeddingDataset,
                   max_triplets: int = 256, seed: int = 0,
                   margin: float = 0.2) -> TripletBatch:
    """Compile a directive into (anchor, positive, negative) training rows.

    Point-set: the dragged point anchors every triplet; positives come
    from the target set, negatives from the repelled sets (every other
    set by default). Set-set closer: anchors from the source set,
    positives from the reference set, negatives from each anchor's own
    neighborhood outside both sets; farther swaps positives and negatives.
    Sampling is seeded and capped at `max_triplets`.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    rows: list[tuple[str, str, str]] = []
    if directive.kind == "point-set":
        anchor = dataset.get(directive.point_id).id
        positives = _set_members(dataset, directive.target_set_id)
        if directive.repelled_set_ids:
            repelled = list(directive.repelled_set_ids)
        else:
            repelled = [s for s in _all_set_ids(dataset)
                        if s != directive.target_set_id]
        if not repelled:
            raise DegenerateDirective("no sets to repel the point from")
        negatives = []
        for set_id in repelled:
            negatives.extend(_set_members(dataset, set_id))
        negatives = [n for n in negatives if n != anchor]
        if not negatives:
            raise DegenerateDirective("repelled sets contain no usable points")
        for pos in positives:
            for neg in negatives:
                if pos != anchor:
                    rows.append((anchor, pos, neg))
    else:
        source = _set_members(dataset, directive.source_set_id)
        reference = _set_members(dataset, directive.reference_set_id)
        if set(source) <= set(reference):
            raise DegenerateDirective("source set is contained in the reference set")
        excluded = set(source) | set(reference)
        for anchor in source:
            context = _nearest_outside(dataset, anchor, excluded, NEIGHBORHOOD_SIZE)
            if not context:
                raise DegenerateDirective(
                    "no neighborhood points outside source and reference")
            for ref in reference:
                for ctx in context:
                    if directive.direction == "closer":
                        rows.append((anchor, ref, ctx))
                    else:
                        rows.append((anchor, ctx, ref))
    if not rows:
        raise DegenerateDirective("directive produced no triplets")
    if len(rows) > max_triplets:
        take = rng.choice(len(rows), size=max_triplets, replace=False)
        rows = [rows[i] for i in sorted(take)]
    return TripletBatch(triplets=rows, margin=margin)


def hinge_loss(dataset: EmbeddingDataset, batch: TripletBatch,
               adapter: AdapterModel) -> float:
    """Mean hinge over the batch on adapted cosine distances."""
    vecs = adapter.apply(dataset.matrix())
    index = {p.id: i for i, p in enumerate(dataset.points)}
    total = 0.0
    for a, p, n in batch.triplets:
        d_pos = 1.0 - float(vecs[index[a]] @ vecs[index[p]])
        d_neg = 1.0 - float(vecs[index[a]] @ vecs[index[n]])
        total += max(0.0, d_pos - d_neg + batch.margin)
    return total / len(batch.triplets)


def train_adapter(dataset: EmbeddingDataset, batch: TripletBatch,
                  config: AdapterConfig,
                  progress: Optional[callable] = None) -> AdapterModel:
    """Minimize the batch hinge loss with adaptive-moment updates.

    Identity-initialized; a batch that already satisfies every margin has
    zero gradient and leaves the adapter at the identity.
    """
    if not batch.triplets:
        raise EmptySet("triplet batch is empty")
    adapter = AdapterModel.identity(dataset.dimension, config.hidden)
    adapter.train_config = {
        "epochs": config.epochs, "learningRate": config.learning_rate,
        "margin": batch.margin, "seed": config.seed,
    }
    index = {p.id: i for i, p in enumerate(dataset.points)}
    x = torch.tensor(dataset.matrix(), dtype=torch.float64)
    ai = torch.tensor([index[a] for a, _, _ in batch.triplets])
    pi = torch.tensor([index[p] for _, p, _ in batch.triplets])
    ni = torch.tensor([index[n] for _, _, n in batch.triplets])
    params = [torch.tensor(w, dtype=torch.float64, requires_grad=True)
              for w in adapter.weights]
    opt = torch.optim.Adam(params, lr=config.learning_rate)

    def apply_t(inp: torch.Tensor) -> torch.Tensor:
        out = inp @ params[0].T + params[1]
        if config.hidden is not None:
            out = out + torch.tanh(inp @ params[2].T + params[3]) @ params[4].T
        return out / torch.linalg.norm(out, dim=-1, keepdim=True)

    for epoch in range(config.epochs):
        opt.zero_grad()
        vecs = apply_t(x)
        d_pos = 1.0 - (vecs[ai] * vecs[pi]).sum(-1)
        d_neg = 1.0 - (vecs[ai] * vecs[ni]).sum(-1)
        loss = torch.relu(d_pos - d_neg + batch.margin).mean()
        value = float(loss.detach())
        if not np.isfinite(value):
            raise NonFiniteLoss(f"non-finite hinge loss at epoch {epoch}")
        if progress is not None:
            progress(epoch, value)
        if value == 0.0:
            break
        loss.backward()
        opt.step()
    adapter.weights = [p.detach().numpy().copy() for p in params]
    return adapter


def apply_adapter(dataset: EmbeddingDataset, adapter: AdapterModel) -> EmbeddingDataset:
    """New dataset version with every vector mapped and re-normalized."""
    if adapter.dimension != dataset.dimension:
        raise DimensionMismatch(
            f"adapter dimension {adapter.dimension} != dataset {dataset.dimension}")
    adapted = adapter.apply(dataset.matrix())
    points = tuple(replace(p, vector=adapted[i])
                   for i, p in enumerate(dataset.points))
    return dataset.with_points(points)


def _mean_cross_distance(vecs: np.ndarray, rows: list[int], cols: list[int]) -> float:
    sub = 1.0 - vecs[rows] @ vecs[cols].T
    return float(sub.mean())


def verify_alignment(directive: AlignmentDirective, dataset: EmbeddingDataset,
                     adapter: AdapterModel) -> dict:
    """Evaluate the directive's mean-distance inequality on adapted vectors.

    Point-set: mean distance from the point to the target set must be
    smaller than to every repelled set (lhs vs the smallest competing
    mean). Set-set: the source-reference mean pairwise distance is
    compared against the source's mean distance to everything outside
    both sets; closer wants lhs < rhs, farther wants lhs > rhs.
    """
    vecs = adapter.apply(dataset.matrix())
    index = {p.id: i for i, p in enumerate(dataset.points)}
    if directive.kind == "point-set":
        a = index[dataset.get(directive.point_id).id]
        target = [index[i] for i in _set_members(dataset, directive.target_set_id)
                  if index[i] != a]
        if not target:
            raise EmptySet("target set has no members besides the point")
        competitors = (list(directive.repelled_set_ids)
                       if directive.repelled_set_ids else
                       [s for s in _all_set_ids(dataset)
                        if s != directive.target_set_id])
        if not competitors:
            raise DegenerateDirective("no competing sets to verify against")
        lhs = _mean_cross_distance(vecs, [a], target)
        rhs = min(
            _mean_cross_distance(
                vecs, [a],
                [index[i] for i in _set_members(dataset, s) if index[i] != a])
            for s in competitors)
        satisfied = lhs < rhs
    else:
        source = [index[i] for i in _set_members(dataset, directive.source_set_id)]
        reference = [index[i] for i in _set_members(dataset, directive.reference_set_id)]
        inside = set(source) | set(reference)
        outside = [i for i in range(len(dataset.points)) if i not in inside]
        if not outside:
            raise DegenerateDirective("no context points outside the two sets")
        lhs = _mean_cross_distance(vecs, source, reference)
        rhs = _mean_cross_distance(vecs, source, outside)
        satisfied = lhs < rhs if directive.direction == "closer" else lhs > rhs
    return {"lhs": lhs, "rhs": rhs, "satisfied": bool(satisfied)}


def rerank(query_point_id: str, candidate_ids: Sequence[str],
           dataset: EmbeddingDataset, adapter: AdapterModel) -> list[str]:
    """Candidates sorted by adapted cosine distance to the adapted query."""
    for cid in candidate_ids:
        if cid not in dataset:
            raise UnknownId(f"unknown candidate id {cid!r}")
    query = dataset.get(query_point_id)
    ids = [query.id] + list(candidate_ids)
    vecs = adapter.apply(dataset.matrix(ids))
    dists = 1.0 - vecs[1:] @ vecs[0]
    ranked = sorted(zip(dists, candidate_ids))
    return [cid for _, cid in ranked]


def weighted_embedding(dataset: EmbeddingDataset, concept_names: Sequence[str],
                       weights: Sequence[float]) -> np.ndarray:
    """Unit-normalized weighted sum of concept text embeddings."""
    if len(concept_names) != len(weights):
        raise MfwbError("concepts and weights must have the same length")
    total = np.zeros(dataset.dimension)
    for name, w in zip(concept_names, weights):
        entry = dataset.concept(name)
        total = total + w * dataset.get(entry.text_point_id).vector
    norm = float(np.linalg.norm(total))
    if norm < 1e-12:
        raise ZeroResultant("weighted sum of embeddings is zero")
    return total / norm


# -- serialization and run logs -------------------------------------------------


def save_adapter(adapter: AdapterModel, path: str | Path) -> None:
    header = {
        "kind": "adapter",
        "dimension": adapter.dimension,
        "hidden": adapter.hidden,
        "config": adapter.train_config,
        "shapes": [list(w.shape) for w in adapter.weights],
    }
    flat = np.concatenate([w.reshape(-1) for w in adapter.weights]).astype("<f4")
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(MAGIC + struct.pack("<III", BINARY_VERSION, 1, flat.size)
                 + flat.tobytes())


def load_adapter(path: str | Path) -> AdapterModel:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    header = json.loads(raw[:nl])
    if header.get("kind") != "adapter":
        raise MfwbError(f"{path}: not an adapter file")
    blob = raw[nl + 1:]
    if blob[:4] != MAGIC:
        raise MfwbError(f"{path}: adapter blob missing magic bytes")
    _, count, dim = struct.unpack_from("<III", blob, 4)
    flat = np.frombuffer(blob, dtype="<f4", offset=16).astype(np.float64)
    weights = []
    at = 0
    for shape in header["shapes"]:
        size = int(np.prod(shape))
        weights.append(flat[at:at + size].reshape(shape).copy())
        at += size
    return AdapterModel(dimension=header["dimension"], weights=weights,
                        hidden=header["hidden"], train_config=header["config"])


class AlignmentRunLog:
    """JSON-lines log of one fine-tuning run: epoch, hinge loss, lhs, rhs."""

    def __init__(self, path: Optional[str | Path] = None):
        self.path = Path(path) if path else None
        self.entries: list[dict] = []

    def record(self, **fields) -> None:
        self.entries.append(fields)
        if self.path is not None:
            with open(self.path, "a") as fh:
                fh.write(json.dumps(fields, sort_keys=True) + "\n")
