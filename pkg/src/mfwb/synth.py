"""Synthetic fixtures: clustered bimodal data with a controlled modality
gap, an entangled-retrieval pool, and a planted misassignment.

All generators are seed-controlled and produce ordinary datasets, so the
whole evaluation and alignment stack can be exercised without any encoder
model or external data.
"""
from __future__ import annotations

import numpy as np

from .errors import MfwbError
from .store import ConceptEntry, EmbeddingDataset, EmbeddingPoint, Modality, \
    assign_nearest_concept

PRESETS = ("gap3", "entangle2", "misassign2")


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _cluster(rng: np.random.Generator, proto: np.ndarray, n: int,
             noise: float) -> np.ndarray:
    pts = proto[None, :] + noise * rng.standard_normal((n, len(proto)))
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def gap3(seed: int, n_per_cluster: int = 100, dimension: int = 32,
         noise: float = 0.5, gap: float = 0.9) -> EmbeddingDataset:
    """Three concept clusters per modality with a constant modality-gap
    offset injected into the text side."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 3])))
    protos = [_unit(rng.standard_normal(dimension)) for _ in range(3)]
    gap_vec = _unit(rng.standard_normal(dimension)) * gap
    names = ["c0", "c1", "c2"]
    points: list[EmbeddingPoint] = []
    for ci, (name, proto) in enumerate(zip(names, protos)):
        for j, vec in enumerate(_cluster(rng, proto, n_per_cluster, noise)):
            points.append(EmbeddingPoint(
                id=f"img-{ci}-{j:03d}", modality=Modality.IMAGE,
                vector=vec, label=name))
        points.append(EmbeddingPoint(
            id=f"txt-{name}", modality=Modality.TEXT,
            vector=_unit(proto + gap_vec), label=name))
    concepts = tuple(ConceptEntry(n, f"txt-{n}") for n in names)
    ds = EmbeddingDataset(dimension, tuple(points), concepts)
    assignment = assign_nearest_concept(
        ds, names, [p.id for p in ds.by_modality(Modality.IMAGE)])
    for p in ds.points:
        if p.modality is Modality.IMAGE:
            p.set_id = assignment[p.id]
    return ds


def entangle2(seed: int, dimension: int = 32, pool: int = 25,
              subset: int = 10, noise: float = 0.12) -> EmbeddingDataset:
    """Retrieval pool where a confusable cluster sits closer to the query
    than the intended one.

    Image labels are "match" / "distractor"; two small lassoed subsets
    carry setIds "intended" and "entangled" for the steering directive.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 2])))
    u_good = _unit(rng.standard_normal(dimension))
    # confusable direction correlated with the intended one
    u_bad = _unit(u_good + 0.9 * rng.standard_normal(dimension))
    query = _unit(0.6 * u_good + 1.0 * u_bad)
    # the lassoed correct region includes the query text itself, so a
    # farther-directive pushes the confusables away from the query too
    points: list[EmbeddingPoint] = [EmbeddingPoint(
        id="txt-query", modality=Modality.TEXT, vector=query, label="query",
        set_id="intended")]
    for j, vec in enumerate(_cluster(rng, u_good, pool, noise)):
        points.append(EmbeddingPoint(
            id=f"img-good-{j:03d}", modality=Modality.IMAGE, vector=vec,
            label="match", set_id="intended" if j < subset else None))
    for j, vec in enumerate(_cluster(rng, u_bad, pool, noise)):
        points.append(EmbeddingPoint(
            id=f"img-bad-{j:03d}", modality=Modality.IMAGE, vector=vec,
            label="distractor", set_id="entangled" if j < subset else None))
    # background pool so the neighborhood context is not empty
    for j in range(pool):
        vec = _unit(rng.standard_normal(dimension))
        points.append(EmbeddingPoint(
            id=f"img-misc-{j:03d}", modality=Modality.IMAGE, vector=vec,
            label="distractor"))
    concepts = (ConceptEntry("query", "txt-query"),)
    return EmbeddingDataset(dimension, tuple(points), concepts)


def misassign2(seed: int, dimension: int = 16, n_per_cluster: int = 12,
               noise: float = 0.12, gap: float = 0.6) -> EmbeddingDataset:
    """Two clean clusters plus one point whose vector sits nearer the
    wrong cluster; setIds reflect the (wrong) zero-shot assignment."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 1])))
    proto_a = _unit(rng.standard_normal(dimension))
    proto_b = _unit(rng.standard_normal(dimension))
    gap_vec = _unit(rng.standard_normal(dimension)) * gap
    points: list[EmbeddingPoint] = []
    for name, proto in (("a", proto_a), ("b", proto_b)):
        for j, vec in enumerate(_cluster(rng, proto, n_per_cluster, noise)):
            points.append(EmbeddingPoint(
                id=f"img-{name}-{j:03d}", modality=Modality.IMAGE,
                vector=vec, label=name))
        points.append(EmbeddingPoint(
            id=f"txt-{name}", modality=Modality.TEXT,
            vector=_unit(proto + gap_vec), label=name))
    # barely on the wrong side: nearer b than a, but not deep inside b,
    # so a gentle adapter can fix it without disturbing the clusters
    planted = _unit(0.55 * proto_a + 0.75 * proto_b
                    + 0.05 * rng.standard_normal(dimension))
    points.append(EmbeddingPoint(
        id="img-planted", modality=Modality.IMAGE, vector=planted, label="a"))
    concepts = (ConceptEntry("a", "txt-a"), ConceptEntry("b", "txt-b"))
    ds = EmbeddingDataset(dimension, tuple(points), concepts)
    assignment = assign_nearest_concept(
        ds, ["a", "b"], [p.id for p in ds.by_modality(Modality.IMAGE)])
    for p in ds.points:
        if p.modality is Modality.IMAGE:
            p.set_id = assignment[p.id]
    return ds


def synth_benchmark(preset: str, seed: int) -> EmbeddingDataset:
    if preset == "gap3":
        return gap3(seed)
    if preset == "entangle2":
        return entangle2(seed)
    if preset == "misassign2":
        return misassign2(seed)
    raise MfwbError(f"unknown preset {preset!r}; expected one of {PRESETS}")
