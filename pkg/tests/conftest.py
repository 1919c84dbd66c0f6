import numpy as np
import pytest

from mfwb.store import ConceptEntry, EmbeddingDataset, EmbeddingPoint, Modality


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def make_point(pid, modality, vec, **kw):
    return EmbeddingPoint(id=pid, modality=modality, vector=unit(vec), **kw)


def make_dataset(dim, text_vecs, image_vecs, concepts=(), **point_kw):
    """Datasets from raw (id, vector[, kwargs]) tuples; vectors get normalized."""
    points = []
    for pid, vec, *rest in text_vecs:
        kw = rest[0] if rest else {}
        points.append(make_point(pid, Modality.TEXT, vec, **kw))
    for pid, vec, *rest in image_vecs:
        kw = rest[0] if rest else {}
        points.append(make_point(pid, Modality.IMAGE, vec, **kw))
    return EmbeddingDataset(dim, tuple(points), tuple(
        ConceptEntry(name, pid) for name, pid in concepts))


def random_bimodal(rng, dim=6, n_text=3, n_image=8, concepts=False):
    texts = [(f"t{i}", rng.standard_normal(dim)) for i in range(n_text)]
    images = [(f"i{i}", rng.standard_normal(dim)) for i in range(n_image)]
    concept_list = [(f"t{i}", f"t{i}") for i in range(n_text)] if concepts else ()
    return make_dataset(dim, texts, images, concept_list)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))


@pytest.fixture
def small_bimodal(rng):
    return random_bimodal(rng)
