import numpy as np
import pytest

from mfwb.errors import DegenerateMeanWarning, MissingPoint, TooFewPoints
from mfwb.fusion import (
    build_merged_matrix, cosine_distance, pairwise_projected_distances,
)
from mfwb.layout import ProjectionLayout
from .conftest import make_dataset, random_bimodal, unit


class TestCosineDistance:
    def test_identical(self):
        u = unit([1, 2, 3])
        assert cosine_distance(u, u) == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal(self):
        assert cosine_distance(np.array([1.0, 0]), np.array([0, 1.0])) == 1.0

    def test_antipodal(self):
        u = unit([3, 4])
        assert cosine_distance(u, -u) == pytest.approx(2.0, abs=1e-12)


class TestBuildMergedMatrix:
    def test_constant_submatrices_normalize_to_one(self):
        # 2 texts at distance d, 2 images at distance d', constant cross c
        ds = make_dataset(4,
                          [("t0", [1, 0, 0, 0]), ("t1", [0, 1, 0, 0])],
                          [("i0", [0, 0, 1, 0]), ("i1", [0, 0, 0, 1])])
        m = build_merged_matrix(ds)
        assert np.allclose(m.tt[0, 1], 1.0)
        assert np.allclose(m.ii[0, 1], 1.0)
        assert np.allclose(m.it, 1.0)
        assert m.means["meanIT"] == pytest.approx(1.0)

    def test_entries_match_scalar_oracle(self, rng):
        ds = random_bimodal(rng, dim=5, n_text=2, n_image=3)
        m = build_merged_matrix(ds)
        images = [p for p in ds.points if p.id.startswith("i")]
        texts = [p for p in ds.points if p.id.startswith("t")]
        ii_raw = np.zeros((3, 3))
        for a in range(3):
            for b in range(3):
                if a != b:
                    ii_raw[a, b] = cosine_distance(images[a].vector, images[b].vector)
        it_raw = np.zeros((3, 2))
        for a in range(3):
            for b in range(2):
                it_raw[a, b] = cosine_distance(images[a].vector, texts[b].vector)
        tt_raw = np.zeros((2, 2))
        tt_raw[0, 1] = tt_raw[1, 0] = cosine_distance(texts[0].vector, texts[1].vector)
        mean_ii = ii_raw.sum() / 6
        mean_tt = tt_raw.sum() / 2
        mean_it = it_raw.mean()
        assert np.allclose(m.ii, ii_raw / mean_ii, atol=1e-12)
        assert np.allclose(m.tt, tt_raw / mean_tt, atol=1e-12)
        assert np.allclose(m.it, it_raw / mean_it, atol=1e-12)
        assert m.means == pytest.approx(
            {"meanII": mean_ii, "meanTT": mean_tt, "meanIT": mean_it})

    def test_degenerate_identical_images(self):
        ds = make_dataset(3,
                          [("t0", [1, 0, 0]), ("t1", [0, 1, 0])],
                          [("i0", [0, 0, 1]), ("i1", [0, 0, 1])])
        with pytest.warns(DegenerateMeanWarning):
            m = build_merged_matrix(ds)
        assert np.allclose(m.ii, 0.0)
        assert m.means["meanII"] == 1.0

    def test_too_few_points(self):
        ds = make_dataset(3, [("t0", [1, 0, 0])], [("i0", [0, 1, 0]),
                                                   ("i1", [0, 0, 1])])
        with pytest.raises(TooFewPoints):
            build_merged_matrix(ds)

    def test_invariants(self, rng):
        ds = random_bimodal(rng, n_text=3, n_image=5)
        m = build_merged_matrix(ds)
        assert np.allclose(m.ii, m.ii.T, atol=1e-9)
        assert np.allclose(m.tt, m.tt.T, atol=1e-9)
        assert np.abs(np.diag(m.ii)).max() == 0.0
        assert np.abs(np.diag(m.tt)).max() == 0.0
        full = m.full()
        assert np.allclose(full, full.T)
        n = m.n_image
        off = ~np.eye(n, dtype=bool)
        assert m.ii[off].mean() == pytest.approx(1.0, abs=1e-6)
        assert m.it.mean() == pytest.approx(1.0, abs=1e-6)

    def test_permutation_equivariance(self, rng):
        ds = random_bimodal(rng, n_text=3, n_image=4)
        m1 = build_merged_matrix(ds)
        perm = list(ds.points)
        perm[0], perm[5] = perm[5], perm[0]  # shuffles within-text and within-image order
        perm[3], perm[6] = perm[6], perm[3]
        ds2 = ds.with_points(tuple(perm))
        m2 = build_merged_matrix(ds2)
        # same ids, different order: entries relocate with their ids
        idx1 = {pid: i for i, pid in enumerate(m1.order)}
        full1, full2 = m1.full(), m2.full()
        for a, pa in enumerate(m2.order):
            for b, pb in enumerate(m2.order):
                assert full2[a, b] == pytest.approx(full1[idx1[pa], idx1[pb]], abs=1e-12)

    def test_scale_free(self, rng):
        # scaling raw vectors before re-normalization changes nothing
        raw_t = [(f"t{i}", rng.standard_normal(4)) for i in range(2)]
        raw_i = [(f"i{i}", rng.standard_normal(4)) for i in range(3)]
        ds1 = make_dataset(4, raw_t, raw_i)
        ds2 = make_dataset(4, [(k, 7.3 * v) for k, v in raw_t],
                           [(k, 7.3 * v) for k, v in raw_i])
        assert np.allclose(build_merged_matrix(ds1).full(),
                           build_merged_matrix(ds2).full(), atol=1e-12)


class TestProjectedDistances:
    def test_zero_layout(self):
        layout = ProjectionLayout({"a": (0.0, 0.0), "b": (0.0, 0.0)})
        d = pairwise_projected_distances(layout, ["a", "b"])
        assert np.allclose(d, 0.0)

    def test_345_triangle(self):
        layout = ProjectionLayout({"a": (0.0, 0.0), "b": (3.0, 4.0)})
        d = pairwise_projected_distances(layout, ["a", "b"])
        assert d[0, 1] == pytest.approx(5.0)

    def test_matches_scalar_oracle(self, rng):
        ids = [f"p{i}" for i in range(5)]
        coords = {pid: (rng.uniform(-3, 3), rng.uniform(-3, 3)) for pid in ids}
        layout = ProjectionLayout(coords)
        d = pairwise_projected_distances(layout, ids)
        for a, pa in enumerate(ids):
            for b, pb in enumerate(ids):
                dx = coords[pa][0] - coords[pb][0]
                dy = coords[pa][1] - coords[pb][1]
                assert d[a, b] == pytest.approx((dx * dx + dy * dy) ** 0.5, abs=1e-12)

    def test_missing_point(self):
        layout = ProjectionLayout({"a": (0.0, 0.0)})
        with pytest.raises(MissingPoint):
            pairwise_projected_distances(layout, ["a", "b"])
