"""Acceptance suite: one test per release criterion, each printing a
pass/fail line. Tolerances are pinned here and nowhere else."""
import functools
import json
import subprocess
import sys
import time

import numpy as np
import pytest

from mfwb.alignment import (
    AdapterConfig, AdapterModel, AlignmentDirective, apply_adapter,
    build_triplets, rerank, train_adapter, verify_alignment,
)
from mfwb.axis import ConceptAxisSpec, axis_layout
from mfwb.baselines import smacof
from mfwb.mfm import MfmConfig, gradient_check, init_model, ordinal_loss, train_mfm
from mfwb.quality import continuity, evaluate_protocol, trustworthiness
from mfwb.store import EmbeddingDataset, Modality, assign_nearest_concept
from mfwb.synth import entangle2, gap3, misassign2
from .conftest import make_dataset
from .test_mfm_losses import brute_force_ordinal
from .test_quality import oracle_trustworthiness, random_distances


def criterion(name):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"[FAIL] {name}")
                raise
            print(f"[PASS] {name}")
        return wrapper
    return deco


@pytest.fixture(scope="module")
def gap3_dataset():
    return gap3(seed=0)


@criterion("gradient fidelity: max relative error < 1e-3 at 20 probes, < 30 s")
def test_gradient_fidelity(gap3_dataset):
    start = time.time()
    config = MfmConfig(seed=0)
    model = init_model(gap3_dataset.dimension, config)
    err = gradient_check(model, gap3_dataset, config, probe_count=20, seed=20)
    elapsed = time.time() - start
    assert err < 1e-3, f"max relative error {err}"
    assert elapsed < 30.0, f"took {elapsed:.1f}s"


@criterion("ordinal-loss oracle: 100 random cross blocks within 1e-9")
def test_ordinal_loss_oracle():
    rng = np.random.Generator(np.random.PCG64(77))
    for _ in range(100):
        n_text = int(rng.integers(1, 6))
        n_image = int(rng.integers(1, 9))
        ti = rng.uniform(0, 2, size=(n_text, n_image))
        pti = rng.uniform(0.05, 3, size=(n_text, n_image))
        assert ordinal_loss(ti, pti) == pytest.approx(
            brute_force_ordinal(ti, pti), abs=1e-9)


@criterion("trust/continuity oracle: 50 random matrix pairs within 1e-12, "
           "duality exact")
def test_trustworthiness_oracle():
    rng = np.random.Generator(np.random.PCG64(99))
    checked = 0
    while checked < 50:
        n = int(rng.integers(5, 13))
        k = int(rng.integers(1, 4))
        if 2 * (n - 1) - 3 * k + 1 <= 0:
            continue  # outside the metric's domain
        dh, dl = random_distances(rng, n), random_distances(rng, n)
        got = trustworthiness(dh, dl, k)
        assert got == pytest.approx(oracle_trustworthiness(dh, dl, k), abs=1e-12)
        assert continuity(dh, dl, k) == trustworthiness(dl, dh, k)
        checked += 1


@criterion("desk-scale ordering: MFM inter T/C beat DCM by >= 0.005 and "
           "DCM intra beats NDCM, 20 rounds, < 10 min")
def test_table_ordering(gap3_dataset):
    start = time.time()
    reports = {
        method: evaluate_protocol(gap3_dataset, method, rounds=20,
                                  sample_size=150, k=30, seed=11,
                                  keep_rounds=False)
        for method in ("MFM", "DCM", "NDCM")
    }
    elapsed = time.time() - start
    mfm, dcm, ndcm = reports["MFM"], reports["DCM"], reports["NDCM"]
    assert mfm.inter_trust - dcm.inter_trust >= 0.005, (
        f"inter T: MFM {mfm.inter_trust:.4f} vs DCM {dcm.inter_trust:.4f}")
    assert mfm.inter_cont - dcm.inter_cont >= 0.005, (
        f"inter C: MFM {mfm.inter_cont:.4f} vs DCM {dcm.inter_cont:.4f}")
    assert dcm.intra_trust > ndcm.intra_trust, (
        f"intra T: DCM {dcm.intra_trust:.4f} vs NDCM {ndcm.intra_trust:.4f}")
    assert dcm.intra_cont > ndcm.intra_cont, (
        f"intra C: DCM {dcm.intra_cont:.4f} vs NDCM {ndcm.intra_cont:.4f}")
    assert elapsed < 600.0, f"took {elapsed:.0f}s"


@criterion("zero-gap sanity: duplicated text/image points co-locate "
           "within 1% of layout diameter")
def test_zero_gap_colocation():
    rng = np.random.Generator(np.random.PCG64(12))
    dim = 8
    vecs = [rng.standard_normal(dim) for _ in range(10)]
    ds = make_dataset(dim, [(f"t{j}", v) for j, v in enumerate(vecs)],
                      [(f"i{j}", v) for j, v in enumerate(vecs)])
    _, layout, _ = train_mfm(ds, MfmConfig(epochs=200, seed=0,
                                           hidden1=32, hidden2=16))
    diam = layout.diameter()
    assert diam > 0
    for j in range(10):
        xi = np.array(layout.positions[f"i{j}"])
        xt = np.array(layout.positions[f"t{j}"])
        assert np.linalg.norm(xi - xt) <= 0.01 * diam


@criterion("SMACOF monotonicity: stress non-increasing on 20 random instances")
def test_smacof_monotonicity():
    rng = np.random.Generator(np.random.PCG64(2024))
    for trial in range(20):
        n = int(rng.integers(4, 14))
        a = rng.uniform(0.05, 3, size=(n, n))
        d = (a + a.T) / 2
        np.fill_diagonal(d, 0.0)
        _, trace = smacof(d, seed=trial)
        for s0, s1 in zip(trace, trace[1:]):
            assert s1 <= s0 + 1e-12 * max(1.0, s0)


@criterion("alignment efficacy: one point-set directive flips verification "
           "without hurting any other point, < 60 s")
def test_alignment_efficacy():
    start = time.time()
    ds = misassign2(seed=0)
    directive = AlignmentDirective.point_set("img-planted", "a")
    identity = AdapterModel.identity(ds.dimension)
    assert verify_alignment(directive, ds, identity)["satisfied"] is False

    batch = build_triplets(directive, ds, max_triplets=256, seed=0, margin=0.1)
    adapter = train_adapter(ds, batch, AdapterConfig(epochs=200, seed=0, margin=0.1))
    assert verify_alignment(directive, ds, adapter)["satisfied"] is True

    concepts = [c.name for c in ds.concepts]
    img_ids = [p.id for p in ds.by_modality(Modality.IMAGE)]
    before = assign_nearest_concept(ds, concepts, img_ids)
    after = assign_nearest_concept(apply_adapter(ds, adapter), concepts, img_ids)
    for pid in img_ids:
        if pid == "img-planted":
            continue
        label = ds.get(pid).label
        if before[pid] == label:
            assert after[pid] == label, f"{pid} regressed"
    elapsed = time.time() - start
    assert elapsed < 60.0, f"took {elapsed:.1f}s"


@criterion("re-ranking efficacy: set-set farther directive lifts top-10 "
           "precision by >= 10 points")
def test_rerank_efficacy():
    ds = entangle2(seed=0)
    candidates = [p.id for p in ds.by_modality(Modality.IMAGE)]
    identity = AdapterModel.identity(ds.dimension)

    def precision_at_10(adapter):
        ranked = rerank("txt-query", candidates, ds, adapter)
        return sum(ds.get(pid).label == "match" for pid in ranked[:10]) / 10

    before = precision_at_10(identity)
    directive = AlignmentDirective.set_set("entangled", "intended", "farther")
    batch = build_triplets(directive, ds, max_triplets=256, seed=0, margin=0.5)
    adapter = train_adapter(ds, batch, AdapterConfig(epochs=250, seed=0, margin=0.5))
    after = precision_at_10(adapter)
    assert after - before >= 0.10, f"precision {before:.2f} -> {after:.2f}"


@criterion("concept-axis exactness: positions match hand computation to 1e-12")
def test_concept_axis_exactness():
    sims = [0.2, 0.5, 0.8]
    images = [(f"i{j}", [s, np.sqrt(1 - s * s), 0.0]) for j, s in enumerate(sims)]
    ds = make_dataset(3, [("ta", [1.0, 0.0, 0.0])], images,
                      concepts=[("A", "ta")])
    layouts = axis_layout(ds, [ConceptAxisSpec("A", length=100.0)])
    positions = layouts[0].positions
    # hand computation: l * (sim - min) / (max - min)
    for j, s in enumerate(sims):
        expected = 100.0 * (s - 0.2) / (0.8 - 0.2)
        assert positions[f"i{j}"] == pytest.approx(expected, abs=1e-12)
    assert positions["i0"] == 0.0
    assert positions["i2"] == 100.0


@criterion("determinism: every seeded CLI command is byte-identical "
           "across two runs")
def test_cli_determinism(tmp_path):
    def run(*args):
        out = subprocess.run([sys.executable, "-m", "mfwb.cli", *args],
                             capture_output=True, text=True)
        assert out.returncode == 0, out.stderr
        return out.stdout

    fixture = tmp_path / "mis.json"
    run("synth-benchmark", "--preset", "misassign2", "--seed", "0",
        "--out", str(fixture))
    directive = tmp_path / "d.json"
    directive.write_text(json.dumps({
        "type": "point-set", "pointId": "img-planted", "targetSetId": "a"}))
    candidates = tmp_path / "c.json"
    candidates.write_text(json.dumps(
        [f"img-a-{j:03d}" for j in range(5)]))

    commands = [
        ("project", "-m", str(fixture), "--method", "mfm", "--seed", "3",
         "--epochs", "25"),
        ("project", "-m", str(fixture), "--method", "pca", "--seed", "3"),
        ("project", "-m", str(fixture), "--method", "mds", "--seed", "3"),
        ("project", "-m", str(fixture), "--method", "dcm", "--seed", "3"),
        ("project", "-m", str(fixture), "--method", "ndcm", "--seed", "3"),
        ("evaluate", "-m", str(fixture), "--method", "pca", "--rounds", "2",
         "--sample-size", "20", "--k", "3", "--seed", "7"),
        ("axis", "-m", str(fixture), "--concepts", "a,b"),
        ("rerank", "-m", str(fixture), "--query", "img-planted",
         "--candidates", str(candidates)),
    ]
    for args in commands:
        assert run(*args) == run(*args), f"nondeterministic: {args[0]}"

    snapshots = []
    for _ in (1, 2):
        run("align", "-m", str(fixture), "-d", str(directive),
            "--out", str(tmp_path / "adapter.bin"), "--margin", "0.1",
            "--seed", "0", "--report-out", str(tmp_path / "report.json"))
        run("synth-benchmark", "--preset", "gap3", "--seed", "5",
            "--out", str(tmp_path / "gap.json"))
        snapshots.append(((tmp_path / "adapter.bin").read_bytes(),
                          (tmp_path / "report.json").read_bytes(),
                          (tmp_path / "gap.json").read_bytes()))
    assert snapshots[0] == snapshots[1]
