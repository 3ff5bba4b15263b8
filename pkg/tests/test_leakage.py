import datetime as dt
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.distance import cdist

from monometry.geometry import PixelBox
from monometry.leakage import (EMBEDDING_DIM, NOISE, SUBSETS, ConstantVariables, DayRecord,
                               PerplexityTooLarge, TooFewClusters, TSNEConfig, WrongVisualLength,
                               build_embedding, cluster_split, dbcv, dbscan, select_extreme_days,
                               standardize, standardize_columns, tsne, tsne_array)
from monometry.leakage.dbscan import core_mask
from monometry.leakage.tsne import (conditional_probabilities, joint_probabilities,
                                    squared_distances)
from monometry.leakage.weather import composite_scores
from monometry.leakage.weather import EmptyInput as WeatherEmpty

from oracles import dbscan_reference, same_partition
from synth import random_profile


def blobs(seed, centers, n_per, sigma, dim):
    rng = np.random.default_rng(seed)
    pts, lab = [], []
    for k, c in enumerate(centers):
        pts.append(rng.normal(0, sigma, (n_per, dim)) + c)
        lab += [k] * n_per
    return np.vstack(pts), np.array(lab)


def nn_accuracy(y, truth):
    d = squared_distances(y)
    np.fill_diagonal(d, np.inf)
    return float(np.mean(truth[np.argmin(d, axis=1)] == truth))


# -- embeddings ----------------------------------------------------------------------------

def test_empty_annotation_features():
    e = build_embedding("a", np.zeros(256), [], 0.0)
    np.testing.assert_array_equal(e.annotation_features, [0, 0, 0, 0])
    assert e.full_vector.shape == (EMBEDDING_DIM,) == (261,)


def test_annotation_counts_and_mean_area():
    boxes = [PixelBox(0, 0, 2, 5, class_id=0), PixelBox(0, 0, 5, 6, class_id=0)]
    e = build_embedding("a", np.ones(256), boxes, 1.7e9)
    np.testing.assert_array_equal(e.annotation_features, [2, 0, 0, 20])
    assert e.full_vector[-1] == 1.7e9


def test_visual_length_checked():
    with pytest.raises(WrongVisualLength):
        build_embedding("a", np.zeros(255), [], 0.0)


def test_standardized_moments():
    rng = np.random.default_rng(0)
    embs = [build_embedding(i, rng.normal(3, 7, 256),
                            [PixelBox(0, 0, 1 + i, 2, class_id=i % 3)], 1.7e9 + 60 * i)
            for i in range(40)]
    z = np.stack([e.full_vector for e in standardize(embs)])
    raw = np.stack([e.raw_vector for e in embs])
    varying = raw.std(axis=0) > 0
    assert np.all(np.abs(z[:, varying].mean(axis=0)) < 1e-9)
    assert np.all(np.abs(z[:, varying].std(axis=0) - 1) < 1e-9)
    assert np.all(z[:, ~varying] == 0)


def test_constant_columns_become_zero():
    m = np.column_stack([np.full(5, 3.0), np.arange(5.0)])
    out = standardize_columns(m)
    assert np.all(out[:, 0] == 0)


# -- t-SNE ---------------------------------------------------------------------------------

def test_conditional_perplexity_calibrated():
    x, _ = blobs(1, [np.zeros(10), np.full(10, 6.0)], 60, 1.0, 10)
    for perp in (5.0, 30.0):
        P, _ = conditional_probabilities(squared_distances(x), perp)
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(np.diag(P) == 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            h = -np.sum(np.where(P > 0, P * np.log(P), 0.0), axis=1)
        assert np.max(np.abs(np.exp(h) - perp)) < 1e-3


def test_two_blobs_separate():
    x, truth = blobs(2, [np.zeros(20), np.full(20, 10.0)], 100, 1.0, 20)
    y = tsne_array(x, TSNEConfig(n_iter=500), seed=0)
    assert nn_accuracy(y, truth) >= 0.95


@pytest.mark.parametrize("seed", range(3))
def test_duplicates_embed_together(seed):
    base, _ = blobs(seed, [np.zeros(8), np.full(8, 5.0)], 30, 1.0, 8)
    x = np.vstack([base, base])
    n = len(base)
    # a learning rate below n / (4 * exaggeration) keeps the early phase stable
    y = tsne_array(x, TSNEConfig(perplexity=10, learning_rate=50), seed=seed)
    d2 = squared_distances(y)
    diam = np.sqrt(d2.max())
    gap = np.linalg.norm(y[:n] - y[n:], axis=1) / diam
    # coincident points repel when their joint p is below q at distance 0,
    # i.e. p * Z < 1; only pairs with p * Z > 1 collapse completely
    num = 1.0 / (1.0 + d2)
    np.fill_diagonal(num, 0.0)
    p_dup = joint_probabilities(x, 10)[np.arange(n), np.arange(n) + n]
    attracting = p_dup * num.sum() > 1.05
    assert attracting.sum() >= 10
    assert gap[attracting].max() <= 1e-3
    assert gap.max() <= 1e-2


def test_tsne_is_deterministic():
    x, _ = blobs(4, [np.zeros(5), np.full(5, 4.0)], 20, 1.0, 5)
    cfg = TSNEConfig(perplexity=5, n_iter=200)
    a = tsne(list(x), ids=[f"i{k}" for k in range(40)], config=cfg, seed=9)
    b = tsne(list(x), ids=[f"i{k}" for k in range(40)], config=cfg, seed=9)
    assert a == b
    assert a[3].image_id == "i3"


def test_perplexity_guard():
    with pytest.raises(PerplexityTooLarge):
        tsne_array(np.random.default_rng(0).normal(size=(90, 3)), TSNEConfig(perplexity=30))
    with pytest.raises(PerplexityTooLarge):
        tsne_array(np.random.default_rng(0).normal(size=(90, 3)), TSNEConfig(perplexity=1))


# -- DBSCAN --------------------------------------------------------------------------------

def test_two_separated_blobs():
    x, truth = blobs(5, [(0, 0), (50, 50)], 30, 1.0, 2)
    labels = dbscan(x, eps=2.0, min_samples=4)
    assert set(labels) == {0, 1}
    assert same_partition(labels, truth)


def test_sparse_scatter_is_noise():
    x = np.array([(10.0 * i, 7.0 * (i % 3)) for i in range(12)])
    assert np.all(dbscan(x, eps=1.0, min_samples=2) == NOISE)


def test_dbscan_argument_checks():
    with pytest.raises(ValueError):
        dbscan(np.zeros((3, 2)), eps=0, min_samples=2)
    with pytest.raises(ValueError):
        dbscan(np.zeros((3, 2)), eps=1, min_samples=0)


@pytest.mark.parametrize("seed", range(30))
def test_dbscan_matches_reference(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 300))
    k = int(rng.integers(1, 6))
    centers = rng.uniform(0, 40, (k, 2))
    x = centers[rng.integers(0, k, n)] + rng.normal(0, rng.uniform(0.5, 3), (n, 2))
    eps, ms = float(rng.uniform(0.5, 3.0)), int(rng.integers(2, 8))
    assert same_partition(dbscan(x, eps, ms), dbscan_reference(x, eps, ms))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), eps=st.floats(0.3, 4.0), ms=st.integers(1, 8))
def test_dbscan_label_validity(seed, eps, ms):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 20, (80, 2))
    labels = dbscan(x, eps, ms)
    core = core_mask(x, eps, ms)
    d = cdist(x, x)
    assert np.all((d <= eps).sum(axis=1)[core] >= ms)
    for i in np.flatnonzero(labels != NOISE):
        same = (labels == labels[i]) & core
        assert np.any(d[i, same] <= eps)


# -- DBCV ----------------------------------------------------------------------------------

def test_dbcv_two_tight_blobs():
    x, truth = blobs(6, [(0, 0), (100, 0)], 50, 1.0, 2)
    assert dbcv(x, truth) > 0.9


def test_dbcv_bisected_blob_is_negative():
    rng = np.random.default_rng(7)
    x = rng.normal(0, 1, (200, 2))
    assert dbcv(x, (x[:, 0] > 0).astype(int)) < 0


def test_dbcv_needs_two_clusters():
    with pytest.raises(TooFewClusters):
        dbcv(np.random.default_rng(0).normal(size=(20, 2)), np.zeros(20, dtype=int))


def test_dbcv_noise_dilutes_score():
    x, truth = blobs(8, [(0, 0), (100, 0)], 40, 1.0, 2)
    noisy_x = np.vstack([x, [[50.0, 50.0], [50.0, -50.0]]])
    noisy_l = np.concatenate([truth, [NOISE, NOISE]])
    assert dbcv(noisy_x, noisy_l) == pytest.approx(dbcv(x, truth) * 80 / 82, rel=0.05)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_dbcv_bounds_and_permutation(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(0, 1, (60, 2)) + np.repeat(rng.uniform(0, 8, (3, 2)), 20, axis=0)
    labels = rng.integers(0, 3, 60)
    labels[:3] = [0, 1, 2]
    score = dbcv(x, labels)
    assert -1.0 <= score <= 1.0
    perm = rng.permutation(60)
    assert dbcv(x[perm], labels[perm]) == pytest.approx(score, abs=1e-12)


# -- cluster split -------------------------------------------------------------------------

def test_single_cluster_goes_to_train():
    part = cluster_split([0] * 20, seed=3)
    assert set(part.split.values()) == {"train"}


def test_ten_equal_clusters():
    labels = [k for k in range(10) for _ in range(7)]
    part = cluster_split(labels, seed=0)
    counts = {s: len({labels[i] for i, v in part.split.items() if v == s}) for s in SUBSETS}
    assert counts == {"train": 8, "val": 1, "test": 1}
    assert part.proportions == {"train": 0.8, "val": 0.1, "test": 0.1}
    assert part.spanning_clusters() == []


def test_noise_points_are_singletons():
    labels = {"a": NOISE, "b": NOISE, "c": 0, "d": 0}
    part = cluster_split(labels, ratios=(0.5, 0.25, 0.25), seed=1)
    assert sorted(part.split) == ["a", "b", "c", "d"]
    assert part.split["c"] == part.split["d"]
    assert {part.split["a"], part.split["b"]} == {"val", "test"}


def test_split_rejects_bad_ratios():
    with pytest.raises(ValueError):
        cluster_split([0, 1], ratios=(0.5, 0.5, 0.5))
    with pytest.raises(ValueError):
        cluster_split([])


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), split_seed=st.integers(0, 1000))
def test_split_leak_free_and_deterministic(seed, split_seed):
    labels = random_profile(np.random.default_rng(seed))
    part = cluster_split(labels, seed=split_seed)
    assert part.spanning_clusters() == []
    assert len(part.split) == len(labels)
    assert cluster_split(labels, seed=split_seed) == part
    sizes = np.bincount([l for l in labels if l != NOISE])
    if sizes.max() <= 0.1 * len(labels):
        for s, target in zip(SUBSETS, (0.8, 0.1, 0.1)):
            assert abs(part.proportions[s] - target) <= 0.05


# -- weather -------------------------------------------------------------------------------

def day(d, inst, glot, sigma):
    return DayRecord(dt.date(2025, 2, d), inst, glot, sigma)


def test_extremes_two_days():
    recs = [day(1, 0, 0, 0), day(2, 600, 2000, 1)]
    assert select_extreme_days(recs) == (dt.date(2025, 2, 1), dt.date(2025, 2, 2))


def test_ties_prefer_earliest_date():
    recs = [day(3, 1, 1, 1), day(2, 1, 1, 1), day(1, 5, 5, 5)]
    cloudy, sunny = select_extreme_days(recs)
    assert cloudy == dt.date(2025, 2, 2) and sunny == dt.date(2025, 2, 1)


def test_weather_errors():
    with pytest.raises(WeatherEmpty):
        select_extreme_days([day(1, 0, 0, 0)])
    with pytest.raises(ConstantVariables):
        select_extreme_days([day(1, 2, 2, 2), day(2, 2, 2, 2)])


def _brute_extremes(recs):
    cols = list(zip(*[(r.inst, r.glot, r.sigma) for r in recs]))
    scores = []
    for r in recs:
        total = 0.0
        for c, v in zip(cols, (r.inst, r.glot, r.sigma)):
            lo, hi = min(c), max(c)
            total += 0.0 if hi == lo else (v - lo) / (hi - lo)
        scores.append(total / 3)
    by_date = sorted(range(len(recs)), key=lambda i: recs[i].date)
    lo = min(by_date, key=lambda i: (scores[i], recs[i].date))
    hi = min(by_date, key=lambda i: (-scores[i], recs[i].date))
    return recs[lo].date, recs[hi].date


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 10_000), a=st.floats(0.1, 100), b=st.floats(-1e3, 1e3))
def test_weather_matches_brute_force_and_affine_invariance(seed, a, b):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 28))
    recs = [day(d + 1, *rng.uniform(0, 1, 3)) for d in rng.permutation(28)[:n]]
    assert select_extreme_days(recs) == _brute_extremes(recs)
    scaled = [DayRecord(r.date, a * r.inst + b, r.glot, r.sigma) for r in recs]
    np.testing.assert_allclose(composite_scores(sorted(scaled, key=lambda r: r.date)),
                               composite_scores(sorted(recs, key=lambda r: r.date)), atol=1e-9)
