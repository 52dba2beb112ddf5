import math

import numpy as np
import pytest
import scipy.linalg

from ptd import metrics, spectra
from ptd.errors import ConfigError, NumericalError


# ---------------------------------------------------------------- oracles

def oracle_fid(mu_a, sig_a, mu_b, sig_b):
    """Independent path: scipy's general-matrix sqrtm on the raw product."""
    covmean = scipy.linalg.sqrtm(sig_a @ sig_b)
    if np.iscomplexobj(covmean):
        covmean = covmean.real
    diff = mu_a - mu_b
    return float(diff @ diff + np.trace(sig_a) + np.trace(sig_b)
                 - 2 * np.trace(covmean))


def oracle_inception_score(probs):
    """Brute-force double-loop KL, one split."""
    n, c = probs.shape
    marginal = [sum(probs[i][j] for i in range(n)) / n for j in range(c)]
    total = 0.0
    for i in range(n):
        kl = 0.0
        for j in range(c):
            if probs[i][j] > 0:
                kl += probs[i][j] * math.log(probs[i][j] / marginal[j])
        total += kl
    return math.exp(total / n)


def random_stats(rng, dim=3):
    mu = rng.normal(size=dim)
    a = rng.normal(size=(dim + 2, dim))
    return metrics.FeatureStats(mu=mu, sigma=a.T @ a / (dim + 1))


# -------------------------------------------------------------------- FID

def test_fid_identical_stats():
    stats = random_stats(np.random.default_rng(0))
    assert abs(metrics.fid(stats, stats)) <= 1e-8


def test_fid_1d_mean_shift():
    a = metrics.FeatureStats(np.array([0.0]), np.array([[1.0]]))
    b = metrics.FeatureStats(np.array([1.0]), np.array([[1.0]]))
    assert metrics.fid(a, b) == pytest.approx(1.0, abs=1e-8)


def test_fid_1d_variance_shift():
    a = metrics.FeatureStats(np.array([0.0]), np.array([[1.0]]))
    b = metrics.FeatureStats(np.array([0.0]), np.array([[4.0]]))
    assert metrics.fid(a, b) == pytest.approx(1.0, abs=1e-8)


def test_fid_matches_oracle_random_3d():
    rng = np.random.default_rng(12)
    for _ in range(20):
        a = random_stats(rng)
        b = random_stats(rng)
        got = metrics.fid(a, b)
        want = oracle_fid(a.mu, a.sigma, b.mu, b.sigma)
        assert got == pytest.approx(want, rel=1e-6, abs=1e-9)


def test_fid_symmetry():
    rng = np.random.default_rng(5)
    a = random_stats(rng, dim=4)
    b = random_stats(rng, dim=4)
    assert abs(metrics.fid(a, b) - metrics.fid(b, a)) <= 1e-8


def test_fid_dim_mismatch():
    a = random_stats(np.random.default_rng(0), dim=3)
    b = random_stats(np.random.default_rng(0), dim=4)
    with pytest.raises(ConfigError):
        metrics.fid(a, b)


def test_fid_non_psd_rejected():
    bad = metrics.FeatureStats(np.zeros(2),
                               np.array([[1.0, 0.0], [0.0, -1.0]]))
    good = metrics.FeatureStats(np.zeros(2), np.eye(2))
    with pytest.raises(NumericalError):
        metrics.fid(bad, good)


def test_feature_stats_from_rows():
    rows = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 9.0]])
    stats = metrics.FeatureStats.from_rows(rows)
    np.testing.assert_allclose(stats.mu, [3.0, 5.0])
    np.testing.assert_allclose(stats.sigma, np.cov(rows, rowvar=False))


# -------------------------------------------------------- inception score

def test_is_identical_rows():
    logits = np.tile(np.array([1.0, 2.0, 0.5]), (40, 1))
    result = metrics.inception_score(logits, n_splits=4)
    for score in result.scores:
        assert score == pytest.approx(1.0, abs=1e-9)


def test_is_balanced_one_hot_reaches_class_count():
    c, m = 10, 6
    logits = np.vstack([np.eye(c) * 50.0 for _ in range(m)])
    result = metrics.inception_score(logits, n_splits=1)
    assert result.mean == pytest.approx(c, abs=1e-6)


def test_is_matches_bruteforce_kl():
    rng = np.random.default_rng(9)
    probs = rng.dirichlet(np.ones(7), size=50)
    logits = np.log(probs)
    result = metrics.inception_score(logits, n_splits=1)
    assert result.mean == pytest.approx(oracle_inception_score(probs),
                                        abs=1e-9)


def test_is_row_permutation_invariant_single_split():
    rng = np.random.default_rng(2)
    logits = rng.normal(size=(30, 5))
    base = metrics.inception_score(logits, n_splits=1).mean
    shuffled = logits[rng.permutation(30)]
    assert metrics.inception_score(shuffled, n_splits=1).mean == (
        pytest.approx(base, abs=1e-12))


def test_is_too_few_rows():
    with pytest.raises(ConfigError):
        metrics.inception_score(np.zeros((3, 4)), n_splits=10)


# ---------------------------------------------------- mean power spectrum

def test_mean_spectrum_constant_image_dc_only():
    mean_map, profile, n = spectra.mean_log_power_map(
        [np.full((32, 32), 9.0)])
    assert n == 1
    center = np.unravel_index(np.argmax(mean_map), mean_map.shape)
    assert center == (16, 16)
    mask = np.ones_like(mean_map, dtype=bool)
    mask[16, 16] = False
    assert np.allclose(mean_map[mask], 0.0, atol=1e-9)


def test_mean_spectrum_idempotent_mean():
    rng = np.random.default_rng(3)
    img = rng.uniform(0, 255, size=(32, 32))
    single_map, single_profile, _ = spectra.mean_log_power_map([img])
    double_map, double_profile, _ = spectra.mean_log_power_map([img, img])
    np.testing.assert_allclose(double_map, single_map, rtol=1e-12)
    np.testing.assert_allclose(double_profile, single_profile, rtol=1e-12)


def test_mean_spectrum_peaks_at_known_rings():
    def ring_img(cycles, n=64):
        x = np.arange(n)
        return np.tile(100 * np.cos(2 * np.pi * cycles * x / n), (n, 1))

    rings = [3, 8, 20]
    imgs = [ring_img(c) for c in rings for _ in range(3)] + [ring_img(8)]
    _, profile, n = spectra.mean_log_power_map(imgs)
    assert n == 10
    nonzero = {k for k, p in enumerate(profile) if p > 1e-6 * profile.max()}
    assert nonzero == set(rings)


def test_mean_spectrum_reflection_symmetry():
    rng = np.random.default_rng(8)
    imgs = [rng.uniform(0, 255, size=(33, 33)) for _ in range(4)]
    mean_map, _, _ = spectra.mean_log_power_map(imgs)
    # real input: power spectrum is symmetric through the center
    flipped = mean_map[::-1, ::-1]
    np.testing.assert_allclose(mean_map, flipped, rtol=1e-6)


def test_mean_spectrum_mixed_sizes_rejected():
    with pytest.raises(Exception):
        spectra.mean_log_power_map([np.zeros((16, 16)) + 1,
                                    np.zeros((32, 32)) + 1])


def test_spectral_distance_zero_for_same_profile():
    p = np.array([1.0, 2.0, 3.0])
    assert spectra.spectral_distance(p, 2 * p) == pytest.approx(0.0)


# --------------------------------------------------------- clip stats

def slots(texture, artistic="", spatial="", enhancer="", color=""):
    return {"texture": texture, "artistic": artistic, "spatial": spatial,
            "enhancer": enhancer, "color": color}


def test_clip_stats_toy_pair():
    records = [(slots("woven", color="blue"), s) for s in (1.0, 2.0, 3.0,
                                                           4.0)]
    rows = metrics.clip_stats_by_pair(records)
    row = next(r for r in rows if r["word_pair"] == "woven blue")
    assert row["mean"] == 2.5
    assert row["median"] == 2.5
    assert row["n"] == 4


def test_clip_stats_empty_slot_labels():
    records = [(slots("woven"), 1.0)]
    rows = metrics.clip_stats_by_pair(records)
    names = {r["word_pair"] for r in rows}
    assert "woven ∅(color enhancer)" in names
    assert "woven ∅(color)" in names
    assert "∅(artistic) ∅(spatial)" in names


def test_clip_stats_full_scale_woven_counts():
    # paper-scale check restricted to one texture class: enumerate the
    # woven prompts with two templates and five images per prompt
    from ptd.grammar import DescriptorTable, DEFAULT_TEMPLATE, \
        enumerate_prompts
    table = DescriptorTable(templates=(DEFAULT_TEMPLATE,
                                       DEFAULT_TEMPLATE + " "))
    records = []
    for p in enumerate_prompts(table):
        if p.texture_class != "woven":
            continue
        for _ in range(5):
            records.append((p.slots(), 1.0))
    rows = metrics.clip_stats_by_pair(records)
    by_pair = {r["word_pair"]: r["n"] for r in rows}
    assert by_pair["woven blue"] == 1080
    assert by_pair["woven ∅(color enhancer)"] == 960


def test_clip_stats_matches_bruteforce_groupby():
    rng = np.random.default_rng(1)
    textures = ["woven", "scaly"]
    colors = ["", "red", "blue"]
    records = []
    for _ in range(200):
        records.append((slots(textures[rng.integers(2)],
                              color=colors[rng.integers(3)]),
                        float(rng.random())))
    rows = metrics.clip_stats_by_pair(records)

    # naive nested-loop oracle over the texture x color family
    for texture in textures:
        for color in colors:
            scores = [s for sl, s in records
                      if sl["texture"] == texture and sl["color"] == color]
            if not scores:
                continue
            label = color if color else "∅(color)"
            row = next(r for r in rows
                       if r["word_pair"] == f"{texture} {label}")
            assert row["n"] == len(scores)
            assert row["mean"] == pytest.approx(np.mean(scores))


def test_clip_stats_family_totals():
    rng = np.random.default_rng(4)
    records = [(slots("woven", color=["", "red"][rng.integers(2)],
                      artistic=["", "minimal"][rng.integers(2)]),
                float(rng.random())) for _ in range(100)]
    rows = metrics.clip_stats_by_pair(records)
    family_total = sum(r["n"] for r in rows
                       if r["categories"] == ("texture", "color"))
    assert family_total == 100


# ------------------------------------------------------- human-CLIP curve

def test_curve_q1_is_global_mean():
    ratings = [(i, float(1 + i % 5)) for i in range(40)]
    scores = {i: float(i) for i in range(40)}
    points = metrics.human_vs_clip_curve(ratings, scores, [1.0])
    assert points[0]["mean_representativeness"] == pytest.approx(
        np.mean([r for _, r in ratings]))
    assert points[0]["n"] == 40


def test_curve_monotone_for_rank_correlated_data():
    # representativeness == clip rank: curve must be nondecreasing
    ratings = [(i, float(i)) for i in range(50)]
    scores = {i: float(i) for i in range(50)}
    grid = [0.1 * k for k in range(1, 11)]
    points = metrics.human_vs_clip_curve(ratings, scores, grid)
    means = [p["mean_representativeness"] for p in points]
    assert all(a <= b + 1e-12 for a, b in zip(means, means[1:]))


def test_curve_empty_bucket_omitted():
    ratings = [(0, 3.0)]
    scores = {0: 10.0}
    # population quantile sits below every rated score
    points = metrics.human_vs_clip_curve(ratings, scores, [0.0, 1.0],
                                         score_population=[1.0, 2.0, 20.0])
    assert [p["quantile"] for p in points] == [1.0]


def test_curve_empty_ratings():
    assert metrics.human_vs_clip_curve([], {}, [0.5, 1.0]) == []
