import numpy as np
import pytest

from ptd import tav
from ptd.errors import ConfigError
from ptd.store import FeatureMatrix, ImageRecord


def record(image_id, texture):
    return ImageRecord(image_id=image_id, prompt_id=image_id, seed=0,
                       attempt=1, flagged=False, file_path="", width=8,
                       height=8, texture_class=texture)


def probs_matrix(rows, ids):
    return FeatureMatrix("classifier_probs",
                         np.asarray(rows, dtype=np.float32),
                         {i: n for n, i in enumerate(ids)})


def test_degenerate_distribution():
    records = [record(i, "braided") for i in range(3)]
    probs = probs_matrix([[1.0, 0.0]] * 3, [0, 1, 2])
    table = tav.compute_tav(records, probs, ["knot", "rope"])
    assert table.row("braided")[0] == pytest.approx(1.0)


def test_hand_mean():
    records = [record(0, "woven"), record(1, "woven")]
    probs = probs_matrix([[0.6, 0.4], [0.2, 0.8]], [0, 1])
    table = tav.compute_tav(records, probs, ["a", "b"])
    np.testing.assert_allclose(table.row("woven"), [0.4, 0.6], atol=1e-7)


def test_matches_bruteforce_means():
    rng = np.random.default_rng(11)
    textures = [f"class{i}" for i in range(5)]
    records, rows, ids = [], [], []
    for i in range(60):
        records.append(record(i, textures[i % 5]))
        rows.append(rng.dirichlet(np.ones(7)))
        ids.append(i)
    probs = probs_matrix(rows, ids)
    table = tav.compute_tav(records, probs, [f"obj{j}" for j in range(7)])

    for t_idx, texture in enumerate(sorted(textures)):
        members = [i for i in range(60)
                   if records[i].texture_class == texture]
        for j in range(7):
            want = sum(float(probs.values[i][j]) for i in members) / len(
                members)
            assert table.row(texture)[j] == pytest.approx(want, abs=1e-7)


def test_rows_sum_to_one():
    rng = np.random.default_rng(3)
    records = [record(i, "woven") for i in range(10)]
    probs = probs_matrix(rng.dirichlet(np.ones(20), size=10), list(range(10)))
    table = tav.compute_tav(records, probs, [f"o{j}" for j in range(20)])
    assert abs(table.row("woven").sum() - 1.0) <= 1e-5


def test_image_order_invariant():
    rng = np.random.default_rng(6)
    records = [record(i, "scaly") for i in range(8)]
    rows = rng.dirichlet(np.ones(4), size=8)
    probs = probs_matrix(rows, list(range(8)))
    a = tav.compute_tav(records, probs, list("abcd"))
    b = tav.compute_tav(records[::-1], probs, list("abcd"))
    np.testing.assert_allclose(a.values, b.values)


def test_non_simplex_rows_rejected():
    records = [record(0, "woven")]
    probs = probs_matrix([[0.5, 0.3]], [0])
    with pytest.raises(ConfigError):
        tav.compute_tav(records, probs, ["a", "b"])


def test_empty_class_warns_and_omits():
    records = [record(0, "woven"), record(1, "scaly")]
    probs = probs_matrix([[1.0, 0.0]], [0])  # no probs for image 1
    with pytest.warns(UserWarning, match="scaly"):
        table = tav.compute_tav(records, probs, ["a", "b"])
    assert table.texture_classes == ["woven"]


def test_top_k_sorting_and_tie_rule():
    table = tav.AssociationTable(
        ["woven"], ["c", "a", "b", "d"],
        np.array([[0.25, 0.25, 0.25, 0.25]]))
    top = tav.top_k_associations(table, k=3)
    assert [label for label, _ in top["woven"]] == ["a", "b", "c"]


def test_top_k_hand_sorted():
    table = tav.AssociationTable(
        ["braided"], ["knot", "rope", "mat"],
        np.array([[0.7, 0.1, 0.2]]))
    top = tav.top_k_associations(table, k=3)
    assert top["braided"] == [("knot", pytest.approx(0.7)),
                              ("mat", pytest.approx(0.2)),
                              ("rope", pytest.approx(0.1))]


def test_top_k_exceeding_labels():
    table = tav.AssociationTable(["x"], ["a"], np.array([[1.0]]))
    with pytest.raises(ConfigError):
        tav.top_k_associations(table, k=2)
