import numpy as np
import pytest

from gesturempc.vocab import cluster_table, kmeans, separability_report


def _blobs(seed=0, n_per=20, spread=0.15):
    rng = np.random.default_rng(seed)
    centers = np.array([[0, 0], [8, 0], [0, 8], [8, 8]], dtype=float)
    pts, labels = [], []
    for i, c in enumerate(centers):
        pts.append(c + rng.normal(0, spread, size=(n_per, 2)))
        labels += [("A", "B", "C", "E")[i]] * n_per
    return np.vstack(pts), labels


def test_four_blobs_pure_clusters():
    pts, labels = _blobs()
    assignment = kmeans(pts, k=4, seed=1)
    report = separability_report(assignment, labels)
    assert report["separable"]
    for sym, row in report["per_symbol"].items():
        assert row["purity"] == 1.0
    # inertia below the within-blob variance budget
    assert assignment.inertia < 80 * 2 * 0.15**2 * 4


def test_k_equals_one_centroid_is_mean():
    pts = np.random.default_rng(2).normal(0, 1, size=(50, 3))
    assignment = kmeans(pts, k=1, seed=0)
    assert np.allclose(assignment.centroids[0], pts.mean(axis=0))


def test_duplicate_points_each_own_cluster():
    pts = np.array([[0.0, 0.0]] * 5 + [[5.0, 5.0]] * 5)
    assignment = kmeans(pts, k=2, seed=3)
    left = set(assignment.labels[:5].tolist())
    right = set(assignment.labels[5:].tolist())
    assert len(left) == 1 and len(right) == 1 and left != right


def test_k_larger_than_points_rejected():
    with pytest.raises(ValueError):
        kmeans(np.zeros((3, 2)), k=4)


def test_inertia_non_increasing():
    pts, _ = _blobs(seed=5, spread=1.5)
    assignment = kmeans(pts, k=4, seed=7)
    hist = assignment.inertia_history
    assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))


def test_permutation_invariance_on_separable_fixture():
    pts, labels = _blobs(seed=6)
    base = kmeans(pts, k=4, seed=9)
    perm = np.random.default_rng(10).permutation(len(pts))
    permuted = kmeans(pts[perm], k=4, seed=9)
    # compare partitions as sets of point-index groups
    def partition(assigned, order):
        groups = {}
        for point, cluster in zip(order, assigned.labels):
            groups.setdefault(int(cluster), set()).add(int(point))
        return sorted((frozenset(g) for g in groups.values()), key=sorted)

    assert partition(base, range(len(pts))) == partition(permuted, perm)


def test_merged_symbols_flagged():
    rng = np.random.default_rng(11)
    # B and D overlap deliberately
    pts = np.vstack(
        [
            rng.normal((0, 0), 0.1, size=(15, 2)),
            rng.normal((6, 6), 0.1, size=(15, 2)),
            rng.normal((6.1, 6.1), 0.1, size=(15, 2)),
            rng.normal((0, 6), 0.1, size=(15, 2)),
        ]
    )
    labels = ["A"] * 15 + ["B"] * 15 + ["D"] * 15 + ["C"] * 15
    report = separability_report(kmeans(pts, k=3, seed=4), labels)
    assert ["B", "D"] in report["shared_clusters"]
    assert not report["separable"]


def test_empty_labels_error():
    pts, _ = _blobs()
    with pytest.raises(ValueError):
        separability_report(kmeans(pts, k=2, seed=0), [])


def test_deterministic_under_seed():
    pts, _ = _blobs(seed=12, spread=1.0)
    a = kmeans(pts, k=4, seed=21)
    b = kmeans(pts, k=4, seed=21)
    assert np.array_equal(a.labels, b.labels)
    assert np.allclose(a.centroids, b.centroids)


def test_cluster_table_grouped_by_user():
    pts, labels = _blobs(seed=13)
    users = ["u1"] * 40 + ["u2"] * 40
    rows = cluster_table(pts, labels, users=users, k=2, seed=2)
    assert [r["group"] for r in rows] == ["u1", "u2"]
    for row in rows:
        members = [m for v in row["clusters"].values() for m in v]
        assert sorted(members) == sorted(set(members))


def test_pooled_separability_at_protocol_scale():
    # the selected vocabulary must occupy distinct clusters when features
    # from all users are pooled
    from gesturempc.features import extract_many, fit_standardizer
    from gesturempc.segmentation import segment
    from gesturempc.synthetic import make_gesture_dataset

    feats, labels = [], []
    for _, trace, truth in make_gesture_dataset(users=4, reps=6, seed=0):
        windows = segment(trace)
        feats.append(extract_many(windows))
        labels += [t["symbol"] for t in truth]
    standardized = fit_standardizer(np.vstack(feats)).apply(np.vstack(feats))
    report = separability_report(kmeans(standardized, k=4, seed=0), labels)
    assert report["separable"], report
    assert all(row["purity"] >= 0.9 for row in report["per_symbol"].values())
