"""Gesture-vocabulary selection by K-means over feature vectors.

Lloyd iterations seeded by distance-weighted random selection of distinct
points.  Candidates are drawn from the lexicographically sorted unique
rows, so a fixed seed gives the same initial centroids (and therefore the
same final partition) no matter how the input rows are ordered.  An
emptied cluster is re-seeded from the point farthest from its assigned
centroid.  The separability report scores how cleanly each symbol owns a
cluster and flags symbols that collapse into a shared one, the criterion
used to prune confusable symbols from the vocabulary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ClusterAssignment:
    centroids: np.ndarray          # (k, d)
    labels: np.ndarray             # (n,) cluster index per point
    inertia: float
    n_iter: int
    inertia_history: list


def _distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return np.linalg.norm(points[:, None, :] - centroids[None, :, :], axis=2)


def _init_centroids(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    unique = np.unique(points, axis=0)
    if len(unique) <= k:
        reps = -(-k // len(unique))
        return np.tile(unique, (reps, 1))[:k].astype(np.float64)
    first = int(rng.integers(0, len(unique)))
    chosen = [unique[first]]
    d2 = np.sum((unique - chosen[0]) ** 2, axis=1)
    for _ in range(k - 1):
        weights = d2 / d2.sum() if d2.sum() > 0 else np.full(len(unique), 1 / len(unique))
        idx = int(rng.choice(len(unique), p=weights))
        chosen.append(unique[idx])
        d2 = np.minimum(d2, np.sum((unique - chosen[-1]) ** 2, axis=1))
    return np.array(chosen, dtype=np.float64)


def kmeans(points, k: int = 4, seed: int = 0, max_iter: int = 300,
           n_restarts: int = 8) -> ClusterAssignment:
    """Best-of-n_restarts Lloyd runs (lowest inertia wins, ties to the
    earliest restart), deterministic under the seed."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if k > n:
        raise ValueError(f"k={k} exceeds point count {n}")
    best = None
    for restart in range(max(1, n_restarts)):
        rng = np.random.default_rng(np.random.SeedSequence((seed, restart)))
        candidate = _lloyd(points, k, rng, max_iter)
        if best is None or candidate.inertia < best.inertia:
            best = candidate
    return best


def _lloyd(points: np.ndarray, k: int, rng: np.random.Generator,
           max_iter: int) -> ClusterAssignment:
    n = points.shape[0]
    centroids = _init_centroids(points, k, rng)
    labels = np.full(n, -1)
    history = []
    for iteration in range(1, max_iter + 1):
        dist = _distances(points, centroids)
        new_labels = np.argmin(dist, axis=1)

        for c in range(k):
            if not np.any(new_labels == c):
                # re-seed an empty cluster from the farthest point
                farthest = int(np.argmax(dist[np.arange(n), new_labels]))
                new_labels[farthest] = c
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            centroids[c] = points[labels == c].mean(axis=0)
        history.append(float(np.sum((points - centroids[labels]) ** 2)))

    inertia = float(np.sum((points - centroids[labels]) ** 2))
    return ClusterAssignment(
        centroids=centroids, labels=labels, inertia=inertia,
        n_iter=iteration, inertia_history=history,
    )


def separability_report(assignment: ClusterAssignment, labels) -> dict:
    """Per-symbol cluster purity plus a flag for symbols sharing clusters."""
    labels = list(labels)
    if not labels:
        raise ValueError("empty label set")
    if len(labels) != len(assignment.labels):
        raise ValueError("label count does not match clustered points")

    symbols = sorted(set(labels))
    per_symbol = {}
    home = {}
    for sym in symbols:
        clusters = assignment.labels[np.array([l == sym for l in labels])]
        counts = np.bincount(clusters, minlength=len(assignment.centroids))
        dominant = int(np.argmax(counts))
        per_symbol[sym] = {
            "dominant_cluster": dominant,
            "purity": float(counts[dominant] / counts.sum()),
            "count": int(counts.sum()),
        }
        home[sym] = dominant

    shared: dict = {}
    for sym, cluster in home.items():
        shared.setdefault(cluster, []).append(sym)
    collisions = sorted(
        tuple(sorted(group)) for group in shared.values() if len(group) > 1
    )
    return {
        "per_symbol": per_symbol,
        "shared_clusters": [list(g) for g in collisions],
        "separable": not collisions,
    }


def cluster_table(points, labels, users=None, k: int = 4, seed: int = 0) -> list:
    """Rows of cluster membership, optionally grouped per user.

    Each row maps cluster index -> sorted member symbols, shaped like a
    per-user clustering summary table.
    """
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    groups = [("all", np.ones(len(labels), dtype=bool))]
    if users is not None:
        users = np.asarray(users)
        groups = [(u, users == u) for u in sorted(set(users.tolist()))]
    rows = []
    for group_name, mask in groups:
        assignment = kmeans(points[mask], k=min(k, int(mask.sum())), seed=seed)
        members: dict = {c: [] for c in range(len(assignment.centroids))}
        for sym in sorted(set(labels[mask].tolist())):
            sym_mask = labels[mask] == sym
            counts = np.bincount(
                assignment.labels[sym_mask], minlength=len(assignment.centroids)
            )
            members[int(np.argmax(counts))].append(str(sym))
        rows.append({"group": str(group_name), "clusters": {str(c): v for c, v in members.items()}})
    return rows
