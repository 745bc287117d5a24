"""Representation-quality metrics: k-means cluster accuracy and k-NN error.

The clustering protocol: encode a dataset, run k-means on the encodings,
assign each cluster its most represented true label, and score the fraction
of points whose assigned label matches their own. k-NN error is the test-set
misclassification rate of a brute-force k-nearest-neighbour classifier in
representation space.

All distance work is done in f32 with f64 accumulators for the objective
sums. Everything here is a pure function of its inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError
from .network import Network, k_winners


def represent_dataset(net: Network, features: np.ndarray,
                      k: int | None) -> np.ndarray:
    """Encode every row of `features`; returns an (N, R) matrix.

    `k` is the sparsity of the code; pass None to keep raw activations
    (the no-sparsity ablation).
    """
    features = np.asarray(features, dtype=np.float32)
    if features.ndim != 2:
        raise InvalidArgumentError(f"features must be (N, D), got {features.shape}")
    if features.shape[0] == 0:
        return np.zeros((0, net.n_neurons), dtype=np.float32)
    if features.shape[1] != net.input_dim:
        raise InvalidArgumentError(
            f"feature dim {features.shape[1]} does not match input_dim {net.input_dim}")
    if k is not None and not 1 <= k <= net.n_neurons:
        raise InvalidArgumentError(f"k must be in [1, {net.n_neurons}], got {k}")
    # Row-at-a-time on purpose: each row must be bit-identical to the
    # single-vector encoder (a batched GEMM associates differently).
    out = np.empty((features.shape[0], net.n_neurons), dtype=np.float32)
    for i in range(features.shape[0]):
        a = net.activations(features[i])
        out[i] = a if (k is None or k == net.n_neurons) else k_winners(a, k)
    return out


def _pairwise_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances through one GEMM, clamped at zero."""
    d2 = (np.sum(a * a, axis=1, dtype=np.float64)[:, None]
          + np.sum(b * b, axis=1, dtype=np.float64)[None, :]
          - 2.0 * (a @ b.T))
    np.maximum(d2, 0.0, out=d2)
    return d2


@dataclass
class KMeansResult:
    assignments: np.ndarray
    centroids: np.ndarray
    n_iter: int
    sse_history: list[float]

    @property
    def sse(self) -> float:
        return self.sse_history[-1]


def kmeans(points: np.ndarray, n_clusters: int, seed: int = 0,
           max_iters: int = 300, tol: float = 1e-4,
           n_init: int = 10) -> KMeansResult:
    """Best of `n_init` Lloyd runs with k-means++ seeding, deterministic given the seed.

    Each run stops when every centroid moves less than `tol` (Euclidean) or
    after `max_iters` iterations; the run with the lowest final objective
    wins. An empty cluster is re-seeded to the point currently farthest from
    its own centroid. The per-iteration objective of the winning run
    (recorded in sse_history) never increases.
    """
    points = np.asarray(points, dtype=np.float32)
    if points.ndim != 2:
        raise InvalidArgumentError(f"points must be (N, R), got {points.shape}")
    n = points.shape[0]
    if n_clusters < 1:
        raise InvalidArgumentError(f"n_clusters must be >= 1, got {n_clusters}")
    if n < n_clusters:
        raise InvalidArgumentError(f"need at least {n_clusters} points, got {n}")
    if n_init < 1:
        raise InvalidArgumentError(f"n_init must be >= 1, got {n_init}")

    best: KMeansResult | None = None
    for trial_seed in np.random.SeedSequence(seed).spawn(n_init):
        result = _lloyd(points, n_clusters, np.random.default_rng(trial_seed),
                        max_iters, tol)
        if best is None or result.sse < best.sse:
            best = result
    return best


def _lloyd(points: np.ndarray, n_clusters: int, rng: np.random.Generator,
           max_iters: int, tol: float) -> KMeansResult:
    n = points.shape[0]
    centroids = _kmeans_pp_init(points, n_clusters, rng)

    assignments = np.zeros(n, dtype=np.int64)
    history: list[float] = []
    n_iter = 0
    for n_iter in range(1, max_iters + 1):
        d2 = _pairwise_sq_dists(points, centroids)
        assignments = np.argmin(d2, axis=1)
        point_d2 = d2[np.arange(n), assignments]

        counts = np.bincount(assignments, minlength=n_clusters)
        empties = np.flatnonzero(counts == 0)
        if empties.size:
            # Steal the farthest points, one per empty cluster, farthest first.
            order = np.argsort(-point_d2, kind="stable")
            for empty, idx in zip(empties, order[:empties.size]):
                assignments[idx] = empty
                point_d2[idx] = 0.0
            counts = np.bincount(assignments, minlength=n_clusters)

        history.append(float(np.sum(point_d2, dtype=np.float64)))

        sums = np.zeros_like(centroids, dtype=np.float64)
        np.add.at(sums, assignments, points.astype(np.float64))
        new_centroids = centroids.astype(np.float64)  # keep stale rows if a steal emptied a cluster
        nonzero = counts > 0
        new_centroids[nonzero] = sums[nonzero] / counts[nonzero, None]
        new_centroids = new_centroids.astype(np.float32)

        movement = np.sqrt(np.sum((new_centroids - centroids) ** 2, axis=1))
        centroids = new_centroids
        if float(movement.max()) < tol:
            break

    return KMeansResult(assignments=assignments, centroids=centroids,
                        n_iter=n_iter, sse_history=history)


def assign_to_centroids(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Index of the nearest centroid for each point (ties to the lowest index)."""
    points = np.asarray(points, dtype=np.float32)
    centroids = np.asarray(centroids, dtype=np.float32)
    return np.argmin(_pairwise_sq_dists(points, centroids), axis=1)


def _kmeans_pp_init(points: np.ndarray, n_clusters: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Greedy k-means++: several D^2-sampled candidates per step, keep the one
    that minimizes the resulting potential."""
    n = points.shape[0]
    n_trials = 2 + int(np.log(n_clusters)) if n_clusters > 1 else 1
    centroids = np.empty((n_clusters, points.shape[1]), dtype=np.float32)
    first = int(rng.integers(n))
    centroids[0] = points[first]
    closest = _pairwise_sq_dists(points, centroids[:1])[:, 0]
    for c in range(1, n_clusters):
        total = closest.sum()
        if total <= 0:
            # All points coincide with chosen centroids; fall back to uniform.
            candidates = rng.integers(n, size=n_trials)
        else:
            candidates = rng.choice(n, size=n_trials, p=closest / total)
        cand_d = _pairwise_sq_dists(points, points[candidates])
        potentials = np.minimum(closest[:, None], cand_d).sum(axis=0)
        best = int(np.argmin(potentials))
        centroids[c] = points[candidates[best]]
        np.minimum(closest, cand_d[:, best], out=closest)
    return centroids


def cluster_accuracy(assignments: np.ndarray, labels: np.ndarray) -> float:
    """Accuracy (percent) after mapping each cluster to its modal true label.

    Ties between equally represented labels go to the smaller label.
    """
    assignments = np.asarray(assignments)
    labels = np.asarray(labels)
    if assignments.shape != labels.shape:
        raise InvalidArgumentError(
            f"length mismatch: {assignments.shape} vs {labels.shape}")
    if assignments.size == 0:
        return 0.0
    correct = 0
    for cluster in np.unique(assignments):
        member_labels = labels[assignments == cluster]
        counts = np.bincount(member_labels)
        modal = int(np.argmax(counts))  # first max = smallest label
        correct += int(counts[modal])
    return 100.0 * correct / labels.size


def knn_error(train_reps: np.ndarray, train_labels: np.ndarray,
              test_reps: np.ndarray, test_labels: np.ndarray,
              knn_k: int = 10, chunk: int = 512) -> float:
    """Percent of test points misclassified by a brute-force k-NN vote.

    Neighbours are the knn_k nearest training points by Euclidean distance;
    exact distance ties prefer the lower training index, vote ties the
    smaller label.
    """
    train_reps = np.asarray(train_reps, dtype=np.float32)
    test_reps = np.asarray(test_reps, dtype=np.float32)
    train_labels = np.asarray(train_labels)
    test_labels = np.asarray(test_labels)
    n_train = train_reps.shape[0]
    if n_train == 0:
        raise InvalidArgumentError("empty training set")
    if not 1 <= knn_k <= n_train:
        raise InvalidArgumentError(f"knn_k must be in [1, {n_train}], got {knn_k}")

    n_labels = int(train_labels.max()) + 1
    wrong = 0
    for start in range(0, test_reps.shape[0], chunk):
        block = test_reps[start:start + chunk]
        d2 = _pairwise_sq_dists(block, train_reps)
        for i in range(block.shape[0]):
            row = d2[i]
            if knn_k == n_train:
                nearest = np.arange(n_train)
            else:
                kth = np.partition(row, knn_k - 1)[knn_k - 1]
                candidates = np.flatnonzero(row <= kth)
                if candidates.size > knn_k:
                    # Exact ties at the k-th distance: keep lower indices.
                    order = np.lexsort((candidates, row[candidates]))
                    candidates = candidates[order[:knn_k]]
                nearest = candidates
            votes = np.bincount(train_labels[nearest], minlength=n_labels)
            pred = int(np.argmax(votes))  # first max = smallest label
            wrong += int(pred != test_labels[start + i])
    return 100.0 * wrong / test_labels.size if test_labels.size else 0.0


@dataclass
class EvalReport:
    """Metric bundle for one run, serializable for reproduction tables."""

    final_R: int
    frozen_count: int
    seed: int
    config: dict = field(default_factory=dict)
    cluster_accuracy_pct: float | None = None
    knn_error_pct: float | None = None
    n_clusters: int | None = None
    knn_k: int | None = None
    overall_accuracy_pct: float | None = None
    per_task_accuracy_pct: list[float] = field(default_factory=list)
    task_mean_accuracy_pct: float | None = None
    wall_time_s: float = 0.0
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("cluster_accuracy_pct", "knn_error_pct",
                     "overall_accuracy_pct", "task_mean_accuracy_pct"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 100.0:
                raise InvalidArgumentError(f"{name} out of [0, 100]: {value}")
        if self.final_R < self.frozen_count:
            raise InvalidArgumentError(
                f"final_R ({self.final_R}) < frozen_count ({self.frozen_count})")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")


CSV_COLUMNS = [
    "variant", "hebbian", "freezing", "expansion", "kwta",
    "cluster_accuracy_pct", "knn_error_pct", "n_clusters", "knn_k",
    "final_R", "frozen_count", "seed", "wall_time_s",
]


def report_csv_row(report: EvalReport, variant: str = "") -> list[str]:
    """Flatten a report into the fixed CSV column order used by variant grids."""
    ab = report.config.get("ablation", {})

    def cell(value):
        return "" if value is None else str(value)

    return [
        variant,
        cell(ab.get("hebbian")), cell(ab.get("freezing")),
        cell(ab.get("expansion")), cell(ab.get("kwta")),
        cell(report.cluster_accuracy_pct), cell(report.knn_error_pct),
        cell(report.n_clusters), cell(report.knn_k),
        str(report.final_R), str(report.frozen_count),
        str(report.seed), str(report.wall_time_s),
    ]
