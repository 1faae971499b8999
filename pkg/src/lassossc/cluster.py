"""Affinity construction, spectral clustering, and success metrics.

The clustering pipeline is the standard one: symmetrize the coefficient
magnitudes into W = |C| + |C|', form the symmetric normalized Laplacian, embed
into the bottom eigenvectors, row-normalize, and run seeded k-means++ with
restarts.  Success metrics follow the self-expressiveness view: a coefficient
matrix succeeds when its above-threshold entries connect only same-label
columns and no column is all zero.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .core import (
    CoefficientMatrix,
    EigenFailureError,
    InvalidInputError,
    LabelRangeMismatchError,
    as_matrix,
    support_cutoff,
)
from .rng import RngSpec, Stream

DEGREE_EPS = 1e-12
KMEANS_RESTARTS = 10
KMEANS_MAX_ITER = 300
GRAY_THRESHOLD = 0.1  # classification threshold for "clearly violated"


@dataclass(frozen=True)
class AffinityGraph:
    """Symmetric nonnegative affinity with zero diagonal."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise InvalidInputError("affinity must be square")
        if np.any(w != w.T):
            raise InvalidInputError("affinity must be exactly symmetric")
        if np.any(np.diag(w) != 0.0):
            raise InvalidInputError("affinity diagonal must be zero")
        if np.any(w < 0.0):
            raise InvalidInputError("affinity entries must be nonnegative")
        object.__setattr__(self, "w", w)

    @property
    def N(self) -> int:
        return self.w.shape[0]


def build_affinity(c) -> AffinityGraph:
    """W = |C| + |C|' entrywise."""
    cv = as_matrix(c)
    return AffinityGraph(np.abs(cv) + np.abs(cv).T)


def _cleaned(c) -> np.ndarray:
    """Zero the sub-threshold entries of each coefficient column."""
    cv = as_matrix(c).copy()
    for j in range(cv.shape[1]):
        cutoff = support_cutoff(cv[:, j])
        col = cv[:, j]
        col[np.abs(col) <= cutoff] = 0.0
    return cv


def _kmeans_once(points: np.ndarray, k: int, stream: Stream) -> tuple[np.ndarray, float]:
    count = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[int(stream.integers(1, count)[0])]
    dist_sq = np.sum((points - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        centers[j] = points[stream.choice_weighted(dist_sq)]
        dist_sq = np.minimum(dist_sq, np.sum((points - centers[j]) ** 2, axis=1))

    labels = np.zeros(count, dtype=int)
    for _ in range(KMEANS_MAX_ITER):
        distances = (
            np.sum(points**2, axis=1)[:, None]
            - 2.0 * points @ centers.T
            + np.sum(centers**2, axis=1)[None, :]
        )
        new_labels = np.argmin(distances, axis=1)
        for j in range(k):
            members = new_labels == j
            if np.any(members):
                centers[j] = points[members].mean(axis=0)
            else:
                # repopulate an empty cluster with the worst-fit point
                worst = int(np.argmax(np.min(distances, axis=1)))
                centers[j] = points[worst]
                new_labels[worst] = j
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
    inertia = float(np.sum((points - centers[labels]) ** 2))
    return labels, inertia


def spectral_cluster(w, num_clusters: int, rng: RngSpec) -> np.ndarray:
    """Cluster an affinity graph into num_clusters groups.

    Normalized-Laplacian embedding into the num_clusters smallest eigenvectors,
    row normalization, then seeded k-means++ with 10 restarts; the restart with
    the lowest inertia wins (first one on ties).
    """
    wv = w.w if isinstance(w, AffinityGraph) else np.asarray(w, dtype=float)
    count = wv.shape[0]
    if num_clusters < 2 or count < num_clusters:
        raise InvalidInputError("need 2 <= L <= N")
    degrees = np.maximum(wv.sum(axis=0), DEGREE_EPS)
    inv_sqrt = 1.0 / np.sqrt(degrees)
    lap = np.eye(count) - (inv_sqrt[:, None] * wv) * inv_sqrt[None, :]
    lap = 0.5 * (lap + lap.T)
    try:
        _, vectors = np.linalg.eigh(lap)
    except np.linalg.LinAlgError as exc:
        raise EigenFailureError("eigendecomposition of the Laplacian failed") from exc
    embedding = vectors[:, :num_clusters]
    row_norms = np.linalg.norm(embedding, axis=1)
    keep = row_norms > 1e-12
    embedding = embedding.copy()
    embedding[keep] /= row_norms[keep, None]

    stream = Stream(rng)
    best_labels, best_inertia = None, math.inf
    for restart in range(KMEANS_RESTARTS):
        labels, inertia = _kmeans_once(embedding, num_clusters, stream.spawn("kmeans", restart))
        if inertia < best_inertia - 1e-15:
            best_labels, best_inertia = labels, inertia
    return best_labels


def rel_violation(c, labels) -> float:
    """Off-mask l1 mass over in-mask mass of the cleaned coefficients.

    The mask keeps entries (i, j) with label(i) == label(j); zero means the
    self-expressiveness property holds.  Returns inf when the in-mask mass is
    zero (nothing to violate against).
    """
    cv = np.abs(_cleaned(c))
    labels = np.asarray(labels)
    if labels.shape[0] != cv.shape[0]:
        raise LabelRangeMismatchError("labels length must match the matrix size")
    mask = labels[:, None] == labels[None, :]
    in_mass = float(cv[mask].sum())
    off_mass = float(cv[~mask].sum())
    if in_mass <= 0.0:
        return math.inf
    return off_mass / in_mass


def check_sep_and_trivial(c, labels) -> tuple[bool, int]:
    """(sep_holds, trivial_columns) of a coefficient matrix.

    A column is trivial when every entry is sub-threshold; sep_holds needs
    zero trivial columns and every surviving entry connecting same-label
    columns.
    """
    cv = _cleaned(c)
    labels = np.asarray(labels)
    trivial = int(np.sum(~np.any(cv != 0.0, axis=0)))
    rows, cols = np.nonzero(cv)
    cross = np.any(labels[rows] != labels[cols]) if rows.size else False
    return (trivial == 0 and not cross), trivial


def clustering_accuracy(assignments, truth) -> float:
    """Best label agreement over relabelings of the assignments.

    Exhausts all permutations up to 8 clusters and solves the assignment
    problem on the confusion matrix beyond that (both give the optimum).
    """
    a = np.asarray(assignments, dtype=int)
    b = np.asarray(truth, dtype=int)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise LabelRangeMismatchError("labelings must be equal-length nonempty vectors")
    if a.min() < 0 or b.min() < 0:
        raise LabelRangeMismatchError("labels must be nonnegative")
    num = int(max(a.max(), b.max())) + 1
    confusion = np.zeros((num, num), dtype=int)
    np.add.at(confusion, (a, b), 1)
    if num <= 8:
        best = max(
            sum(confusion[perm[t], t] for t in range(num))
            for perm in itertools.permutations(range(num))
        )
    else:
        rows, cols = scipy.optimize.linear_sum_assignment(-confusion)
        best = int(confusion[rows, cols].sum())
    return float(best) / float(a.size)


@dataclass(frozen=True)
class ClusterResult:
    """End-to-end clustering outcome for one coefficient matrix."""

    assignments: tuple[int, ...]
    accuracy: float
    rel_violation: float
    sep_holds: bool
    trivial_columns: int
    degenerate: bool = False
    lam: float | None = None
    seed: int | None = None

    def to_json(self) -> dict:
        return {
            "assignments": list(self.assignments),
            "accuracy": self.accuracy,
            "rel_violation": None if math.isinf(self.rel_violation) else self.rel_violation,
            "sep_holds": self.sep_holds,
            "trivial_columns": self.trivial_columns,
            "degenerate": self.degenerate,
            "lambda": self.lam,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "ClusterResult":
        rv = payload["rel_violation"]
        return cls(
            assignments=tuple(payload["assignments"]),
            accuracy=payload["accuracy"],
            rel_violation=math.inf if rv is None else rv,
            sep_holds=payload["sep_holds"],
            trivial_columns=payload["trivial_columns"],
            degenerate=payload.get("degenerate", False),
            lam=payload.get("lambda"),
            seed=payload.get("seed"),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")


def evaluate_clustering(
    c: CoefficientMatrix,
    truth,
    num_clusters: int,
    rng: RngSpec,
    lam: float | None = None,
    seed: int | None = None,
) -> ClusterResult:
    """Run the full pipeline on a solved coefficient matrix."""
    graph = build_affinity(c)
    degenerate = float(graph.w.sum()) <= DEGREE_EPS
    assignments = spectral_cluster(graph, num_clusters, rng)
    sep_holds, trivial = check_sep_and_trivial(c, truth)
    return ClusterResult(
        assignments=tuple(int(v) for v in assignments),
        accuracy=clustering_accuracy(assignments, truth),
        rel_violation=rel_violation(c, truth),
        sep_holds=sep_holds,
        trivial_columns=trivial,
        degenerate=degenerate,
        lam=lam,
        seed=seed,
    )
