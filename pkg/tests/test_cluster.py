import json
import math

import numpy as np
import pytest

from conftest import block_affinity, block_labels
from lassossc.cluster import (
    AffinityGraph,
    ClusterResult,
    build_affinity,
    check_sep_and_trivial,
    clustering_accuracy,
    evaluate_clustering,
    rel_violation,
    spectral_cluster,
)
from lassossc.core import CoefficientMatrix, InvalidInputError, LabelRangeMismatchError
from lassossc.rng import RngSpec, Stream


def coeff(values) -> CoefficientMatrix:
    arr = np.asarray(values, dtype=float)
    np.fill_diagonal(arr, 0.0)
    return CoefficientMatrix(arr)


def test_build_affinity_zero():
    graph = build_affinity(coeff(np.zeros((3, 3))))
    assert np.all(graph.w == 0.0)


def test_build_affinity_symmetrizes_magnitudes():
    c = np.zeros((3, 3))
    c[0, 1] = -0.5
    graph = build_affinity(coeff(c))
    assert graph.w[0, 1] == 0.5 and graph.w[1, 0] == 0.5
    assert np.all(np.diag(graph.w) == 0.0)


def test_build_affinity_preserves_blocks():
    c = np.zeros((4, 4))
    c[0, 1] = c[1, 0] = 0.9
    c[2, 3] = c[3, 2] = -0.4
    graph = build_affinity(coeff(c))
    labels = np.array([0, 0, 1, 1])
    off = graph.w[labels[:, None] != labels[None, :]]
    assert np.all(off == 0.0)


def test_affinity_graph_validation():
    with pytest.raises(InvalidInputError):
        AffinityGraph(np.array([[0.0, 1.0], [0.5, 0.0]]))  # not symmetric
    with pytest.raises(InvalidInputError):
        AffinityGraph(np.array([[0.1, 0.0], [0.0, 0.0]]))  # diagonal
    with pytest.raises(InvalidInputError):
        AffinityGraph(np.array([[0.0, -1.0], [-1.0, 0.0]]))  # negative


def test_spectral_recovers_disconnected_blocks():
    w = block_affinity([5, 7, 4])
    labels = spectral_cluster(w, 3, RngSpec(1))
    assert clustering_accuracy(labels, block_labels([5, 7, 4])) == 1.0


def test_spectral_zero_affinity_flagged_degenerate():
    c = coeff(np.zeros((8, 8)))
    result = evaluate_clustering(c, [0] * 4 + [1] * 4, 2, RngSpec(2))
    assert result.degenerate
    assert result.trivial_columns == 8
    assert math.isinf(result.rel_violation)


def test_spectral_tolerates_small_off_block_mass():
    sizes = [6, 6, 6]
    truth = block_labels(sizes)
    for seed in range(20):
        w = block_affinity(sizes, off_block=0.01, stream=Stream(RngSpec(3, (seed,))))
        labels = spectral_cluster(w, 3, RngSpec(4, (seed,)))
        assert clustering_accuracy(labels, truth) == 1.0


def test_spectral_permutation_equivariance():
    w = block_affinity([4, 5, 6], off_block=0.02)
    truth = np.asarray(block_labels([4, 5, 6]))
    order = np.argsort(Stream(RngSpec(5)).uniforms(w.shape[0]))
    shuffled = w[np.ix_(order, order)]
    base = spectral_cluster(w, 3, RngSpec(6))
    moved = spectral_cluster(shuffled, 3, RngSpec(6))
    assert clustering_accuracy(base, truth) == clustering_accuracy(moved, truth[order])


def test_spectral_rejects_bad_counts():
    with pytest.raises(InvalidInputError):
        spectral_cluster(np.zeros((3, 3)), 4, RngSpec(7))
    with pytest.raises(InvalidInputError):
        spectral_cluster(np.zeros((3, 3)), 1, RngSpec(7))


def test_rel_violation_block_aligned_is_zero():
    c = np.zeros((4, 4))
    c[0, 1] = c[1, 0] = 1.0
    c[2, 3] = c[3, 2] = 0.5
    assert rel_violation(coeff(c), [0, 0, 1, 1]) == 0.0


def test_rel_violation_ratio():
    c = np.zeros((4, 4))
    c[0, 1] = 2.0  # in-mask mass 2.0
    c[0, 2] = 0.5  # off-mask mass 0.5
    assert rel_violation(coeff(c), [0, 0, 1, 1]) == pytest.approx(0.25)


def test_rel_violation_gray_threshold_classification():
    c = np.zeros((4, 4))
    c[0, 1] = 1.0
    c[0, 2] = 0.2
    value = rel_violation(coeff(c), [0, 0, 1, 1])
    assert value > 0.1  # clearly-violated region per the phase-diagram legend


def test_rel_violation_zero_mass_flag():
    assert math.isinf(rel_violation(coeff(np.zeros((3, 3))), [0, 0, 1]))


def test_rel_violation_ignores_sub_threshold_residue():
    c = np.zeros((4, 4))
    c[0, 1] = c[1, 0] = 1.0
    c[2, 0] = 1e-9  # ADMM residue far below the support cutoff
    assert rel_violation(coeff(c), [0, 0, 1, 1]) == 0.0


def test_sep_and_trivial_cases():
    good = np.zeros((4, 4))
    good[0, 1] = good[1, 0] = 1.0
    good[2, 3] = good[3, 2] = 1.0
    assert check_sep_and_trivial(coeff(good), [0, 0, 1, 1]) == (True, 0)

    one_dead = good.copy()
    one_dead[:, 3] = 0.0
    assert check_sep_and_trivial(coeff(one_dead), [0, 0, 1, 1]) == (False, 1)

    crossing = good.copy()
    crossing[2, 1] = 10.0 * 1e-6  # just above the support cutoff
    sep, trivial = check_sep_and_trivial(coeff(crossing), [0, 0, 1, 1])
    assert (sep, trivial) == (False, 0)


def test_sep_implies_zero_rel_violation_random():
    s = Stream(RngSpec(8))
    for trial in range(20):
        sizes = [int(3 + s.integers(1, 4)[0]), int(3 + s.integers(1, 4)[0])]
        labels = block_labels(sizes)
        total = sum(sizes)
        c = np.zeros((total, total))
        mask = np.equal.outer(labels, labels)
        vals = s.normal_matrix(total, total)
        c[mask] = vals[mask]
        c += 1e-10 * s.normal_matrix(total, total)  # sub-threshold residue
        mat = coeff(c)
        sep, trivial = check_sep_and_trivial(mat, labels)
        if sep:
            assert rel_violation(mat, labels) == 0.0


def test_accuracy_basic_cases():
    assert clustering_accuracy([0, 1, 2, 0], [0, 1, 2, 0]) == 1.0
    assert clustering_accuracy([1, 0, 2, 1], [0, 1, 2, 0]) == 1.0  # relabeled
    assert clustering_accuracy([0, 0, 1, 1], [0, 1, 0, 1]) == 0.5


def test_accuracy_hungarian_matches_brute_force():
    s = Stream(RngSpec(9))
    for trial in range(10):
        count = 40
        truth = s.integers(count, 5)
        guess = s.integers(count, 5)
        brute = clustering_accuracy(guess, truth)  # 5 <= 8: permutation path
        # force the assignment path with a disjoint block of high labels; the
        # block is independent, so the optimum decomposes
        padded_truth = np.concatenate([truth, np.arange(9, 18)])
        padded_guess = np.concatenate([guess, np.arange(9, 18)])
        padded = clustering_accuracy(padded_guess, padded_truth)
        assert padded == pytest.approx((brute * count + 9) / (count + 9))


def test_accuracy_validation():
    with pytest.raises(LabelRangeMismatchError):
        clustering_accuracy([0, 1], [0, 1, 2])
    with pytest.raises(LabelRangeMismatchError):
        clustering_accuracy([0, -1], [0, 1])


def test_laplacian_eigendecomposition_reconstructs():
    s = Stream(RngSpec(10))
    w = np.abs(s.normal_matrix(50, 50))
    w = 0.5 * (w + w.T)
    np.fill_diagonal(w, 0.0)
    degrees = np.maximum(w.sum(axis=0), 1e-12)
    inv_sqrt = 1.0 / np.sqrt(degrees)
    lap = np.eye(50) - (inv_sqrt[:, None] * w) * inv_sqrt[None, :]
    lap = 0.5 * (lap + lap.T)
    vals, vecs = np.linalg.eigh(lap)
    assert np.linalg.norm(vecs @ np.diag(vals) @ vecs.T - lap) <= 1e-8


def test_cluster_result_json_round_trip(tmp_path):
    result = ClusterResult(
        assignments=(0, 1, 1),
        accuracy=1.0,
        rel_violation=0.0,
        sep_holds=True,
        trivial_columns=0,
        lam=3.5,
        seed=9,
    )
    path = tmp_path / "cluster.json"
    result.save(path)
    again = ClusterResult.from_json(json.loads(path.read_text()))
    assert again == result
    infinite = ClusterResult(
        assignments=(0,),
        accuracy=0.0,
        rel_violation=math.inf,
        sep_holds=False,
        trivial_columns=1,
    )
    assert math.isinf(ClusterResult.from_json(infinite.to_json()).rel_violation)
