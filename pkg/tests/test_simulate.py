import json

import numpy as np
import pytest

from conftest import coordinate_basis, random_basis
from lassossc.core import InvalidSpecError
from lassossc.geometry import estimate_inradius
from lassossc.rng import RngSpec, Stream
from lassossc.simulate import (
    ModelSpec,
    NoiseSpec,
    cap_bound,
    chi_square_bound,
    gaussian_norm_check,
    generate,
    load_dataset,
    save_dataset,
    spherical_cap_check,
)

FIG7_SPEC = ModelSpec(
    model="fully_random",
    n=100,
    dims=(4,) * 3,
    kappa=5.0,
    noise=NoiseSpec(kind="gaussian", sigma=0.2),
)


def membership_error(dataset) -> float:
    worst = 0.0
    for i, label in enumerate(dataset.labels):
        u = dataset.ensemble.bases[label]
        y = dataset.clean.values[:, i]
        worst = max(worst, float(np.linalg.norm(y - u @ (u.T @ y))))
    return worst


def test_noiseless_generation_is_clean_and_on_subspace():
    spec = ModelSpec(model="fully_random", n=20, dims=(3, 2), kappa=4.0)
    ds = generate(spec, RngSpec(1))
    assert np.array_equal(ds.data.values, ds.clean.values)
    norms = np.linalg.norm(ds.data.values, axis=0)
    assert np.max(np.abs(norms - 1.0)) <= 1e-12
    assert membership_error(ds) <= 1e-10


def test_reference_noise_setting_shapes_and_concentration():
    ds = generate(FIG7_SPEC, RngSpec(2))
    assert ds.data.N == 60
    assert ds.data.n == 100
    assert list(sorted(set(ds.labels))) == [0, 1, 2]
    noise_norms = np.linalg.norm(ds.data.values - ds.clean.values, axis=0)
    assert abs(float(np.mean(noise_norms)) - 0.2) <= 0.02


def test_generation_is_bit_deterministic():
    a = generate(FIG7_SPEC, RngSpec(3))
    b = generate(FIG7_SPEC, RngSpec(3))
    assert np.array_equal(a.data.values, b.data.values)
    assert np.array_equal(a.clean.values, b.clean.values)
    assert a.labels == b.labels
    different = generate(FIG7_SPEC, RngSpec(4))
    assert not np.array_equal(a.data.values, different.data.values)


@pytest.mark.parametrize("policy", ["toward_nearest_other_subspace", "random_fixed_norm"])
def test_adversarial_noise_has_exact_norm(policy):
    spec = ModelSpec(
        model="fully_random",
        n=15,
        dims=(2, 2),
        kappa=5.0,
        noise=NoiseSpec(kind="adversarial", delta=0.07, policy=policy),
    )
    ds = generate(spec, RngSpec(5))
    norms = np.linalg.norm(ds.data.values - ds.clean.values, axis=0)
    assert np.max(np.abs(norms - 0.07)) <= 1e-12


def test_adversarial_direction_leaves_own_subspace():
    spec = ModelSpec(
        model="fully_random",
        n=15,
        dims=(2, 2),
        kappa=5.0,
        noise=NoiseSpec(kind="adversarial", delta=0.1),
    )
    ds = generate(spec, RngSpec(6))
    noise = ds.data.values - ds.clean.values
    for i, label in enumerate(ds.labels):
        u = ds.ensemble.bases[label]
        in_span = np.linalg.norm(u.T @ noise[:, i])
        assert in_span <= 1e-10  # the push is orthogonal to the own subspace


def test_gaussian_noise_isotropy():
    n, draws = 10, 10_000
    sigma = 0.5
    z = (sigma / np.sqrt(n)) * Stream(RngSpec(7)).normal_matrix(n, draws)
    cov = z @ z.T / draws
    off = cov - np.diag(np.diag(cov))
    assert np.max(np.abs(off)) <= 5.0 * sigma**2 / np.sqrt(draws)


def test_normalize_noisy_flag():
    spec = ModelSpec(
        model="fully_random",
        n=30,
        dims=(2, 2),
        kappa=5.0,
        noise=NoiseSpec(kind="gaussian", sigma=0.4),
        normalize_noisy=True,
    )
    ds = generate(spec, RngSpec(8))
    assert np.max(np.abs(np.linalg.norm(ds.data.values, axis=0) - 1.0)) <= 1e-12


def test_deterministic_subspaces_model():
    s = Stream(RngSpec(9))
    bases = (random_basis(s, 12, 2), random_basis(s, 12, 3))
    spec = ModelSpec(
        model="deterministic_subspaces", n=12, dims=(2, 3), counts=(8, 9), bases=bases
    )
    a = generate(spec, RngSpec(10))
    b = generate(spec, RngSpec(11))
    # samples do not depend on the seed: the data model is fully deterministic
    assert np.array_equal(a.clean.values, b.clean.values)
    assert membership_error(a) <= 1e-10
    assert np.max(np.abs(np.linalg.norm(a.clean.values, axis=0) - 1.0)) <= 1e-12


def test_deterministic_line_subspace_alternates():
    basis = coordinate_basis(6, [2])
    spec = ModelSpec(
        model="deterministic_subspaces", n=6, dims=(1,), counts=(4,), bases=(basis,)
    )
    ds = generate(spec, RngSpec(12))
    coords = basis.T @ ds.clean.values
    assert np.allclose(coords.ravel(), [1.0, -1.0, 1.0, -1.0])


def test_semi_random_needs_bases_and_uses_them():
    with pytest.raises(InvalidSpecError):
        ModelSpec(model="semi_random", n=10, dims=(2,), kappa=5.0)
    basis = coordinate_basis(10, [0, 1])
    spec = ModelSpec(model="semi_random", n=10, dims=(2,), kappa=5.0, bases=(basis,))
    ds = generate(spec, RngSpec(13))
    assert membership_error(ds) <= 1e-10
    other = generate(spec, RngSpec(14))
    assert not np.array_equal(ds.clean.values, other.clean.values)


def test_spec_validation_errors():
    with pytest.raises(InvalidSpecError):
        ModelSpec(model="fully_random", n=5, dims=(5,), kappa=3.0)  # d == n
    with pytest.raises(InvalidSpecError):
        ModelSpec(model="fully_random", n=5, dims=(2,))  # no counts, no kappa
    with pytest.raises(InvalidSpecError):
        ModelSpec(model="fully_random", n=5, dims=(2,), counts=(1,))  # too few samples
    with pytest.raises(InvalidSpecError):
        NoiseSpec(kind="gaussian", sigma=-0.1)
    with pytest.raises(InvalidSpecError):
        NoiseSpec(kind="adversarial", policy="nonsense")


def test_model_spec_json_round_trip():
    payload = FIG7_SPEC.to_json()
    again = ModelSpec.from_json(json.loads(json.dumps(payload)))
    assert again == FIG7_SPEC
    basis = coordinate_basis(10, [0, 1])
    with_bases = ModelSpec(
        model="semi_random", n=10, dims=(2,), kappa=5.0, bases=(basis,)
    )
    round_tripped = ModelSpec.from_json(with_bases.to_json())
    assert np.array_equal(round_tripped.bases[0], basis)


def test_spherical_cap_epsilon_one_never_exceeds():
    assert spherical_cap_check(20, 2000, 1.0, RngSpec(15)) == 0.0


def test_spherical_cap_circle_arc_fraction():
    rate = spherical_cap_check(2, 100_000, 0.5, RngSpec(16))
    exact = 2.0 / 3.0
    sigma_binom = np.sqrt(exact * (1 - exact) / 100_000)
    assert abs(rate - exact) <= 4.0 * sigma_binom


def test_spherical_cap_bound_high_dimension():
    n, eps, trials = 100, 0.3, 10_000
    rate = spherical_cap_check(n, trials, eps, RngSpec(17))
    bound = cap_bound(n, eps)
    sigma_binom = np.sqrt(max(bound, 1.0 / trials) * (1 - bound) / trials)
    assert rate <= bound + 3.0 * sigma_binom


def test_spherical_cap_requires_enough_trials():
    with pytest.raises(Exception):
        spherical_cap_check(10, 10, 0.5, RngSpec(18))


def test_gaussian_norm_check_zero_sigma():
    assert gaussian_norm_check(50, 60, 0.0, 2000, RngSpec(19)) == 0.0


def test_gaussian_norm_check_against_bound():
    n, total, trials = 100, 60, 10_000
    t = 6.0 * np.log(total) / n
    rate = gaussian_norm_check(n, total, 1.0, trials, RngSpec(20))
    bound = chi_square_bound(n, t)
    margin = 3.0 * np.sqrt(bound * (1 - bound) / trials)
    assert rate <= bound + margin


def test_gaussian_norm_mean_is_chi_square_mean():
    n, trials = 100, 5000
    sigma = 0.7
    z = (sigma / np.sqrt(n)) * Stream(RngSpec(21)).normal_matrix(n, trials)
    mean_sq = float(np.mean(np.sum(z * z, axis=0)))
    tolerance = 3.0 * np.sqrt(2.0 / n) * sigma**2 / np.sqrt(trials) * np.sqrt(n)
    assert abs(mean_sq - sigma**2) <= tolerance


@pytest.mark.slow
def test_random_sample_inradius_bound():
    # estimated leave-one-out inradius should clear c(kappa) sqrt(beta log
    # kappa / d) with beta = 0.5 in at least 90% of seeded planar trials
    kappa, d = 5.0, 2
    bound = (1.0 / np.sqrt(8.0)) * np.sqrt(0.5 * np.log(kappa) / d)
    hits = 0
    trials = 50
    for seed in range(trials):
        spec = ModelSpec(model="fully_random", n=30, dims=(d,), kappa=kappa)
        ds = generate(spec, RngSpec(300 + seed))
        cols = ds.clean.values
        basis = ds.ensemble.bases[0]
        worst = min(
            estimate_inradius(np.delete(cols, i, axis=1), basis)
            for i in range(cols.shape[1])
        )
        hits += worst >= bound
    assert hits >= 45


def test_save_and_load_dataset(tmp_path):
    ds = generate(FIG7_SPEC, RngSpec(22))
    save_dataset(ds, FIG7_SPEC, 22, tmp_path)
    for name in ("data.csv", "clean.csv", "labels.txt", "ensemble.json", "spec.json"):
        assert (tmp_path / name).exists()
    loaded = load_dataset(
        tmp_path / "data.csv",
        tmp_path / "labels.txt",
        tmp_path / "clean.csv",
        tmp_path / "ensemble.json",
    )
    assert np.array_equal(loaded.data.values, ds.data.values)
    assert loaded.labels == ds.labels
    assert np.allclose(loaded.ensemble.bases[0], ds.ensemble.bases[0])
    spec_payload = json.loads((tmp_path / "spec.json").read_text())
    assert spec_payload["seed"] == 22
    assert ModelSpec.from_json(spec_payload) == FIG7_SPEC
