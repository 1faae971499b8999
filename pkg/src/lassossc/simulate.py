"""Seeded generators for union-of-subspace data and noise models.

Three data models are supported:

- ``fully_random``: subspace bases drawn Haar-uniform, samples uniform on each
  subspace's unit sphere;
- ``semi_random``: caller-supplied deterministic bases, random samples;
- ``deterministic_subspaces``: caller-supplied bases with deterministic
  low-discrepancy (Halton) samples, giving a noise-free reproducible instance
  of the fully deterministic model.

Noise is either Gaussian with entry variance sigma^2 / n, or adversarial with
every noise column of norm exactly delta under a named placement policy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from .core import (
    DataMatrix,
    InvalidInputError,
    InvalidSpecError,
    LabeledDataset,
    SubspaceEnsemble,
    normalize_columns,
    orthonormal_basis,
    read_labels,
    write_labels,
)
from .rng import RngSpec, Stream

ADVERSARIAL_POLICIES = ("toward_nearest_other_subspace", "random_fixed_norm")
MODELS = ("fully_random", "semi_random", "deterministic_subspaces")


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "none"  # none | gaussian | adversarial
    sigma: float = 0.0
    delta: float = 0.0
    policy: str = "toward_nearest_other_subspace"

    def __post_init__(self):
        if self.kind not in ("none", "gaussian", "adversarial"):
            raise InvalidSpecError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0.0 or self.delta < 0.0:
            raise InvalidSpecError("noise magnitudes must be nonnegative")
        if self.kind == "adversarial" and self.policy not in ADVERSARIAL_POLICIES:
            raise InvalidSpecError(f"unknown adversarial policy {self.policy!r}")

    def to_json(self) -> dict:
        return {"kind": self.kind, "sigma": self.sigma, "delta": self.delta, "policy": self.policy}

    @classmethod
    def from_json(cls, payload: dict) -> "NoiseSpec":
        return cls(
            kind=payload.get("kind", "none"),
            sigma=payload.get("sigma", 0.0),
            delta=payload.get("delta", 0.0),
            policy=payload.get("policy", "toward_nearest_other_subspace"),
        )


@dataclass(frozen=True)
class ModelSpec:
    """What to generate: ambient dimension, per-subspace dimensions and sample
    counts (or a common oversampling ratio kappa with N_l = round(kappa d_l)),
    the noise model, and optionally explicit bases for the deterministic
    subspace models."""

    model: str
    n: int
    dims: tuple[int, ...]
    counts: tuple[int, ...] | None = None
    kappa: float | None = None
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    normalize_noisy: bool = False
    bases: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise InvalidSpecError(f"unknown model {self.model!r}")
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise InvalidSpecError("need at least one subspace")
        if any(not 1 <= d < self.n for d in dims):
            raise InvalidSpecError("every subspace dimension must satisfy 1 <= d < n")
        if self.counts is None and self.kappa is None:
            raise InvalidSpecError("provide counts or kappa")
        counts = self.resolved_counts(dims)
        if any(c < d for c, d in zip(counts, dims)):
            raise InvalidSpecError("each subspace needs at least d samples")
        if self.model == "fully_random" and self.bases is not None:
            raise InvalidSpecError("fully_random draws its own bases")
        if self.model != "fully_random" and self.bases is None:
            raise InvalidSpecError(f"{self.model} needs explicit bases")
        if self.bases is not None:
            bases = tuple(np.asarray(b, dtype=float) for b in self.bases)
            if len(bases) != len(dims):
                raise InvalidSpecError("one basis per subspace required")
            for b, d in zip(bases, dims):
                if b.shape != (self.n, d):
                    raise InvalidSpecError(f"basis shape {b.shape} does not match (n, d)")
            object.__setattr__(self, "bases", bases)
        object.__setattr__(self, "dims", dims)

    def resolved_counts(self, dims=None) -> tuple[int, ...]:
        dims = self.dims if dims is None else dims
        if self.counts is not None:
            return tuple(int(c) for c in self.counts)
        return tuple(int(round(self.kappa * d)) for d in dims)

    @property
    def total_samples(self) -> int:
        return sum(self.resolved_counts())

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "n": self.n,
            "dims": list(self.dims),
            "counts": None if self.counts is None else list(self.counts),
            "kappa": self.kappa,
            "noise": self.noise.to_json(),
            "normalize_noisy": self.normalize_noisy,
            "bases": None
            if self.bases is None
            else [[list(row) for row in b] for b in self.bases],
        }

    @classmethod
    def from_json(cls, payload: dict) -> "ModelSpec":
        try:
            bases = payload.get("bases")
            return cls(
                model=payload["model"],
                n=int(payload["n"]),
                dims=tuple(payload["dims"]),
                counts=None if payload.get("counts") is None else tuple(payload["counts"]),
                kappa=payload.get("kappa"),
                noise=NoiseSpec.from_json(payload.get("noise", {})),
                normalize_noisy=payload.get("normalize_noisy", False),
                bases=None if bases is None else tuple(np.asarray(b, dtype=float) for b in bases),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidSpecError):
                raise
            raise InvalidSpecError(f"bad model spec: {exc!r}") from exc


def _halton_sphere(dim: int, count: int) -> np.ndarray:
    """Deterministic well-spread points on the unit sphere of R^dim.

    Low-discrepancy Halton points mapped through the normal quantile and
    normalized; dim = 1 alternates the two endpoints of the 0-sphere.
    """
    if dim == 1:
        signs = np.where(np.arange(count) % 2 == 0, 1.0, -1.0)
        return signs.reshape(1, count)
    sampler = qmc.Halton(d=dim, scramble=False)
    sampler.fast_forward(1)  # index 0 is the all-zero point
    coords = []
    while len(coords) < count:
        block = ndtri(sampler.random(count))
        norms = np.linalg.norm(block, axis=1)
        for row, norm in zip(block, norms):
            if norm > 1e-9 and np.all(np.isfinite(row)):
                coords.append(row / norm)
                if len(coords) == count:
                    break
    return np.asarray(coords).T


def _draw_bases(spec: ModelSpec, stream: Stream) -> tuple[np.ndarray, ...]:
    if spec.model == "fully_random":
        return tuple(
            orthonormal_basis(stream.spawn("basis", ell).normal_matrix(spec.n, d))
            for ell, d in enumerate(spec.dims)
        )
    # explicit bases are re-orthonormalized so projector identities hold exactly
    return tuple(orthonormal_basis(b) for b in spec.bases)


def _draw_clean(spec: ModelSpec, bases, stream: Stream) -> tuple[np.ndarray, list[int]]:
    counts = spec.resolved_counts()
    blocks = []
    labels: list[int] = []
    for ell, (u, count) in enumerate(zip(bases, counts)):
        d = u.shape[1]
        if spec.model == "deterministic_subspaces":
            coords = _halton_sphere(d, count)
        else:
            coords = stream.spawn("points", ell).unit_vectors(d, count)
        blocks.append(u @ coords)
        labels.extend([ell] * count)
    return np.hstack(blocks), labels


def _adversarial_noise(
    spec: ModelSpec, clean: np.ndarray, labels: np.ndarray, bases, stream: Stream
) -> np.ndarray:
    delta = spec.noise.delta
    n, total = clean.shape
    noise = np.zeros_like(clean)
    if delta == 0.0:
        return noise
    fallback = stream.spawn("adversarial-fallback")
    if spec.noise.policy == "random_fixed_norm":
        return delta * stream.spawn("adversarial").unit_vectors(n, total)
    # toward_nearest_other_subspace: push each sample toward its nearest
    # external clean point, using only the component leaving the own subspace
    for i in range(total):
        ell = labels[i]
        outside = np.flatnonzero(labels != ell)
        if outside.size == 0:
            noise[:, i] = delta * fallback.spawn("col", i).unit_vector(n)
            continue
        gaps = np.linalg.norm(clean[:, outside] - clean[:, i : i + 1], axis=0)
        target = clean[:, outside[int(np.argmin(gaps))]]
        u = bases[ell]
        off_component = target - u @ (u.T @ target)
        norm = np.linalg.norm(off_component)
        if norm <= 1e-12:
            noise[:, i] = delta * fallback.spawn("col", i).unit_vector(n)
        else:
            noise[:, i] = delta * off_component / norm
    return noise


def generate(spec: ModelSpec, rng: RngSpec) -> LabeledDataset:
    """Draw one labeled dataset; bit-identical for equal (spec, rng)."""
    stream = Stream(rng)
    bases = _draw_bases(spec, stream)
    clean, labels = _draw_clean(spec, bases, stream)
    labels_arr = np.asarray(labels)

    if spec.noise.kind == "none":
        noise = np.zeros_like(clean)
    elif spec.noise.kind == "gaussian":
        scale = spec.noise.sigma / np.sqrt(spec.n)
        noise = scale * stream.spawn("noise").normal_matrix(spec.n, clean.shape[1])
    else:
        noise = _adversarial_noise(spec, clean, labels_arr, bases, stream.spawn("noise"))

    observed = clean + noise
    if spec.normalize_noisy:
        observed = normalize_columns(observed)
    return LabeledDataset(
        data=DataMatrix(observed),
        labels=tuple(labels),
        clean=DataMatrix(clean),
        ensemble=SubspaceEnsemble(bases),
    )


# --- Monte-Carlo probes of the concentration facts ---------------------------


def cap_bound(n: int, eps: float) -> float:
    """Tail bound 2 exp(-n eps^2 / 2) for |a'z| > eps ||z|| with a uniform on
    the sphere."""
    return 2.0 * np.exp(-n * eps * eps / 2.0)


def chi_square_bound(n: int, t: float) -> float:
    """Tail bound exp((n/2)(log(1+t) - t)) for ||z||^2 > (1+t) sigma^2."""
    return float(np.exp(0.5 * n * (np.log1p(t) - t)))


def spherical_cap_check(n: int, trials: int, eps: float, rng: RngSpec) -> float:
    """Empirical rate of |a'z| > eps over `trials` uniform sphere directions a
    against a fixed unit z; compare against cap_bound(n, eps)."""
    if trials < 1000:
        raise InvalidInputError("use at least 1000 trials")
    stream = Stream(rng)
    exceed = 0
    remaining = trials
    while remaining > 0:
        chunk = min(remaining, 20_000)
        # |a' e_1| = first coordinate of a uniform sphere point
        g = stream.normal_matrix(n, chunk)
        first = np.abs(g[0]) / np.linalg.norm(g, axis=0)
        exceed += int(np.sum(first > eps))
        remaining -= chunk
    return exceed / trials


def gaussian_norm_check(n: int, total_samples: int, sigma: float, trials: int, rng: RngSpec) -> float:
    """Empirical exceedance rate of ||z||^2 over (1 + t) sigma^2 with
    t = 6 log N / n for Gaussian columns with entry variance sigma^2 / n."""
    if trials < 1000:
        raise InvalidInputError("use at least 1000 trials")
    t = 6.0 * np.log(total_samples) / n
    threshold = (1.0 + t) * sigma * sigma
    stream = Stream(rng)
    exceed = 0
    remaining = trials
    while remaining > 0:
        chunk = min(remaining, 20_000)
        z = (sigma / np.sqrt(n)) * stream.normal_matrix(n, chunk)
        exceed += int(np.sum(np.sum(z * z, axis=0) > threshold))
        remaining -= chunk
    return exceed / trials


# --- dataset files ------------------------------------------------------------
#
# A generated dataset is five files in a directory: data.csv, clean.csv,
# labels.txt, ensemble.json (bases as nested arrays), spec.json (the model
# spec plus the master seed used).


def save_dataset(dataset: LabeledDataset, spec: ModelSpec, seed: int, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset.data.to_csv(out / "data.csv")
    dataset.clean.to_csv(out / "clean.csv")
    write_labels(out / "labels.txt", dataset.labels)
    with open(out / "ensemble.json", "w") as fh:
        json.dump(
            {"bases": [[list(row) for row in b] for b in dataset.ensemble.bases]},
            fh,
        )
        fh.write("\n")
    payload = spec.to_json()
    payload["seed"] = seed
    with open(out / "spec.json", "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_dataset(
    data_path, labels_path, clean_path=None, ensemble_path=None
) -> LabeledDataset:
    data = DataMatrix.from_csv(data_path)
    labels = read_labels(labels_path)
    clean = DataMatrix.from_csv(clean_path) if clean_path else None
    ensemble = None
    if ensemble_path:
        with open(ensemble_path) as fh:
            payload = json.load(fh)
        ensemble = SubspaceEnsemble(
            tuple(np.asarray(b, dtype=float) for b in payload["bases"])
        )
    return LabeledDataset(data=data, labels=labels, clean=clean, ensemble=ensemble)
