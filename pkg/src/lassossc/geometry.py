"""Geometric diagnostics: inradius, polar circumradius, dual directions,
subspace incoherence, affinity, and noise magnitudes.

The inradius of the symmetrized convex hull of unit-subspace samples equals
the minimum over unit directions w (inside the subspace) of the support value
max_j |y_j' w|.  That minimum is estimated exactly on an angle grid for planar
subspaces and by seeded direction sampling plus local refinement otherwise;
either way the result is an upper bound of the true inradius, which tightens
as the direction budget grows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    DegenerateDualError,
    DimensionMismatchError,
    InvalidInputError,
    MissingCleanDataError,
    RankDeficientError,
    LabeledDataset,
    as_matrix,
)
from .rng import RngSpec, Stream
from .solver import SolveConfig, solve_column

_ANGLE_GRID_SIZE = 100_000
_angle_grid_cache: np.ndarray | None = None

DEFAULT_DIRECTION_BUDGET = 20_000
_REFINE_STEPS = 50


def _angle_grid() -> np.ndarray:
    """2 x 100000 unit directions covering half the circle (the hull is
    symmetric, so half suffices)."""
    global _angle_grid_cache
    if _angle_grid_cache is None:
        theta = np.linspace(0.0, np.pi, _ANGLE_GRID_SIZE, endpoint=False)
        _angle_grid_cache = np.vstack([np.cos(theta), np.sin(theta)])
    return _angle_grid_cache


def _as_stream(rng) -> Stream:
    if isinstance(rng, Stream):
        return rng
    if isinstance(rng, RngSpec):
        return Stream(rng)
    if rng is None:
        return Stream(RngSpec(0, ("inradius-default",)))
    return Stream(int(rng))


def _support_values(coords: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """Support of the symmetrized hull at each direction: max_j |y_j' w|."""
    return np.max(np.abs(coords.T @ directions), axis=0)


def _refine_direction(coords: np.ndarray, w: np.ndarray, best: float) -> float:
    """Coordinate-descent polish of the worst direction; only ever lowers the
    (upper-bound) estimate."""
    d = w.shape[0]
    step = 0.5
    for k in range(_REFINE_STEPS):
        axis = k % d
        improved = False
        for sign in (1.0, -1.0):
            cand = w.copy()
            cand[axis] += sign * step
            cand /= np.linalg.norm(cand)
            value = float(np.max(np.abs(coords.T @ cand)))
            if value < best - 1e-15:
                w, best, improved = cand, value, True
                break
        if not improved:
            step *= 0.5
    return best


def estimate_inradius(points, basis: np.ndarray, budget: int = DEFAULT_DIRECTION_BUDGET, rng=None) -> float:
    """Inradius of the symmetrized convex hull of `points` inside span(basis).

    d = 1 is exact (largest point magnitude), d = 2 uses a dense angle grid,
    and d >= 3 samples `budget` unit directions from the seeded stream and
    polishes the best one.  Raises RankDeficientError when the points do not
    span the subspace (the hull would be flat and the inradius zero).
    """
    y = as_matrix(points)
    u = np.asarray(basis, dtype=float)
    if y.shape[0] != u.shape[0]:
        raise DimensionMismatchError("points and basis ambient dimensions differ")
    d = u.shape[1]
    coords = u.T @ y
    scale = max(1.0, float(np.max(np.abs(y))))
    out_of_span = float(np.max(np.abs(y - u @ coords)))
    if out_of_span > 1e-8 * scale:
        raise InvalidInputError(
            f"points leave span(basis) by {out_of_span:.2e}; project them first"
        )
    if y.shape[1] < d:
        raise RankDeficientError("fewer points than subspace dimension")
    singulars = np.linalg.svd(coords, compute_uv=False)
    if singulars[-1] <= 1e-10 * max(singulars[0], 1.0):
        raise RankDeficientError("points do not span the subspace")

    if d == 1:
        return float(np.max(np.abs(coords)))
    if d == 2:
        return float(np.min(_support_values(coords, _angle_grid())))

    stream = _as_stream(rng)
    directions = stream.unit_vectors(d, budget)
    values = _support_values(coords, directions)
    best_idx = int(np.argmin(values))
    return _refine_direction(coords, directions[:, best_idx].copy(), float(values[best_idx]))


def circumradius_polar(points, basis: np.ndarray, budget: int = DEFAULT_DIRECTION_BUDGET, rng=None) -> float:
    """Circumradius of the polar of the symmetrized hull, via the duality
    identity r(P) * R(P_polar) = 1 for symmetric bodies."""
    return 1.0 / estimate_inradius(points, basis, budget, rng)


def projected_dual_direction(
    x: np.ndarray,
    dictionary,
    basis: np.ndarray,
    lam: float,
    cfg: SolveConfig | None = None,
) -> np.ndarray:
    """Unit in-subspace component of the dual vector of a column solve.

    Solves the l1 + least-squares program for x against the dictionary, forms
    nu = lam * residual, and returns P_S nu / ||P_S nu||.
    """
    cfg = SolveConfig(lam=lam) if cfg is None else replace(cfg, lam=lam)
    solution = solve_column(np.asarray(x, dtype=float), dictionary, cfg)
    nu = lam * solution.residual
    basis = np.asarray(basis, dtype=float)
    nu1 = basis @ (basis.T @ nu)
    norm = float(np.linalg.norm(nu1))
    if norm <= 1e-10:
        raise DegenerateDualError(
            "dual vector has no in-subspace component (residual nearly orthogonal)"
        )
    return nu1 / norm


def _incoherence(
    data: np.ndarray,
    labels: np.ndarray,
    bases,
    external: np.ndarray,
    lam: float,
    cfg: SolveConfig | None,
) -> tuple[list[float], int]:
    mus: list[float] = []
    skipped = 0
    for ell, u in enumerate(bases):
        cols = np.flatnonzero(labels == ell)
        outside = external[:, labels != ell]
        directions = []
        for i in cols:
            others = cols[cols != i]
            try:
                v = projected_dual_direction(data[:, i], data[:, others], u, lam, cfg)
            except DegenerateDualError:
                skipped += 1
                continue
            directions.append(v)
        if not directions or outside.shape[1] == 0:
            mus.append(0.0)
            continue
        v_mat = np.column_stack(directions)
        mus.append(float(np.max(np.abs(v_mat.T @ outside))))
    return mus, skipped


def subspace_incoherence(
    dataset: LabeledDataset, lam: float, cfg: SolveConfig | None = None
) -> tuple[list[float], int]:
    """Per-subspace incoherence: the worst inner product between a subspace's
    projected dual directions and the clean points of every other subspace.

    Returns (mu per subspace, number of columns skipped as degenerate).
    """
    if dataset.clean is None or dataset.ensemble is None:
        raise MissingCleanDataError("incoherence needs the clean matrix and ensemble")
    if dataset.ensemble.L < 2:
        raise InvalidInputError("incoherence needs at least two subspaces")
    labels = np.asarray(dataset.labels)
    return _incoherence(
        dataset.data.values, labels, dataset.ensemble.bases, dataset.clean.values, lam, cfg
    )


def subspace_affinity(u_k: np.ndarray, u_l: np.ndarray) -> float:
    """Affinity ||U_k' U_l||_F, the root sum of squared canonical-angle
    cosines; symmetric in its arguments."""
    u_k = np.asarray(u_k, dtype=float)
    u_l = np.asarray(u_l, dtype=float)
    if u_k.shape[0] != u_l.shape[0]:
        raise DimensionMismatchError("bases live in different ambient dimensions")
    return float(np.linalg.norm(u_k.T @ u_l))


def affinity_matrix(bases) -> np.ndarray:
    count = len(bases)
    aff = np.zeros((count, count))
    for k in range(count):
        for l in range(k, count):
            aff[k, l] = aff[l, k] = subspace_affinity(bases[k], bases[l])
    return aff


def noise_magnitudes(dataset: LabeledDataset) -> tuple[float, float]:
    """(delta, delta1): worst column noise norm and its worst in-subspace
    projection over all subspaces."""
    if dataset.clean is None or dataset.ensemble is None:
        raise MissingCleanDataError("noise magnitudes need the clean matrix and ensemble")
    noise = dataset.data.values - dataset.clean.values
    delta = float(np.max(np.linalg.norm(noise, axis=0)))
    delta1 = 0.0
    for u in dataset.ensemble.bases:
        delta1 = max(delta1, float(np.max(np.linalg.norm(u.T @ noise, axis=0))))
    return delta, delta1


@dataclass(frozen=True)
class GeometryReport:
    """All geometric quantities of one labeled dataset.

    Inradius estimates are one-sided (upper bounds); see estimate_inradius.
    """

    r_per_subspace: tuple[float, ...]
    r_min: float
    mu_per_subspace: tuple[float, ...]
    delta: float
    delta1: float
    affinity: np.ndarray
    skipped_columns: int = 0
    clean_proxy: bool = False
    inradius_is_upper_bound: bool = True

    def to_json(self) -> dict:
        return {
            "r": list(self.r_per_subspace),
            "r_min": self.r_min,
            "mu": list(self.mu_per_subspace),
            "delta": None if np.isnan(self.delta) else self.delta,
            "delta1": None if np.isnan(self.delta1) else self.delta1,
            "affinity": [list(row) for row in np.asarray(self.affinity)],
            "skipped_columns": self.skipped_columns,
            "clean_proxy": self.clean_proxy,
            "inradius_is_upper_bound": self.inradius_is_upper_bound,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "GeometryReport":
        return cls(
            r_per_subspace=tuple(payload["r"]),
            r_min=payload["r_min"],
            mu_per_subspace=tuple(payload["mu"]),
            delta=float("nan") if payload["delta"] is None else payload["delta"],
            delta1=float("nan") if payload["delta1"] is None else payload["delta1"],
            affinity=np.asarray(payload["affinity"], dtype=float),
            skipped_columns=payload.get("skipped_columns", 0),
            clean_proxy=payload.get("clean_proxy", False),
            inradius_is_upper_bound=payload.get("inradius_is_upper_bound", True),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")


def geometry_report(
    dataset: LabeledDataset,
    lam: float,
    cfg: SolveConfig | None = None,
    budget: int = DEFAULT_DIRECTION_BUDGET,
    rng: RngSpec | None = None,
    allow_proxy: bool = False,
) -> GeometryReport:
    """Assemble the full geometry report for one dataset.

    The per-subspace inradius is the minimum over leave-one-out hulls of the
    clean same-subspace points.  With allow_proxy=True and no clean matrix,
    every quantity is computed against the noisy data instead (flagged in the
    report) and the noise magnitudes are NaN.
    """
    if dataset.ensemble is None:
        raise MissingCleanDataError("geometry report needs the subspace ensemble")
    proxy = dataset.clean is None
    if proxy and not allow_proxy:
        raise MissingCleanDataError("geometry report needs the clean matrix")
    reference = dataset.data.values if proxy else dataset.clean.values
    labels = np.asarray(dataset.labels)
    rng = rng if rng is not None else RngSpec(0, ("geometry",))

    r_per = []
    for ell, u in enumerate(dataset.ensemble.bases):
        cols = np.flatnonzero(labels == ell)
        if cols.size < 2:
            raise InvalidInputError(f"subspace {ell} has fewer than two samples")
        worst = np.inf
        for i in cols:
            others = cols[cols != i]
            worst = min(
                worst,
                estimate_inradius(
                    reference[:, others], u, budget, rng.child("inradius", int(ell), int(i))
                ),
            )
        r_per.append(worst)

    mus, skipped = _incoherence(
        dataset.data.values, labels, dataset.ensemble.bases, reference, lam, cfg
    )
    if proxy:
        delta = delta1 = float("nan")
    else:
        delta, delta1 = noise_magnitudes(dataset)
    return GeometryReport(
        r_per_subspace=tuple(r_per),
        r_min=float(min(r_per)),
        mu_per_subspace=tuple(mus),
        delta=delta,
        delta1=delta1,
        affinity=affinity_matrix(dataset.ensemble.bases),
        skipped_columns=skipped,
        clean_proxy=proxy,
    )
