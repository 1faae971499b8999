"""Shared data model and numeric primitives.

Samples are columns throughout the package: a data matrix is n x N with
ambient dimension n and one sample per column.  The container types validate
their invariants on construction and are treated as immutable afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ZERO_COLUMN_EPS = 1e-12
ORTHONORMAL_TOL = 1e-10


class ZeroColumnError(ValueError):
    """A column has (numerically) zero Euclidean norm."""


class DimensionMismatchError(ValueError):
    """Operands have incompatible shapes."""


class NonFiniteError(ValueError):
    """A value or iterate is NaN or infinite."""


class DegenerateDictionaryError(ValueError):
    """Dictionary has no usable correlation with the target vector."""


class RankDeficientError(ValueError):
    """Points fail to span the subspace they are claimed to live in."""


class DegenerateDualError(ValueError):
    """The dual vector has a vanishing in-subspace component."""


class MissingCleanDataError(ValueError):
    """An operation requires the uncorrupted data / ensemble and none is present."""


class InvalidInputError(ValueError):
    """Numeric inputs violate a precondition of a theorem calculator."""


class InvalidSpecError(ValueError):
    """A generation / experiment spec fails validation."""


class CholeskyFailureError(ArithmeticError):
    """SPD factorization failed even after jitter; the problem is badly scaled."""


class EigenFailureError(ArithmeticError):
    """Symmetric eigendecomposition did not converge."""


class LabelRangeMismatchError(ValueError):
    """Two labelings are not comparable."""


def as_matrix(m) -> np.ndarray:
    """Unwrap a DataMatrix / CoefficientMatrix or pass an ndarray through."""
    values = getattr(m, "values", m)
    return np.asarray(values, dtype=float)


@dataclass(frozen=True)
class DataMatrix:
    """Ambient-space sample matrix; column j is sample x_j."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DimensionMismatchError("data matrix must be 2-d")
        if values.shape[0] < 1 or values.shape[1] < 2:
            raise DimensionMismatchError(
                f"need n >= 1 and N >= 2, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise NonFiniteError("data matrix contains non-finite entries")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def N(self) -> int:
        return self.values.shape[1]

    def column(self, j: int) -> np.ndarray:
        return self.values[:, j]

    def to_csv(self, path) -> None:
        write_matrix_csv(path, self.values)

    @classmethod
    def from_csv(cls, path) -> "DataMatrix":
        return cls(read_matrix_csv(path))


@dataclass(frozen=True)
class SubspaceEnsemble:
    """Ground-truth union of subspaces as a list of orthonormal bases."""

    bases: tuple[np.ndarray, ...]

    def __post_init__(self):
        bases = tuple(np.asarray(u, dtype=float) for u in self.bases)
        if not bases:
            raise InvalidInputError("ensemble needs at least one subspace")
        n = bases[0].shape[0]
        for u in bases:
            if u.ndim != 2 or u.shape[0] != n:
                raise DimensionMismatchError("all bases must share the ambient dimension")
            d = u.shape[1]
            if not 1 <= d < n:
                raise InvalidInputError(f"need 1 <= d < n, got d={d}, n={n}")
            gram_err = np.max(np.abs(u.T @ u - np.eye(d)))
            if gram_err > ORTHONORMAL_TOL:
                raise InvalidInputError(
                    f"basis columns not orthonormal (max |U'U - I| = {gram_err:.2e})"
                )
        object.__setattr__(self, "bases", bases)

    @property
    def L(self) -> int:
        return len(self.bases)

    @property
    def n(self) -> int:
        return self.bases[0].shape[0]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(u.shape[1] for u in self.bases)


@dataclass(frozen=True)
class LabeledDataset:
    """Observed data plus ground truth: labels and, when known, the clean
    points and subspace ensemble they were drawn from."""

    data: DataMatrix
    labels: tuple[int, ...]
    clean: DataMatrix | None = None
    ensemble: SubspaceEnsemble | None = None

    def __post_init__(self):
        labels = tuple(int(v) for v in self.labels)
        if len(labels) != self.data.N:
            raise DimensionMismatchError("labels length must equal sample count")
        if min(labels) < 0:
            raise InvalidInputError("labels must be nonnegative subspace ids")
        if self.clean is not None and self.clean.values.shape != self.data.values.shape:
            raise DimensionMismatchError("clean matrix shape must match data")
        if self.ensemble is not None and max(labels) >= self.ensemble.L:
            raise InvalidInputError("label exceeds number of subspaces in ensemble")
        object.__setattr__(self, "labels", labels)

    @property
    def L(self) -> int:
        if self.ensemble is not None:
            return self.ensemble.L
        return max(self.labels) + 1

    def columns_of(self, ell: int) -> np.ndarray:
        """Indices of the samples labeled ell."""
        return np.flatnonzero(np.asarray(self.labels) == ell)


@dataclass(frozen=True)
class CoefficientMatrix:
    """Self-expression matrix C with exactly zero diagonal; column i is c_i."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DimensionMismatchError("coefficient matrix must be square")
        if not np.all(np.isfinite(values)):
            raise NonFiniteError("coefficient matrix contains non-finite entries")
        if np.any(np.diag(values) != 0.0):
            raise InvalidInputError("coefficient matrix diagonal must be exactly zero")
        object.__setattr__(self, "values", values)

    @property
    def N(self) -> int:
        return self.values.shape[0]

    def to_csv(self, path) -> None:
        write_matrix_csv(path, self.values)

    @classmethod
    def from_csv(cls, path) -> "CoefficientMatrix":
        return cls(read_matrix_csv(path))


def normalize_columns(m) -> np.ndarray:
    """Scale every column to unit Euclidean norm, preserving direction."""
    values = as_matrix(m)
    norms = np.linalg.norm(values, axis=0)
    if np.any(norms <= ZERO_COLUMN_EPS):
        bad = int(np.argmin(norms))
        raise ZeroColumnError(f"column {bad} has norm {norms[bad]:.3e}")
    return values / norms


def project_onto(u_basis: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Orthogonal projection U U' v of a vector (or point matrix) onto span(U)."""
    u_basis = np.asarray(u_basis, dtype=float)
    v = np.asarray(v, dtype=float)
    if u_basis.shape[0] != v.shape[0]:
        raise DimensionMismatchError(
            f"basis is {u_basis.shape[0]}-dimensional, vector is {v.shape[0]}-dimensional"
        )
    return u_basis @ (u_basis.T @ v)


def soft_threshold(x, t):
    """Shrink toward zero: sign(x) * max(|x| - t, 0).  Requires t >= 0."""
    if np.any(np.asarray(t) < 0.0):
        raise InvalidInputError("threshold must be nonnegative")
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def support_cutoff(c: np.ndarray) -> float:
    """Scale-aware magnitude below which a coefficient counts as zero.

    ADMM iterates carry tiny nonzeros, so exact-zero tests use
    1e-6 * max(1, ||c||_inf) per coefficient vector.
    """
    c = np.asarray(c, dtype=float)
    top = float(np.max(np.abs(c))) if c.size else 0.0
    return 1e-6 * max(1.0, top)


def orthonormal_basis(m: np.ndarray) -> np.ndarray:
    """Orthonormalize the columns of m by modified Gram-Schmidt.

    A second orthogonalization pass keeps ||U'U - I||_max comfortably below
    the ensemble tolerance even for nearly dependent inputs.
    """
    a = np.array(m, dtype=float)
    if a.ndim != 2:
        raise DimensionMismatchError("expected a 2-d array of basis candidates")
    n, d = a.shape
    q = np.zeros((n, d))
    kept = 0
    for j in range(d):
        v = a[:, j].copy()
        for _ in range(2):
            for i in range(kept):
                v -= (q[:, i] @ v) * q[:, i]
        norm = np.linalg.norm(v)
        if norm <= 1e-12 * max(1.0, np.linalg.norm(a[:, j])):
            raise RankDeficientError(f"column {j} is dependent on earlier columns")
        q[:, kept] = v / norm
        kept += 1
    return q


# --- file formats -----------------------------------------------------------
#
# Matrix CSV: first line "n,N"; then n lines of N comma-separated decimals
# (row i = ambient coordinate i).  Floats are written with shortest
# round-trip repr so files are byte-stable across runs.
# Labels file: one integer per line, N lines.


def write_matrix_csv(path, values: np.ndarray) -> None:
    values = np.asarray(values, dtype=float)
    lines = [f"{values.shape[0]},{values.shape[1]}"]
    for row in values:
        lines.append(",".join(repr(float(v)) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip()
        try:
            n, cols = (int(tok) for tok in header.split(","))
        except ValueError as exc:
            raise InvalidInputError(f"bad matrix header {header!r}") from exc
        rows = []
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(tok) for tok in line.split(",")])
    values = np.asarray(rows, dtype=float)
    if values.shape != (n, cols):
        raise InvalidInputError(
            f"matrix body {values.shape} does not match header ({n}, {cols})"
        )
    return values


def write_labels(path, labels) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(str(int(v)) for v in labels) + "\n")


def read_labels(path) -> tuple[int, ...]:
    with open(path) as fh:
        return tuple(int(line.strip()) for line in fh if line.strip())
