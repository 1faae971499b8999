"""ADMM solvers for the l1 + least-squares self-expression program.

Each data column x_i is regressed on the remaining columns:

    min_c ||c||_1 + (lam/2) * ||x_i - X_{-i} c||^2

either column by column or jointly over the whole matrix with a zero-diagonal
constraint.  Both paths alternate a ridge step, entrywise soft-thresholding,
and a dual ascent step; with growth factor rho == 1 the ridge factorization is
computed once and every iteration costs one pair of matrix products.

The module also recovers the dual vector nu = lam * (x - X_{-i} c) of a solve
and checks the optimality certificate (subgradient sign conditions plus the
unit-box constraint on dictionary correlations).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
import scipy.sparse

from .core import (
    CholeskyFailureError,
    CoefficientMatrix,
    DegenerateDictionaryError,
    InvalidInputError,
    NonFiniteError,
    as_matrix,
    soft_threshold,
    support_cutoff,
)

_JITTER = 1e-10


@dataclass(frozen=True)
class SolveConfig:
    """Solver parameters; mu0 defaults to lam, which keeps iterations cheap
    and works well across the lambda grid."""

    lam: float
    mu0: float | None = None
    rho: float = 1.0
    tol_primal: float = 1e-6
    tol_dual: float = 1e-6
    max_iter: int = 2000
    mode: str = "matrix"

    def __post_init__(self):
        if not (self.lam > 0.0):
            raise InvalidInputError("lam must be positive")
        if self.mu0 is not None and not (self.mu0 > 0.0):
            raise InvalidInputError("mu0 must be positive")
        if self.rho < 1.0:
            raise InvalidInputError("rho must be >= 1")
        if not (self.tol_primal > 0.0 and self.tol_dual > 0.0):
            raise InvalidInputError("tolerances must be positive")
        if self.max_iter < 1:
            raise InvalidInputError("max_iter must be >= 1")
        if self.mode not in ("column", "matrix"):
            raise InvalidInputError(f"unknown mode {self.mode!r}")

    @property
    def mu_start(self) -> float:
        return self.lam if self.mu0 is None else self.mu0


@dataclass(frozen=True)
class ColumnSolution:
    coefficients: np.ndarray
    residual: np.ndarray
    objective: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class MatrixSolution:
    coefficients: CoefficientMatrix
    objective: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class DualCertificate:
    """Dual vector of one column solve, optionally split against a subspace."""

    nu: np.ndarray
    support: np.ndarray
    nu1: np.ndarray | None = None
    nu2: np.ndarray | None = None


@dataclass(frozen=True)
class CertificateReport:
    sign_match: bool
    box_ok: bool
    max_abs_inactive: float


def column_objective(c: np.ndarray, x: np.ndarray, dictionary, lam: float) -> float:
    a = as_matrix(dictionary)
    resid = x - a @ c
    return float(np.sum(np.abs(c)) + 0.5 * lam * (resid @ resid))


def matrix_objective(c, x, lam: float) -> float:
    cv, xv = as_matrix(c), as_matrix(x)
    return float(np.sum(np.abs(cv)) + 0.5 * lam * np.sum((xv - xv @ cv) ** 2))


class _RidgeSolver:
    """Applies (lam * A'A + mu*I)^{-1}.

    Tall dictionaries factor the m x m system directly; wide ones go through
    the n x n kernel (mu*I + lam*A A')^{-1} so the cost stays linear in the
    number of atoms.  One jitter retry before giving up on the factorization.
    """

    def __init__(self, a: np.ndarray, lam: float, mu: float):
        self.a = a
        self.lam = lam
        self.mu = mu
        n, m = a.shape
        self.wide = m > n
        gram = lam * (a @ a.T) if self.wide else lam * (a.T @ a)
        size = n if self.wide else m
        try:
            self.factor = scipy.linalg.cho_factor(gram + mu * np.eye(size))
        except scipy.linalg.LinAlgError:
            try:
                self.factor = scipy.linalg.cho_factor(
                    gram + (mu + _JITTER) * np.eye(size)
                )
            except scipy.linalg.LinAlgError as exc:
                raise CholeskyFailureError(
                    "ridge system is numerically singular; rescale the data"
                ) from exc

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.wide:
            kernel = scipy.linalg.cho_solve(self.factor, self.a @ rhs)
            return (rhs - self.lam * (self.a.T @ kernel)) / self.mu
        return scipy.linalg.cho_solve(self.factor, rhs)


def solve_column(x: np.ndarray, dictionary, cfg: SolveConfig) -> ColumnSolution:
    """LASSO solve of one vector against an explicit dictionary.

    Returns the coefficient vector, the residual e = x - A c, and convergence
    metadata.  On hitting max_iter the best iterate is returned with
    ``converged=False`` rather than raising.
    """
    a = as_matrix(dictionary)
    x = np.asarray(x, dtype=float)
    if a.ndim != 2 or a.shape[1] < 1:
        raise InvalidInputError("dictionary needs at least one column")
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("target vector contains non-finite entries")
    m = a.shape[1]
    lam, mu = cfg.lam, cfg.mu_start
    target = lam * (a.T @ x)

    ridge = _RidgeSolver(a, lam, mu)
    c = np.zeros(m)
    dual = np.zeros(m)
    converged = False
    iterations = cfg.max_iter
    for k in range(1, cfg.max_iter + 1):
        smooth = ridge.solve(target + mu * c - dual)
        c_prev = c
        c = soft_threshold(smooth + dual / mu, 1.0 / mu)
        dual = dual + mu * (smooth - c)

        primal_res = float(np.linalg.norm(smooth - c))
        dual_res = mu * float(np.linalg.norm(c - c_prev))
        if not np.isfinite(primal_res) or not np.isfinite(dual_res):
            raise NonFiniteError("solver iterates diverged")
        scale = 1.0 + float(np.linalg.norm(c))
        if primal_res <= cfg.tol_primal * scale and dual_res <= cfg.tol_dual * scale:
            converged = True
            iterations = k
            break
        if cfg.rho > 1.0:
            mu *= cfg.rho
            ridge = _RidgeSolver(a, lam, mu)

    residual = x - a @ c
    return ColumnSolution(
        coefficients=c,
        residual=residual,
        objective=column_objective(c, x, a, lam),
        iterations=iterations,
        converged=converged,
    )


def solve_matrix(x, cfg: SolveConfig) -> MatrixSolution:
    """Self-expression solve of every column against the others.

    mode="matrix" runs the joint ADMM with the explicit diagonal-removal step,
    so diag(C) is exactly zero.  mode="column" runs the same per-column
    recursion but freezes each column at its own stopping point; the columns
    are uncoupled, so this equals solving column i against X with coefficient
    i pinned to zero, i.e. against X_{-i} without copying the dictionary.
    """
    xv = as_matrix(x)
    if xv.ndim != 2 or xv.shape[1] < 2:
        raise InvalidInputError("need at least two samples")
    if not np.all(np.isfinite(xv)):
        raise NonFiniteError("data matrix contains non-finite entries")
    n, big_n = xv.shape
    if cfg.mode == "matrix" and big_n > n:
        return _solve_matrix_factored(xv, cfg)
    lam, mu = cfg.lam, cfg.mu_start
    gram = lam * (xv.T @ xv)
    ridge = _RidgeSolver(xv, lam, mu)

    c = np.zeros((big_n, big_n))
    dual = np.zeros((big_n, big_n))
    per_column = cfg.mode == "column"
    active = np.ones(big_n, dtype=bool)
    iterations = cfg.max_iter
    converged = False

    for k in range(1, cfg.max_iter + 1):
        cols = np.flatnonzero(active) if per_column else slice(None)
        rhs = gram[:, cols] + mu * c[:, cols] - dual[:, cols]
        smooth = ridge.solve(rhs)
        c_prev_cols = c[:, cols].copy()
        updated = soft_threshold(smooth + dual[:, cols] / mu, 1.0 / mu)
        if per_column:
            updated[cols, np.arange(updated.shape[1])] = 0.0
            c[:, cols] = updated
        else:
            c = updated
            np.fill_diagonal(c, 0.0)
        dual[:, cols] = dual[:, cols] + mu * (smooth - c[:, cols])

        diff_smooth = smooth - c[:, cols]
        diff_c = c[:, cols] - c_prev_cols
        if per_column:
            primal_cols = np.linalg.norm(diff_smooth, axis=0)
            dual_cols = mu * np.linalg.norm(diff_c, axis=0)
            if not np.all(np.isfinite(primal_cols)):
                raise NonFiniteError("solver iterates diverged")
            scale_cols = 1.0 + np.linalg.norm(c[:, cols], axis=0)
            done = (primal_cols <= cfg.tol_primal * scale_cols) & (
                dual_cols <= cfg.tol_dual * scale_cols
            )
            active[np.asarray(cols)[done]] = False
            if not active.any():
                converged = True
                iterations = k
                break
        else:
            primal_res = float(np.linalg.norm(diff_smooth))
            dual_res = mu * float(np.linalg.norm(diff_c))
            if not np.isfinite(primal_res) or not np.isfinite(dual_res):
                raise NonFiniteError("solver iterates diverged")
            scale = 1.0 + float(np.linalg.norm(c))
            if primal_res <= cfg.tol_primal * scale and dual_res <= cfg.tol_dual * scale:
                converged = True
                iterations = k
                break
        if cfg.rho > 1.0:
            mu *= cfg.rho
            ridge = _RidgeSolver(xv, lam, mu)

    np.fill_diagonal(c, 0.0)
    return MatrixSolution(
        coefficients=CoefficientMatrix(c),
        objective=matrix_objective(c, xv, lam),
        iterations=iterations,
        converged=converged,
    )


def _sparse_aware_product(xv: np.ndarray, c: np.ndarray) -> np.ndarray:
    """X @ C, routed through a sparse representation when C is sparse enough
    for that to win (large N, mostly-zero iterate)."""
    if c.shape[1] >= 400:
        nnz = np.count_nonzero(c)
        if nnz < 0.25 * c.size:
            return (scipy.sparse.csr_matrix(c.T) @ xv.T).T
    return xv @ c


def _solve_matrix_factored(xv: np.ndarray, cfg: SolveConfig) -> MatrixSolution:
    """Joint ADMM specialized to wide matrices (more samples than ambient
    dimensions).

    The dual matrix of the joint recursion always has the form
    Lambda = X' S + D with S an n x N factor and D = mu * (C_prev - C), so the
    iteration never materializes Lambda: the soft-threshold argument reduces
    to C + X' V with V = (lam/mu) (X - q) and q the kernel solve of
    X (G + mu C - Lambda).  One dense N^2 n product per iteration remains
    (forming X' V); everything else is O(n^2 N).  Iterates match the direct
    recursion up to rounding.
    """
    n, big_n = xv.shape
    lam, mu = cfg.lam, cfg.mu_start
    xxt = xv @ xv.T
    lam_xxt_x = lam * (xxt @ xv)

    def factor(mu_now: float):
        try:
            return scipy.linalg.cho_factor(lam * xxt + mu_now * np.eye(n))
        except scipy.linalg.LinAlgError:
            try:
                return scipy.linalg.cho_factor(lam * xxt + (mu_now + _JITTER) * np.eye(n))
            except scipy.linalg.LinAlgError as exc:
                raise CholeskyFailureError(
                    "ridge system is numerically singular; rescale the data"
                ) from exc

    kernel = factor(mu)
    c = np.zeros((big_n, big_n))
    d = np.zeros((big_n, big_n))
    s = np.zeros((n, big_n))
    xc = np.zeros((n, big_n))
    xd = np.zeros((n, big_n))
    converged = False
    iterations = cfg.max_iter

    for k in range(1, cfg.max_iter + 1):
        x_rhs = lam_xxt_x + mu * xc - xxt @ s - xd
        q = scipy.linalg.cho_solve(kernel, x_rhs)
        v = (lam / mu) * (xv - q)
        z = c + xv.T @ v
        # soft threshold as z - clip(z): same values, fewer N^2 temporaries
        c_next = np.clip(z, -1.0 / mu, 1.0 / mu)
        np.subtract(z, c_next, out=c_next)
        np.fill_diagonal(c_next, 0.0)

        d_next = mu * (c - c_next)
        xc_next = _sparse_aware_product(xv, c_next)
        xd_next = mu * (xc - xc_next)

        # primal residual ||J - C|| == ||Lambda_next - Lambda|| / mu, computed
        # through the factored form without building Lambda
        t = lam * (xv - q) - s  # = mu * W, the low-rank dual increment factor
        delta_d = d_next - d
        x_delta_d = xd_next - xd
        delta_sq = (
            float(np.sum((xxt @ t) * t))
            + 2.0 * float(np.sum(x_delta_d * t))
            + float(np.sum(delta_d * delta_d))
        )
        primal_res = np.sqrt(max(delta_sq, 0.0)) / mu
        dual_res = float(np.linalg.norm(d_next))
        if not np.isfinite(primal_res) or not np.isfinite(dual_res):
            raise NonFiniteError("solver iterates diverged")

        c, d, xc, xd = c_next, d_next, xc_next, xd_next
        s = mu * v
        scale = 1.0 + float(np.linalg.norm(c))
        if primal_res <= cfg.tol_primal * scale and dual_res <= cfg.tol_dual * scale:
            converged = True
            iterations = k
            break
        if cfg.rho > 1.0:
            mu *= cfg.rho
            kernel = factor(mu)

    np.fill_diagonal(c, 0.0)
    return MatrixSolution(
        coefficients=CoefficientMatrix(c),
        objective=matrix_objective(c, xv, lam),
        iterations=iterations,
        converged=converged,
    )


def recover_dual(
    x: np.ndarray,
    dictionary,
    c: np.ndarray,
    lam: float,
    basis: np.ndarray | None = None,
) -> DualCertificate:
    """Dual vector nu = lam * (x - A c) of a column solve.

    When a subspace basis is supplied, nu is split into its in-subspace and
    orthogonal components nu1 + nu2.
    """
    a = as_matrix(dictionary)
    x = np.asarray(x, dtype=float)
    c = np.asarray(c, dtype=float)
    nu = lam * (x - a @ c)
    support = np.flatnonzero(np.abs(c) > support_cutoff(c))
    nu1 = nu2 = None
    if basis is not None:
        basis = np.asarray(basis, dtype=float)
        nu1 = basis @ (basis.T @ nu)
        nu2 = nu - nu1
    return DualCertificate(nu=nu, support=support, nu1=nu1, nu2=nu2)


def verify_certificate(
    cert: DualCertificate, dictionary, c: np.ndarray, tol: float
) -> CertificateReport:
    """Check the optimality conditions of a (c, nu) pair.

    sign_match: correlations on the support equal sign(c_j) within tol.
    box_ok: all dictionary correlations with nu stay inside [-1-tol, 1+tol].
    max_abs_inactive reports the largest off-support correlation.
    """
    a = as_matrix(dictionary)
    c = np.asarray(c, dtype=float)
    corr = a.T @ cert.nu
    support = cert.support
    if support.size:
        sign_err = float(np.max(np.abs(corr[support] - np.sign(c[support]))))
        sign_match = sign_err <= tol
    else:
        sign_match = True
    inactive = np.setdiff1d(np.arange(a.shape[1]), support, assume_unique=False)
    max_abs_inactive = float(np.max(np.abs(corr[inactive]))) if inactive.size else 0.0
    box_ok = float(np.max(np.abs(corr))) <= 1.0 + tol
    return CertificateReport(
        sign_match=sign_match, box_ok=box_ok, max_abs_inactive=max_abs_inactive
    )


def min_nontrivial_lambda(x: np.ndarray, dictionary) -> float:
    """Smallest lam beyond which the solve is non-trivial: 1 / ||A'x||_inf.

    At or below this value the zero vector is optimal; above it at least one
    coefficient enters the support.
    """
    a = as_matrix(dictionary)
    x = np.asarray(x, dtype=float)
    peak = float(np.max(np.abs(a.T @ x)))
    if peak <= 1e-12:
        raise DegenerateDictionaryError(
            "dictionary is uncorrelated with the target vector"
        )
    return 1.0 / peak
