"""Sufficient-condition calculators for the subspace detection guarantees.

Each calculator turns measured (or assumed) geometric quantities into a
feasible interval of the tradeoff parameter lambda plus boolean verdicts on
the noise conditions.  An unbounded-above interval is represented by
``upper=None`` rather than a float sentinel.

Absolute constants that the analysis leaves unspecified (the fully-random
interval constants and the semi-random ones) are exposed as parameters with
default 1 and the results labeled advisory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core import InvalidInputError
from .geometry import GeometryReport

SQRT8_INV = 1.0 / math.sqrt(8.0)


@dataclass(frozen=True)
class LambdaRange:
    """Feasible interval (lower, upper) of the tradeoff parameter.

    upper is None when the interval is unbounded above (the noiseless case).
    """

    lower: float
    upper: float | None
    nonempty: bool
    theorem: str
    inputs_echo: dict = field(default_factory=dict)

    def contains(self, lam: float) -> bool:
        if not self.nonempty:
            return False
        if lam <= self.lower:
            return False
        return self.upper is None or lam < self.upper

    def midpoint(self) -> float:
        """Geometric mean of the endpoints; needs a bounded nonempty range."""
        if not self.nonempty or self.upper is None:
            raise InvalidInputError("midpoint needs a bounded nonempty range")
        return math.sqrt(self.lower * self.upper)

    def to_json(self) -> dict:
        return {
            "lower": self.lower if math.isfinite(self.lower) else None,
            "upper": self.upper,
            "unbounded_above": self.upper is None,
            "nonempty": self.nonempty,
            "theorem": self.theorem,
            "inputs_echo": self.inputs_echo,
        }


class DeterministicVerdict(NamedTuple):
    delta_bound: float
    gap_ok: bool
    lambda_range: LambdaRange


class RandomNoiseVerdict(NamedTuple):
    cond1: bool
    cond2: bool
    lambda_range: LambdaRange


class FullyRandomVerdict(NamedTuple):
    dim_ok: bool
    sigma_ok: bool
    lambda_range: LambdaRange


def _make_range(lower: float, upper: float | None, theorem: str, echo: dict) -> LambdaRange:
    if upper is None:
        nonempty = math.isfinite(lower) and lower > 0.0
    else:
        nonempty = math.isfinite(lower) and lower < upper
    return LambdaRange(lower=lower, upper=upper, nonempty=nonempty, theorem=theorem, inputs_echo=echo)


def _check_report(report: GeometryReport) -> tuple[np.ndarray, np.ndarray]:
    r = np.asarray(report.r_per_subspace, dtype=float)
    mu = np.asarray(report.mu_per_subspace, dtype=float)
    if np.any(r <= 0.0) or not np.all(np.isfinite(r)):
        raise InvalidInputError("every inradius must be positive and finite")
    if not np.all(np.isfinite(mu)):
        raise InvalidInputError("incoherences must be finite")
    if r.shape != mu.shape:
        raise InvalidInputError("inradius and incoherence lists disagree in length")
    return r, mu


def deterministic_conditions(report: GeometryReport) -> DeterministicVerdict:
    """Worst-case noise guarantee from measured geometry.

    delta_bound = min_l r * (r_l - mu_l) / (2 + 7 r_l); the detection property
    holds for every lambda strictly between 1 / (r - 2 delta - delta^2) and
    min_l (r_l - mu_l - 2 delta1) / (delta (1 + delta) (2 + r_l - delta1)).
    Whenever gap_ok is true the interval is guaranteed nonempty; delta = 0
    collapses it to (1/r, infinity).
    """
    r, mu = _check_report(report)
    delta, delta1 = report.delta, report.delta1
    if not (math.isfinite(delta) and math.isfinite(delta1)):
        raise InvalidInputError("noise magnitudes must be finite (no proxy reports)")
    r_min = float(np.min(r))
    delta_bound = float(np.min(r_min * (r - mu) / (2.0 + 7.0 * r)))
    gap_ok = bool(np.all(mu < r)) and delta <= delta_bound
    echo = {
        "r": list(map(float, r)),
        "mu": list(map(float, mu)),
        "delta": delta,
        "delta1": delta1,
    }
    if delta == 0.0:
        rng = _make_range(1.0 / r_min, None, "deterministic", echo)
    else:
        lower_den = r_min - 2.0 * delta - delta * delta
        lower = 1.0 / lower_den if lower_den > 0.0 else math.inf
        uppers = (r - mu - 2.0 * delta1) / (delta * (1.0 + delta) * (2.0 + r - delta1))
        upper = float(np.min(uppers))
        rng = _make_range(lower, upper, "deterministic", echo)
    return DeterministicVerdict(delta_bound=delta_bound, gap_ok=gap_ok, lambda_range=rng)


def random_noise_conditions(
    report: GeometryReport, n: int, total_samples: int, dims
) -> RandomNoiseVerdict:
    """Spherical-noise guarantee; the noise enters through
    eps = sqrt(6 log N / (n - max_l d_l)) instead of at full strength."""
    r, mu = _check_report(report)
    dims = np.asarray(dims, dtype=float)
    if dims.shape != r.shape:
        raise InvalidInputError("need one dimension per subspace")
    if n <= np.max(dims):
        raise InvalidInputError("ambient dimension must exceed every subspace dimension")
    if total_samples < 2:
        raise InvalidInputError("need at least two samples")
    delta = report.delta
    if not math.isfinite(delta):
        raise InvalidInputError("noise magnitude must be finite")
    eps = math.sqrt(6.0 * math.log(total_samples) / (n - float(np.max(dims))))
    r_min = float(np.min(r))
    cond1 = eps * delta < float(np.min((r - mu) / (2.0 * np.sqrt(dims) + 2.0)))
    cond2 = eps * delta * (1.0 + delta) < float(np.min(r_min * (r - mu) / (4.0 * r + 6.0)))
    echo = {
        "r": list(map(float, r)),
        "mu": list(map(float, mu)),
        "delta": delta,
        "eps": eps,
        "n": n,
        "N": total_samples,
        "dims": list(map(float, dims)),
    }
    if delta == 0.0:
        rng = _make_range(1.0 / r_min, None, "random_noise", echo)
    else:
        lower_den = r_min - 2.0 * eps * delta - eps * delta * delta
        lower = 1.0 / lower_den if lower_den > 0.0 else math.inf
        shrink = delta * np.sqrt(dims) * eps
        denominators = eps * delta * (1.0 + delta) * (3.0 + r - shrink)
        if np.any(denominators <= 0.0):
            upper = -math.inf
        else:
            upper = float(np.min((r - mu - delta * eps - shrink) / denominators))
        rng = _make_range(lower, upper, "random_noise", echo)
    return RandomNoiseVerdict(cond1=cond1, cond2=cond2, lambda_range=rng)


def fully_random_conditions(
    n: int,
    d: int,
    num_subspaces: int,
    kappa: float,
    sigma: float,
    c1: float = 1.0,
    c2: float = 1.0,
) -> FullyRandomVerdict:
    """Guarantee for uniformly random subspaces and samples, Gaussian noise.

    Uses c(kappa) = 1/sqrt(8), which is only licensed for large enough
    oversampling; kappa < 2 is refused.  c1 and c2 scale the interval
    endpoints and default to 1 (advisory: the analysis fixes neither).
    """
    if kappa < 2.0:
        raise InvalidInputError("kappa must be at least 2 for the c(kappa) constant")
    if not (0 < d < n) or num_subspaces < 1 or sigma < 0.0:
        raise InvalidInputError("need 0 < d < n, at least one subspace, sigma >= 0")
    total = num_subspaces * (kappa * d + 1.0)
    c_kappa = SQRT8_INV
    log_kappa = math.log(kappa)
    dim_bound = c_kappa**2 * log_kappa * n / (24.0 * math.log(total))
    sigma_bound = c_kappa**2 * log_kappa * math.sqrt(n) / (20.0 * d)
    dim_ok = d < dim_bound
    sigma_ok = sigma * (1.0 + sigma) < sigma_bound
    echo = {
        "n": n,
        "d": d,
        "L": num_subspaces,
        "kappa": kappa,
        "sigma": sigma,
        "N": total,
        "c_kappa": c_kappa,
        "dim_bound": dim_bound,
        "sigma_bound": sigma_bound,
        "c1": c1,
        "c2": c2,
        "advisory_constants": True,
    }
    lower = c1 * math.sqrt(d) / (c_kappa * math.sqrt(log_kappa))
    if sigma == 0.0:
        rng = _make_range(lower, None, "fully_random", echo)
    else:
        upper = c2 * c_kappa * math.sqrt(n * log_kappa) / (sigma * math.sqrt(d * math.log(total)))
        rng = _make_range(lower, upper, "fully_random", echo)
    return FullyRandomVerdict(dim_ok=dim_ok, sigma_ok=sigma_ok, lambda_range=rng)


@dataclass(frozen=True)
class SemirandomParams:
    """Inputs of the semi-random advisory bound.

    counts defaults to a balanced split of the total sample count; t is the
    caller-chosen tail parameter (the analysis does not pin it down).
    """

    n: int
    total_samples: int
    dims: tuple[int, ...]
    t: float
    counts: tuple[int, ...] | None = None

    def resolved_counts(self) -> np.ndarray:
        if self.counts is not None:
            if len(self.counts) != len(self.dims):
                raise InvalidInputError("counts and dims disagree in length")
            return np.asarray(self.counts, dtype=float)
        return np.full(len(self.dims), self.total_samples / len(self.dims))


@dataclass(frozen=True)
class SemirandomAdvisory:
    bound: float
    feasible: bool
    inputs_echo: dict

    def to_json(self) -> dict:
        return {
            "noise_product_bound": self.bound,
            "feasible": self.feasible,
            "advisory": True,
            "inputs_echo": self.inputs_echo,
        }


def semirandom_advisory(report: GeometryReport, params: SemirandomParams) -> SemirandomAdvisory:
    """Advisory bound on delta * (1 + delta) for deterministic subspaces with
    random in-subspace samples.

    Evaluates, over subspace pairs, the affinity-gap expression with
    K2 = 4 sqrt(1 / log kappa_l) and K1 = t * log((N_l + 1) N_l') + log L; the
    returned number is advisory because the tail constants are caller-chosen.
    Identical subspaces drive the bound to zero or below (infeasible); the
    bound never increases as affinities grow.
    """
    if params.t <= 0.0:
        raise InvalidInputError("t must be positive")
    dims = np.asarray(params.dims, dtype=float)
    counts = params.resolved_counts()
    num = len(dims)
    aff = np.asarray(report.affinity, dtype=float)
    if aff.shape != (num, num):
        raise InvalidInputError("affinity matrix does not match the dims list")
    if np.any(counts <= dims):
        raise InvalidInputError("each subspace needs more samples than its dimension")
    kappas = counts / dims
    log_kappa_over_d = float(np.min(np.log(kappas) / dims))
    if log_kappa_over_d <= 0.0:
        raise InvalidInputError("oversampling ratios must exceed 1")
    max_d = float(np.max(dims))
    if params.n <= max_d:
        raise InvalidInputError("ambient dimension must exceed every subspace dimension")
    prefix = math.sqrt((params.n - max_d) / (6.0 * math.log(params.total_samples)))

    best = -math.inf
    for ell in range(num):
        k2 = 4.0 * math.sqrt(1.0 / math.log(kappas[ell]))
        for ell_prime in range(num):
            if ell_prime == ell:
                continue
            k1 = params.t * math.log((counts[ell] + 1.0) * counts[ell_prime]) + math.log(num)
            gap = 1.0 - k1 * k2 * float(aff[ell, ell_prime]) / math.sqrt(dims[ell_prime])
            term = prefix * math.sqrt(log_kappa_over_d) / (40.0 * k2 * math.sqrt(dims[ell])) * gap
            best = max(best, float(term))
    echo = {
        "n": params.n,
        "N": params.total_samples,
        "dims": list(map(float, dims)),
        "counts": list(map(float, counts)),
        "t": params.t,
        "advisory_constants": True,
    }
    return SemirandomAdvisory(bound=best, feasible=best > 0.0, inputs_echo=echo)


def theorem_report(
    report: GeometryReport,
    n: int,
    total_samples: int,
    dims,
    fully_random: FullyRandomVerdict | None = None,
    advisory: SemirandomAdvisory | None = None,
) -> dict:
    """JSON-ready bundle of the verdicts for one dataset."""
    det = deterministic_conditions(report)
    rand = random_noise_conditions(report, n, total_samples, dims)

    def endpoint_rho(rng: LambdaRange) -> dict:
        delta = report.delta
        out = {}
        if math.isfinite(rng.lower):
            out["rho_at_lower"] = rng.lower * delta * (1.0 + delta)
        if rng.upper is not None and math.isfinite(rng.upper):
            out["rho_at_upper"] = rng.upper * delta * (1.0 + delta)
        return out

    payload = {
        "deterministic": {
            "delta_bound": det.delta_bound,
            "gap_ok": det.gap_ok,
            "lambda_range": det.lambda_range.to_json(),
            **endpoint_rho(det.lambda_range),
        },
        "random_noise": {
            "cond1": rand.cond1,
            "cond2": rand.cond2,
            "lambda_range": rand.lambda_range.to_json(),
            **endpoint_rho(rand.lambda_range),
        },
    }
    if fully_random is not None:
        payload["fully_random"] = {
            "dim_ok": fully_random.dim_ok,
            "sigma_ok": fully_random.sigma_ok,
            "lambda_range": fully_random.lambda_range.to_json(),
        }
    if advisory is not None:
        payload["semirandom_advisory"] = advisory.to_json()
    return payload
