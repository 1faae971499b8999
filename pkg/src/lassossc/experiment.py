"""Reproducible phase-transition experiment grids.

A grid sweeps a log-spaced lambda axis against one model axis (noise level,
subspace dimension, or subspace count), with several seeds per cell.  Every
cell derives its own random streams from (master_seed, cell index), so the
output is byte-identical no matter how many workers run it or in which order
cells finish.

Cells always execute in forked worker processes, one cell at a time, so every
cell sees the same numeric environment whatever the pool size.  (The CLI pins
BLAS threading to one thread before numpy loads; programmatic users get
determinism for whatever fixed BLAS configuration their process has.)
Wall-clock timings are written to a separate timings.csv so results.csv
itself stays deterministic.
"""

from __future__ import annotations

import hashlib
import json
import math
import multiprocessing
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .cluster import evaluate_clustering
from .core import InvalidSpecError
from .rng import RngSpec
from .simulate import ModelSpec, NoiseSpec, generate
from .solver import SolveConfig, solve_matrix

AXIS2_NAMES = ("sigma", "d", "L")

RESULT_COLUMNS = (
    "model",
    "n",
    "d",
    "L",
    "kappa",
    "sigma",
    "axis2",
    "axis2_value",
    "lambda",
    "seed",
    "verdict",
    "rel_violation",
    "above_gray_threshold",
    "accuracy",
    "trivial_columns",
    "iterations",
    "converged",
)


def default_lambda_grid(n: int, points: int = 25, lo_mult: float = 1e-2, hi_mult: float = 1e3):
    """Exponential lambda grid from sqrt(n)*lo_mult to sqrt(n)*hi_mult."""
    root = math.sqrt(n)
    return tuple(float(v) for v in np.geomspace(root * lo_mult, root * hi_mult, points))


@dataclass(frozen=True)
class ExperimentGrid:
    lambdas: tuple[float, ...]
    axis2_name: str
    axis2_values: tuple
    n: int = 100
    d: int = 4
    L: int = 3
    kappa: float = 5.0
    sigma: float = 0.0
    seeds: int = 1
    master_seed: int = 0
    gray_threshold: float = 0.1
    mode: str = "matrix"
    tol: float = 1e-6
    max_iter: int = 2000
    keep_coefficients: bool = False

    def __post_init__(self):
        if not self.lambdas or not self.axis2_values:
            raise InvalidSpecError("grid axes must be non-empty")
        if self.axis2_name not in AXIS2_NAMES:
            raise InvalidSpecError(f"axis2 must be one of {AXIS2_NAMES}")
        if self.seeds < 1:
            raise InvalidSpecError("need at least one seed per cell")
        object.__setattr__(self, "lambdas", tuple(float(v) for v in self.lambdas))
        object.__setattr__(self, "axis2_values", tuple(self.axis2_values))

    def cells(self) -> list[tuple[int, int, int]]:
        return [
            (i2, il, seed)
            for i2 in range(len(self.axis2_values))
            for il in range(len(self.lambdas))
            for seed in range(self.seeds)
        ]

    def cell_shape(self, i2: int) -> tuple[int, int, float]:
        """(d, L, sigma) effective at one axis2 position."""
        value = self.axis2_values[i2]
        d, num, sigma = self.d, self.L, self.sigma
        if self.axis2_name == "sigma":
            sigma = float(value)
        elif self.axis2_name == "d":
            d = int(value)
        else:
            num = int(value)
        return d, num, sigma

    def cell_model_spec(self, i2: int) -> ModelSpec:
        d, num, sigma = self.cell_shape(i2)
        return ModelSpec(
            model="fully_random",
            n=self.n,
            dims=(d,) * num,
            kappa=self.kappa,
            noise=NoiseSpec(kind="gaussian", sigma=sigma),
        )

    def to_json(self) -> dict:
        return {
            "lambdas": list(self.lambdas),
            "axis2": {"name": self.axis2_name, "values": list(self.axis2_values)},
            "n": self.n,
            "d": self.d,
            "L": self.L,
            "kappa": self.kappa,
            "sigma": self.sigma,
            "seeds": self.seeds,
            "master_seed": self.master_seed,
            "gray_threshold": self.gray_threshold,
            "mode": self.mode,
            "tol": self.tol,
            "max_iter": self.max_iter,
            "keep_coefficients": self.keep_coefficients,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "ExperimentGrid":
        try:
            lambdas = payload.get("lambdas")
            if lambdas is None or isinstance(lambdas, dict):
                opts = lambdas or {}
                lambdas = default_lambda_grid(
                    int(payload.get("n", 100)),
                    points=int(opts.get("points", 25)),
                    lo_mult=float(opts.get("lo_mult", 1e-2)),
                    hi_mult=float(opts.get("hi_mult", 1e3)),
                )
            axis2 = payload["axis2"]
            return cls(
                lambdas=tuple(lambdas),
                axis2_name=axis2["name"],
                axis2_values=tuple(axis2["values"]),
                n=int(payload.get("n", 100)),
                d=int(payload.get("d", 4)),
                L=int(payload.get("L", 3)),
                kappa=float(payload.get("kappa", 5.0)),
                sigma=float(payload.get("sigma", 0.0)),
                seeds=int(payload.get("seeds", 1)),
                master_seed=int(payload.get("master_seed", 0)),
                gray_threshold=float(payload.get("gray_threshold", 0.1)),
                mode=payload.get("mode", "matrix"),
                tol=float(payload.get("tol", 1e-6)),
                max_iter=int(payload.get("max_iter", 2000)),
                keep_coefficients=bool(payload.get("keep_coefficients", False)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidSpecError(f"bad grid file: {exc}") from exc

    def sha(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_json(), sort_keys=True).encode()
        ).hexdigest()


@dataclass(frozen=True)
class GridCellResult:
    i2: int
    il: int
    seed: int
    axis2_value: float
    lam: float
    d: int
    L: int
    sigma: float
    verdict: str
    rel_violation: float
    above_gray: bool
    accuracy: float
    trivial_columns: int
    iterations: int
    converged: bool
    runtime_ms: int

    def key(self) -> tuple[int, int, int]:
        return (self.i2, self.il, self.seed)


def classify_verdict(rel_violation_value: float, trivial_columns: int) -> str:
    """trivial beats gray beats white; white is exactly zero violation after
    the sub-threshold cleanup."""
    if trivial_columns > 0:
        return "trivial"
    if rel_violation_value == 0.0:
        return "white"
    return "gray"


def run_cell(grid: ExperimentGrid, i2: int, il: int, seed: int, out_dir=None) -> GridCellResult:
    """Generate, solve, and score one grid cell.

    The dataset stream depends only on (axis2 position, seed) so the lambda
    axis sweeps a fixed data instance, matching how the phase diagrams read.
    """
    started = time.perf_counter()
    spec = grid.cell_model_spec(i2)
    d, num, sigma = grid.cell_shape(i2)
    lam = grid.lambdas[il]
    dataset = generate(spec, RngSpec(grid.master_seed, ("data", i2, seed)))
    cfg = SolveConfig(
        lam=lam, mode=grid.mode, tol_primal=grid.tol, tol_dual=grid.tol, max_iter=grid.max_iter
    )
    solution = solve_matrix(dataset.data, cfg)
    outcome = evaluate_clustering(
        solution.coefficients,
        dataset.labels,
        num,
        RngSpec(grid.master_seed, ("cluster", i2, il, seed)),
        lam=lam,
        seed=seed,
    )
    verdict = classify_verdict(outcome.rel_violation, outcome.trivial_columns)
    if grid.keep_coefficients and out_dir is not None:
        cell_dir = Path(out_dir) / "cells" / f"{i2:03d}_{il:03d}_{seed:03d}"
        cell_dir.mkdir(parents=True, exist_ok=True)
        solution.coefficients.to_csv(cell_dir / "C.csv")
        with open(cell_dir / "solve.json", "w") as fh:
            json.dump(
                {
                    "lambda": lam,
                    "iterations": solution.iterations,
                    "objective": solution.objective,
                    "converged": solution.converged,
                },
                fh,
            )
            fh.write("\n")
    runtime_ms = int(round(1000.0 * (time.perf_counter() - started)))
    return GridCellResult(
        i2=i2,
        il=il,
        seed=seed,
        axis2_value=float(grid.axis2_values[i2]),
        lam=lam,
        d=d,
        L=num,
        sigma=sigma,
        verdict=verdict,
        rel_violation=outcome.rel_violation,
        above_gray=outcome.rel_violation > grid.gray_threshold,
        accuracy=outcome.accuracy,
        trivial_columns=outcome.trivial_columns,
        iterations=solution.iterations,
        converged=solution.converged,
        runtime_ms=runtime_ms,
    )


def _result_row(grid: ExperimentGrid, res: GridCellResult) -> list[str]:
    return [
        "fully_random",
        str(grid.n),
        str(res.d),
        str(res.L),
        repr(float(grid.kappa)),
        repr(float(res.sigma)),
        grid.axis2_name,
        repr(float(res.axis2_value)),
        repr(float(res.lam)),
        str(res.seed),
        res.verdict,
        repr(float(res.rel_violation)),
        str(int(res.above_gray)),
        repr(float(res.accuracy)),
        str(res.trivial_columns),
        str(res.iterations),
        str(int(res.converged)),
    ]


_WORKER_STATE: dict = {}


def _worker_init(grid_json: str, out_dir: str | None) -> None:
    _WORKER_STATE["grid"] = ExperimentGrid.from_json(json.loads(grid_json))
    _WORKER_STATE["out_dir"] = out_dir


def _worker_run(cell: tuple[int, int, int]) -> GridCellResult:
    grid = _WORKER_STATE["grid"]
    return run_cell(grid, *cell, out_dir=_WORKER_STATE["out_dir"])


def _worker_cap(requested: int) -> int:
    cap = os.environ.get("SSC_THREADS")
    workers = max(1, int(requested))
    if cap:
        workers = min(workers, max(1, int(cap)))
    return workers


def run_experiment(grid: ExperimentGrid, out_dir, workers: int = 1) -> Path:
    """Run every (axis2, lambda, seed) cell and write results.csv.

    Rows are ordered by cell index whatever the completion order.  Completed
    cells are flushed to results.partial.jsonl as they finish; interrupting
    leaves that file plus a resume.json marker, and a rerun with the same grid
    picks up where it stopped.  Returns the results.csv path.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid_sha = grid.sha()
    partial_path = out / "results.partial.jsonl"
    resume_path = out / "resume.json"

    done: dict[tuple[int, int, int], GridCellResult] = {}
    if resume_path.exists() and partial_path.exists():
        with open(resume_path) as fh:
            marker = json.load(fh)
        if marker.get("grid_sha") == grid_sha:
            with open(partial_path) as fh:
                for line in fh:
                    if line.strip():
                        payload = json.loads(line)
                        res = GridCellResult(**payload)
                        done[res.key()] = res

    pending = [cell for cell in grid.cells() if cell not in done]
    workers = _worker_cap(workers)

    if pending:
        ctx = multiprocessing.get_context("fork")
        pool = ctx.Pool(
            processes=workers,
            initializer=_worker_init,
            initargs=(json.dumps(grid.to_json()), str(out)),
        )
        try:
            with open(partial_path, "a") as partial:
                for res in pool.imap_unordered(_worker_run, pending, chunksize=1):
                    done[res.key()] = res
                    partial.write(json.dumps(res.__dict__) + "\n")
                    partial.flush()
            pool.close()
            pool.join()
        except BaseException:
            pool.terminate()
            pool.join()
            with open(resume_path, "w") as fh:
                json.dump({"grid_sha": grid_sha, "completed": len(done)}, fh)
                fh.write("\n")
            raise

    ordered = [done[cell] for cell in grid.cells()]
    results_path = out / "results.csv"
    with open(results_path, "w") as fh:
        fh.write(",".join(RESULT_COLUMNS) + "\n")
        for res in ordered:
            fh.write(",".join(_result_row(grid, res)) + "\n")
    with open(out / "timings.csv", "w") as fh:
        fh.write("axis2_index,lambda_index,seed,runtime_ms\n")
        for res in ordered:
            fh.write(f"{res.i2},{res.il},{res.seed},{res.runtime_ms}\n")
    with open(out / "meta.json", "w") as fh:
        json.dump({"grid": grid.to_json(), "grid_sha": grid_sha}, fh, indent=2)
        fh.write("\n")
    partial_path.unlink(missing_ok=True)
    resume_path.unlink(missing_ok=True)
    return results_path


def load_results(path) -> list[dict]:
    """Parse results.csv back into typed row dicts."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = []
        for line in fh:
            if not line.strip():
                continue
            raw = dict(zip(header, line.strip().split(",")))
            rows.append(
                {
                    "model": raw["model"],
                    "n": int(raw["n"]),
                    "d": int(raw["d"]),
                    "L": int(raw["L"]),
                    "kappa": float(raw["kappa"]),
                    "sigma": float(raw["sigma"]),
                    "axis2": raw["axis2"],
                    "axis2_value": float(raw["axis2_value"]),
                    "lambda": float(raw["lambda"]),
                    "seed": int(raw["seed"]),
                    "verdict": raw["verdict"],
                    "rel_violation": float(raw["rel_violation"]),
                    "above_gray_threshold": raw["above_gray_threshold"] == "1",
                    "accuracy": float(raw["accuracy"]),
                    "trivial_columns": int(raw["trivial_columns"]),
                    "iterations": int(raw["iterations"]),
                    "converged": raw["converged"] == "1",
                }
            )
    return rows
