"""Command-line harness: generate / solve / diagnose / cluster / experiment.

Exit codes: 0 success, 2 invalid spec or inputs, 3 I/O failure, 4 solver hit
its iteration cap (outputs are still written), 130 interrupted (partial
experiment results flushed with a resume marker).
"""

import os

# Pin BLAS threading before numpy loads: grid cells and acceptance runs must
# not depend on the host's thread count.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .cluster import ClusterResult, evaluate_clustering
from .core import (
    CoefficientMatrix,
    DataMatrix,
    InvalidInputError,
    InvalidSpecError,
    MissingCleanDataError,
    read_labels,
)
from .experiment import ExperimentGrid, run_experiment
from .geometry import geometry_report
from .rng import RngSpec
from .simulate import ModelSpec, generate, load_dataset, save_dataset
from .solver import SolveConfig, solve_matrix
from .theory import (
    SemirandomParams,
    fully_random_conditions,
    semirandom_advisory,
    theorem_report,
)

EXIT_OK = 0
EXIT_BAD_SPEC = 2
EXIT_IO = 3
EXIT_MAX_ITER = 4
EXIT_INTERRUPT = 130


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


def cmd_generate(args) -> int:
    payload = _load_json(args.spec)
    seed = args.seed if args.seed is not None else int(payload.get("seed", 0))
    spec = ModelSpec.from_json(payload)
    dataset = generate(spec, RngSpec(seed))
    save_dataset(dataset, spec, seed, args.out)
    delta = float(np.max(np.linalg.norm(dataset.data.values - dataset.clean.values, axis=0)))
    print(
        f"generated n={dataset.data.n} N={dataset.data.N} L={dataset.ensemble.L} "
        f"measured_delta={delta:.6g} -> {args.out}"
    )
    return EXIT_OK


def cmd_solve(args) -> int:
    data = DataMatrix.from_csv(args.data)
    lam = args.lam if args.lam is not None else math.sqrt(data.n)
    cfg = SolveConfig(
        lam=lam,
        mode=args.mode,
        tol_primal=args.tol,
        tol_dual=args.tol,
        max_iter=args.max_iter,
    )
    solution = solve_matrix(data, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    solution.coefficients.to_csv(out / "C.csv")
    trivial = bool(np.all(solution.coefficients.values == 0.0))
    with open(out / "solve.json", "w") as fh:
        json.dump(
            {
                "lambda": lam,
                "iterations": solution.iterations,
                "objective": solution.objective,
                "converged": solution.converged,
                "mode": args.mode,
                "trivial": trivial,
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    print(
        f"solved N={data.N} lambda={lam:.6g} iterations={solution.iterations} "
        f"objective={solution.objective:.6g} converged={solution.converged}"
        + (" trivial" if trivial else "")
    )
    if not solution.converged:
        print("warning: iteration cap reached; result is the best iterate", file=sys.stderr)
        return EXIT_MAX_ITER
    return EXIT_OK


def cmd_diagnose(args) -> int:
    dataset = load_dataset(args.data, args.labels, args.clean, args.ensemble)
    if dataset.clean is None or dataset.ensemble is None:
        raise MissingCleanDataError("diagnose needs --clean and --ensemble")
    lam = args.lam if args.lam is not None else math.sqrt(dataset.data.n)
    report = geometry_report(
        dataset, lam, budget=args.budget, rng=RngSpec(args.seed, ("diagnose",))
    )
    dims = dataset.ensemble.dims
    counts = [len(dataset.columns_of(ell)) for ell in range(dataset.ensemble.L)]

    fully = None
    if len(set(dims)) == 1 and min(counts) > dims[0] + 1:
        d = dims[0]
        kappa = (min(counts) - 1) / d
        noise = dataset.data.values - dataset.clean.values
        sigma_estimate = float(np.sqrt(np.mean(np.sum(noise * noise, axis=0))))
        if kappa >= 2.0:
            fully = fully_random_conditions(
                dataset.data.n, d, dataset.ensemble.L, kappa, sigma_estimate
            )
    advisory = None
    if min(counts) > max(dims):
        advisory = semirandom_advisory(
            report,
            SemirandomParams(
                n=dataset.data.n,
                total_samples=dataset.data.N,
                dims=dims,
                t=args.advisory_t,
                counts=tuple(counts),
            ),
        )
    payload = {
        "lambda": lam,
        "geometry": report.to_json(),
        "theorems": theorem_report(
            report, dataset.data.n, dataset.data.N, dims, fully_random=fully, advisory=advisory
        ),
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "diagnose.json", "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    det = payload["theorems"]["deterministic"]
    print(
        f"r_min={report.r_min:.6g} mu_max={max(report.mu_per_subspace):.6g} "
        f"delta={report.delta:.6g} gap_ok={det['gap_ok']} "
        f"lambda_range=({det['lambda_range']['lower']}, {det['lambda_range']['upper']})"
    )
    return EXIT_OK


def cmd_cluster(args) -> int:
    coeffs = CoefficientMatrix.from_csv(args.coefficients)
    labels = read_labels(args.labels)
    num = args.num_clusters if args.num_clusters is not None else max(labels) + 1
    lam = None
    sidecar = Path(args.coefficients).parent / "solve.json"
    if sidecar.exists():
        lam = _load_json(sidecar).get("lambda")
    result = evaluate_clustering(
        coeffs, labels, num, RngSpec(args.seed, ("cluster",)), lam=lam, seed=args.seed
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result.save(out / "cluster.json")
    print(
        f"accuracy={result.accuracy:.6g} rel_violation={result.rel_violation:.6g} "
        f"sep_holds={result.sep_holds} trivial_columns={result.trivial_columns}"
    )
    return EXIT_OK


def cmd_experiment(args) -> int:
    grid = ExperimentGrid.from_json(_load_json(args.grid))
    if args.seeds is not None:
        grid = ExperimentGrid.from_json({**grid.to_json(), "seeds": args.seeds})
    if args.keep_coefficients:
        grid = ExperimentGrid.from_json({**grid.to_json(), "keep_coefficients": True})
    path = run_experiment(grid, args.out, workers=args.workers)
    print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssc",
        description="Sparse subspace clustering with noise: solvers, diagnostics, experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="draw a synthetic union-of-subspaces dataset")
    p.add_argument("--spec", required=True, help="model spec JSON file")
    p.add_argument("--seed", type=int, default=None, help="master seed (overrides spec)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="solve the self-expression program")
    p.add_argument("--data", required=True, help="data.csv")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="tradeoff parameter (default sqrt(n))")
    p.add_argument("--mode", choices=("matrix", "column"), default="matrix")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("diagnose", help="geometry report and guarantee verdicts")
    p.add_argument("--data", required=True)
    p.add_argument("--clean", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--ensemble", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--budget", type=int, default=20000, help="inradius direction budget")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--advisory-t", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("cluster", help="spectral clustering and success metrics")
    p.add_argument("--coefficients", required=True, help="C.csv")
    p.add_argument("--labels", required=True)
    p.add_argument("--num-clusters", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("experiment", help="run a lambda x model-axis grid")
    p.add_argument("--grid", required=True, help="grid JSON file")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seeds", type=int, default=None, help="override seeds per cell")
    p.add_argument("--keep-coefficients", action="store_true")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InvalidSpecError, InvalidInputError, MissingCleanDataError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_SPEC
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except KeyboardInterrupt:
        print("interrupted; partial results and resume marker kept", file=sys.stderr)
        return EXIT_INTERRUPT


if __name__ == "__main__":
    sys.exit(main())
