"""Noise-robust sparse subspace clustering.

Library and CLI for the l1 self-expression approach to subspace clustering
under noise: ADMM solvers, spectral clustering, polytope-geometry diagnostics
(inradius, incoherence, affinity), guarantee calculators that turn measured
geometry into feasible lambda intervals, seeded data generators, and a
reproducible phase-transition experiment harness.
"""

from .cluster import (
    AffinityGraph,
    ClusterResult,
    build_affinity,
    check_sep_and_trivial,
    clustering_accuracy,
    evaluate_clustering,
    rel_violation,
    spectral_cluster,
)
from .core import (
    CoefficientMatrix,
    DataMatrix,
    LabeledDataset,
    SubspaceEnsemble,
    normalize_columns,
    orthonormal_basis,
    project_onto,
    soft_threshold,
    support_cutoff,
)
from .experiment import ExperimentGrid, GridCellResult, default_lambda_grid, run_cell, run_experiment
from .geometry import (
    GeometryReport,
    circumradius_polar,
    estimate_inradius,
    geometry_report,
    noise_magnitudes,
    projected_dual_direction,
    subspace_affinity,
    subspace_incoherence,
)
from .rng import RngSpec, Stream
from .simulate import (
    ModelSpec,
    NoiseSpec,
    gaussian_norm_check,
    generate,
    load_dataset,
    save_dataset,
    spherical_cap_check,
)
from .solver import (
    DualCertificate,
    SolveConfig,
    min_nontrivial_lambda,
    recover_dual,
    solve_column,
    solve_matrix,
    verify_certificate,
)
from .theory import (
    LambdaRange,
    SemirandomParams,
    deterministic_conditions,
    fully_random_conditions,
    random_noise_conditions,
    semirandom_advisory,
)

__version__ = "0.1.0"
